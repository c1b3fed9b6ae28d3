"""The four block-matrix problem schemas.

A schema fixes three things: which row and column strips exist, which
residue ring sits in each (row strip, column strip) cell, and which
row/column transformations are admissible.  Everything downstream (the
transform engine, the orbit search, the reducer) is driven by this data.

Schemas:
  A0       -- the torsion-free problem: sphere and C_eta strips only.
  Aprime   -- the main problem: A0 plus Moore strips M3^s (rows) and
              M3^r (columns) for 3-primary torsion.
  Aprime2  -- the 2-primary component of Aprime (Moore cells vanish).
  Aprime3  -- the 3-primary component of Aprime (2-torsion cells vanish).

Aprime2/Aprime3 optionally carry the sign-restricted transformation group
(``plus_restricted``): scalings by -1 are forbidden and swaps must negate
one of the two swapped lines, either everywhere (Aprime2) or on the
S_n / C_eta rows and the S_n3 column only (Aprime3).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

SCHEMA_NAMES = ("A0", "Aprime", "Aprime2", "Aprime3")

ROW_KINDS = ("S_n", "S_n1", "S_n2", "C_eta", "M3")
COL_KINDS = ("S_n2", "S_n3", "M3")

DEFAULT_MOORE_CAP = 4


class SchemaError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class StripId:
    """One strip: a kind plus the Moore parameter (rows: s, columns: r)."""

    kind: str
    param: int | None = None

    def __post_init__(self):
        if self.kind == "M3":
            if self.param is None or self.param < 1:
                raise SchemaError("Moore strip needs a parameter >= 1")
        elif self.param is not None:
            raise SchemaError(f"strip {self.kind} takes no parameter")

    @property
    def token(self) -> str:
        if self.kind == "M3":
            return f"M3^{self.param}"
        return self.kind

    @staticmethod
    def parse(token: str) -> "StripId":
        if token.startswith("M3^"):
            return StripId("M3", int(token[3:]))
        return StripId(token)

    def __repr__(self) -> str:
        return self.token


# Canonical strip order (table order; Moore strips ascending in parameter).
def row_order(strip: StripId) -> int:
    if strip.kind == "M3":
        return 4 + strip.param
    return {"S_n": 0, "S_n1": 1, "S_n2": 2, "C_eta": 3}[strip.kind]


def col_order(strip: StripId) -> int:
    if strip.kind == "M3":
        return 2 + strip.param
    return {"S_n2": 0, "S_n3": 1}[strip.kind]


@dataclass(frozen=True, slots=True)
class SchemaId:
    name: str
    plus_restricted: bool = False

    def __post_init__(self):
        if self.name not in SCHEMA_NAMES:
            raise SchemaError(f"unknown schema {self.name!r}")
        if self.plus_restricted and self.name not in ("Aprime2", "Aprime3"):
            raise SchemaError("plus restriction only applies to Aprime2/Aprime3")

    def __repr__(self) -> str:
        return self.name + ("+" if self.plus_restricted else "")


@dataclass(frozen=True, slots=True)
class CellDomain:
    """Either the zero cell or Z/m."""

    modulus: int  # 0 encodes the zero cell

    @property
    def is_zero(self) -> bool:
        return self.modulus == 0


# Cell rings of the main problem, by (row kind, col kind); 0 is the zero cell.
_FULL_CELLS = {
    ("S_n", "S_n2"): 2, ("S_n", "S_n3"): 24, ("S_n", "M3"): 3,
    ("S_n1", "S_n2"): 2, ("S_n1", "S_n3"): 2, ("S_n1", "M3"): 0,
    ("S_n2", "S_n2"): 0, ("S_n2", "S_n3"): 2, ("S_n2", "M3"): 0,
    ("C_eta", "S_n2"): 0, ("C_eta", "S_n3"): 12, ("C_eta", "M3"): 3,
    ("M3", "S_n2"): 0, ("M3", "S_n3"): 3, ("M3", "M3"): 3,
}

# 2-primary / 3-primary replacement of each full cell ring.
_TWO_PART = {0: 0, 2: 2, 3: 0, 12: 4, 24: 8}
_THREE_PART = {0: 0, 2: 0, 3: 3, 12: 3, 24: 3}


def full_cell_modulus(row: StripId, col: StripId) -> int:
    return _FULL_CELLS[(row.kind, col.kind)]


@dataclass(frozen=True, slots=True)
class MoveRule:
    """One admissible transformation family.

    kind       -- row_add / col_add / row_scale / col_scale / row_swap /
                  col_swap.
    src, dst   -- strips; equal for within-strip adds, scales and swaps.
    mult       -- coefficient restriction for adds: the move applies
                  ``mult * k`` times the source line (mult is 1, 2 or 6).
    signed_swap -- swaps only; True means the swap negates one line.
    """

    kind: str
    src: StripId
    dst: StripId
    mult: int = 1
    signed_swap: bool = False

    def __repr__(self) -> str:
        if self.kind.endswith("add"):
            coef = {1: "k", 2: "2k", 6: "6k"}[self.mult]
            return f"{self.kind}({self.src}->{self.dst}, {coef})"
        if self.kind.endswith("swap"):
            return f"{self.kind}({self.src}{', signed' if self.signed_swap else ''})"
        return f"{self.kind}({self.src})"


class Schema:
    """A fully instantiated schema: strips, cell rings, and move rules."""

    def __init__(self, schema_id: SchemaId, r_cap: int = DEFAULT_MOORE_CAP,
                 s_cap: int = DEFAULT_MOORE_CAP):
        if schema_id.name != "A0" and (r_cap < 1 or s_cap < 1):
            raise SchemaError("Moore caps must be >= 1")
        self.id = schema_id
        self.r_cap = 0 if schema_id.name == "A0" else r_cap
        self.s_cap = 0 if schema_id.name == "A0" else s_cap
        rows = [StripId("S_n"), StripId("S_n1"), StripId("S_n2"), StripId("C_eta")]
        rows += [StripId("M3", s) for s in range(1, self.s_cap + 1)]
        cols = [StripId("S_n2"), StripId("S_n3")]
        cols += [StripId("M3", r) for r in range(1, self.r_cap + 1)]
        self.row_strips = tuple(rows)
        self.col_strips = tuple(cols)
        self._rules = self._build_rules()

    def has_row_strip(self, strip: StripId) -> bool:
        return strip in self.row_strips

    def has_col_strip(self, strip: StripId) -> bool:
        return strip in self.col_strips

    def cell_modulus(self, row: StripId, col: StripId) -> int:
        """The modulus of one cell (0 for the zero cell)."""
        if not self.has_row_strip(row) or not self.has_col_strip(col):
            raise SchemaError(f"cell ({row}, {col}) not in schema {self.id}")
        full = full_cell_modulus(row, col)
        if self.id.name == "Aprime2":
            return _TWO_PART[full]
        if self.id.name == "Aprime3":
            return _THREE_PART[full]
        return full

    def cell_domain(self, row: StripId, col: StripId) -> CellDomain:
        return CellDomain(self.cell_modulus(row, col))

    @property
    def rules(self) -> tuple[MoveRule, ...]:
        return self._rules

    def _build_rules(self) -> tuple[MoveRule, ...]:
        plus = self.id.plus_restricted
        # Strips where the plus restriction removes scalings and signs swaps.
        if self.id.name == "Aprime2" and plus:
            restricted_rows = set(self.row_strips)
            restricted_cols = set(self.col_strips)
        elif self.id.name == "Aprime3" and plus:
            restricted_rows = {StripId("S_n"), StripId("C_eta")}
            restricted_cols = {StripId("S_n3")}
        else:
            restricted_rows = set()
            restricted_cols = set()

        rules: list[MoveRule] = []
        # Elementary transformations of each strip.
        for strip in self.row_strips:
            rules.append(MoveRule("row_add", strip, strip))
            if strip not in restricted_rows:
                rules.append(MoveRule("row_scale", strip, strip))
            rules.append(MoveRule("row_swap", strip, strip,
                                  signed_swap=strip in restricted_rows))
        for strip in self.col_strips:
            rules.append(MoveRule("col_add", strip, strip))
            if strip not in restricted_cols:
                rules.append(MoveRule("col_scale", strip, strip))
            rules.append(MoveRule("col_swap", strip, strip,
                                  signed_swap=strip in restricted_cols))

        s_n, s_n1, s_n2 = StripId("S_n"), StripId("S_n1"), StripId("S_n2")
        c_eta = StripId("C_eta")
        # Cross-strip row additions.
        rules.append(MoveRule("row_add", s_n1, s_n))
        rules.append(MoveRule("row_add", s_n2, s_n))
        rules.append(MoveRule("row_add", s_n2, s_n1))
        rules.append(MoveRule("row_add", s_n, c_eta))
        rules.append(MoveRule("row_add", c_eta, s_n, mult=2))
        rules.append(MoveRule("row_add", s_n2, c_eta, mult=6))
        for s in range(1, self.s_cap + 1):
            rules.append(MoveRule("row_add", s_n, StripId("M3", s)))
            rules.append(MoveRule("row_add", c_eta, StripId("M3", s)))
        # Moore-to-Moore additions go from higher parameter to lower; all
        # pairs are rules (the endomorphism tables carry every such entry,
        # and adjacent steps cannot be composed on profiles that skip an
        # intermediate parameter).
        for s_hi in range(2, self.s_cap + 1):
            for s_lo in range(1, s_hi):
                rules.append(MoveRule("row_add", StripId("M3", s_hi), StripId("M3", s_lo)))
        # Cross-strip column additions.
        rules.append(MoveRule("col_add", StripId("S_n2"), StripId("S_n3")))
        for r in range(1, self.r_cap + 1):
            rules.append(MoveRule("col_add", StripId("S_n3"), StripId("M3", r)))
        for r_hi in range(2, self.r_cap + 1):
            for r_lo in range(1, r_hi):
                rules.append(MoveRule("col_add", StripId("M3", r_hi), StripId("M3", r_lo)))
        return tuple(rules)


@lru_cache(maxsize=None)
def get_schema(schema_id: SchemaId, r_cap: int = DEFAULT_MOORE_CAP,
               s_cap: int = DEFAULT_MOORE_CAP) -> Schema:
    return Schema(schema_id, r_cap, s_cap)


def admissible_moves(schema_id: SchemaId, r_cap: int = DEFAULT_MOORE_CAP,
                     s_cap: int = DEFAULT_MOORE_CAP) -> tuple[MoveRule, ...]:
    """The complete finite rule list of a schema."""
    return get_schema(schema_id, r_cap, s_cap).rules


def cell_domain(schema_id: SchemaId, row: StripId, col: StripId,
                r_cap: int = DEFAULT_MOORE_CAP,
                s_cap: int = DEFAULT_MOORE_CAP) -> CellDomain:
    return get_schema(schema_id, r_cap, s_cap).cell_domain(row, col)


def compose_factor(row_src: StripId, row_dst: StripId, axis: StripId,
                   is_row_add: bool) -> int:
    """Extra factor a composite addition picks up in the affected cell.

    The only non-trivial case is a Z/2 entry landing in a Z/24 cell, which
    contributes 12 times the coefficient (the cube of the Hopf class).
    Everything else composes with factor 1; the 2k/6k restrictions live in
    MoveRule.mult.
    """
    if is_row_add:
        src_m = full_cell_modulus(row_src, axis)
        dst_m = full_cell_modulus(row_dst, axis)
    else:
        src_m = full_cell_modulus(axis, row_src)
        dst_m = full_cell_modulus(axis, row_dst)
    if src_m == 2 and dst_m == 24:
        return 12
    return 1
