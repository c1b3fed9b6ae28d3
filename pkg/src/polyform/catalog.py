"""The indecomposable normal-form catalogs.

One catalog per schema: the torsion-free list for A0, the sign-restricted
2- and 3-primary lists for Aprime2/Aprime3 under the plus groups, and the
full list for Aprime.  Each entry is a symbolic name (family word, value
v, Moore decorations r and s) together with its exact normal-form matrix.

The Aprime catalog was cross-checked family by family against exhaustive
orbit enumeration at small parameters; the checked list differs from the
source tables in two places (see the repository notes): the subscript-s
variants of the eta-v-etaeta family sit on an S_n1 row, the decorated
value set of the plain-v family is {3, 6, 9, 12}, and the fouransatz
classes whose nonzero entry lies in a Moore strip only (the 'a' family
below) are included.  The 1x0 / 0x1 wedge atoms are catalog entries too,
so decomposition is total.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .matrix import BlockMatrix
from .schema import SchemaId, StripId

S_N, S_N1, S_N2, C_ETA = StripId("S_n"), StripId("S_n1"), StripId("S_n2"), StripId("C_eta")
COL_P, COL_Q = StripId("S_n2"), StripId("S_n3")


def _m_row(s: int) -> StripId:
    return StripId("M3", s)


def _m_col(r: int) -> StripId:
    return StripId("M3", r)


# family tag -> (order index, base word pattern)
_FAMILIES = (
    "eta_v_eta",        # (I)    X(eta v eta)
    "etaeta_v_etaeta",  # (II-1) X(etaeta v etaeta)
    "etaeta_v_eta",     # (II-2) X(etaeta v eta)
    "eta_v_etaeta",     # (II-3) X(eta v etaeta)
    "etaeta_v",         # (II-4) X(etaeta v)
    "v_etaeta",         # (II-5) X(v etaeta)
    "eta_v",            # (II-6) X(eta v)
    "v_eta",            # (II-7) X(v eta)
    "v",                # (III)  X(v)
    "eta1",             # (IV-1) X(eta_1)
    "eta2",             # (IV-2) X(eta_2)
    "etaeta0",          # (IV-3) X(etaeta_0)
    "etaeta1",          # (IV-4) X(etaeta_1)
    "a",                # Moore-only classes [M_s|S_n3], [S_n|M3^r], [M_s|M3^r]
    "eta_a",            # Moore-only class [C_eta|M3^r]
    "atom_row",         # 1x0 wedge summands
    "atom_col",         # 0x1 wedge summands
)
_FAMILY_INDEX = {f: i for i, f in enumerate(_FAMILIES)}

_ROW_ATOM_ORDER = ("S_n", "S_n1", "S_n2", "C_eta", "M3")
_COL_ATOM_ORDER = ("S_n2", "S_n3", "M3")


class CatalogError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class IndecName:
    """Symbolic identifier of one catalog normal form."""

    family: str
    v: int | None = None
    r: int | None = None
    s: int | None = None
    strip: StripId | None = None  # atoms only
    schema_id: SchemaId = SchemaId("Aprime")

    def sort_key(self):
        return (_FAMILY_INDEX[self.family],
                self.strip.token if self.strip else "",
                self.v or 0, self.r or 0, self.s or 0)

    def __repr__(self) -> str:
        return render_name(self)


def _base_v_set(family: str, schema: SchemaId) -> tuple[int, ...]:
    name = schema.name
    if name in ("A0", "Aprime"):
        return {
            "eta_v_eta": (1, 2, 3),
            "etaeta_v_etaeta": (1, 2, 3, 4, 5, 6),
            "etaeta_v_eta": (1, 2, 3, 4, 5, 6),
            "eta_v_etaeta": (1, 2, 3, 4, 5, 6),
            "etaeta_v": (1, 2, 3, 4, 5, 6),
            "v_etaeta": (1, 2, 3, 4, 5, 6),
            "eta_v": (1, 2, 3, 4, 5, 6),
            "v_eta": (1, 2, 3, 4, 5, 6),
            "v": tuple(range(1, 13)),
        }.get(family, ())
    if name == "Aprime2":
        if schema.plus_restricted:
            return {
                "eta_v_eta": (1,),
                "etaeta_v_etaeta": (1, 2, 3),
                "etaeta_v_eta": (1, 2, 3),
                "eta_v_etaeta": (1, 2, 3),
                "etaeta_v": (1, 2, 3),
                "v_etaeta": (1, 2, 3),
                "eta_v": (1, 2, 3),
                "v_eta": (1, 2, 3),
                "v": tuple(range(1, 8)),
            }.get(family, ())
        # Under the unrestricted group signs collapse the ranges.
        return {
            "eta_v_eta": (1,),
            "etaeta_v_etaeta": (1, 2),
            "etaeta_v_eta": (1, 2),
            "eta_v_etaeta": (1, 2),
            "etaeta_v": (1, 2),
            "v_etaeta": (1, 2),
            "eta_v": (1, 2),
            "v_eta": (1, 2),
            "v": (1, 2, 3, 4),
        }.get(family, ())
    # Aprime3
    if schema.plus_restricted:
        return {"v": (1, 2), "eta_v": (1, 2)}.get(family, ())
    return {"v": (1,), "eta_v": (1,)}.get(family, ())


def _deco_v_set(family: str, schema: SchemaId) -> tuple[int, ...]:
    if schema.name != "Aprime":
        return ()
    return {
        "eta_v_eta": (3,),
        "etaeta_v_etaeta": (3, 6),
        "etaeta_v_eta": (3, 6),
        "eta_v_etaeta": (3, 6),
        "etaeta_v": (3, 6),
        "v_etaeta": (3, 6),
        "eta_v": (3, 6),
        "v_eta": (3, 6),
        "v": (3, 6, 9, 12),
    }.get(family, ())


def _decorations(family: str, schema: SchemaId) -> tuple[tuple[bool, bool], ...]:
    """Allowed (has_r, has_s) combinations beyond the base form."""
    if schema.name == "Aprime3":
        if family == "a":
            return ((False, True), (True, False), (True, True))
        if family == "eta_a":
            return ((True, False),)
        return ()
    if schema.name != "Aprime":
        return ()
    both = ((True, False), (False, True), (True, True))
    return {
        "eta_v_eta": both, "etaeta_v_etaeta": both, "etaeta_v_eta": both,
        "eta_v_etaeta": both, "etaeta_v": both, "v_etaeta": both,
        "eta_v": both, "v_eta": both, "v": both,
        "eta2": ((False, True),),
        "etaeta0": ((True, False),),
        "etaeta1": ((False, True),),
        "a": ((False, True), (True, False), (True, True)),
        "eta_a": ((True, False),),
    }.get(family, ())


def _check_name(name: IndecName, r_cap: int | None = None,
                s_cap: int | None = None) -> None:
    fam, schema = name.family, name.schema_id
    if fam not in _FAMILY_INDEX:
        raise CatalogError(f"unknown family {fam!r}")
    if fam == "atom_row":
        if name.strip is None or name.strip.kind not in _ROW_ATOM_ORDER:
            raise CatalogError("bad row atom")
        if name.v is not None or name.r is not None or name.s is not None:
            raise CatalogError("atoms take no parameters")
        return
    if fam == "atom_col":
        if name.strip is None or name.strip.kind not in _COL_ATOM_ORDER:
            raise CatalogError("bad column atom")
        if name.v is not None or name.r is not None or name.s is not None:
            raise CatalogError("atoms take no parameters")
        return
    if name.strip is not None:
        raise CatalogError("only atoms carry a strip")
    deco = (name.r is not None, name.s is not None)
    for p, cap in (("r", r_cap), ("s", s_cap)):
        val = getattr(name, p)
        if val is not None and val < 1:
            raise CatalogError(f"{p} must be >= 1")
        if val is not None and cap is not None and val > cap:
            raise CatalogError(f"{p}={val} exceeds cap {cap}")
    takes_v = fam not in ("eta1", "eta2", "etaeta0", "etaeta1", "a", "eta_a")
    if deco == (False, False):
        if fam in ("a", "eta_a"):
            raise CatalogError(f"family {fam} exists only with Moore decorations")
        if takes_v:
            allowed = _base_v_set(fam, schema)
            if not allowed:
                raise CatalogError(f"family {fam} has no entries under {schema}")
            if name.v not in allowed:
                raise CatalogError(f"v={name.v} not in {allowed} for {fam} under {schema}")
        elif name.v is not None:
            raise CatalogError(f"family {fam} takes no v")
        elif not (_base_v_set(fam, schema) or _family_exists_base(fam, schema)):
            raise CatalogError(f"family {fam} has no entries under {schema}")
        return
    if deco not in _decorations(fam, schema):
        raise CatalogError(f"decoration {deco} not available for {fam} under {schema}")
    if takes_v:
        allowed = _deco_v_set(fam, schema)
        if name.v not in allowed:
            raise CatalogError(f"v={name.v} not in {allowed} for decorated {fam}")
    elif name.v is not None:
        raise CatalogError(f"family {fam} takes no v")


def _family_exists_base(fam: str, schema: SchemaId) -> bool:
    if fam in ("eta1", "eta2", "etaeta0", "etaeta1"):
        return schema.name in ("A0", "Aprime", "Aprime2")
    return False


def catalog_entries(schema_id: SchemaId, r_cap: int = 4, s_cap: int = 4,
                    include_atoms: bool = True) -> list[IndecName]:
    """The complete catalog of a schema at the given Moore caps."""
    if schema_id.name != "A0" and (r_cap < 1 or s_cap < 1):
        raise CatalogError("caps must be >= 1")
    out: list[IndecName] = []
    for fam in _FAMILIES:
        if fam in ("atom_row", "atom_col"):
            continue
        takes_v = fam not in ("eta1", "eta2", "etaeta0", "etaeta1", "a", "eta_a")
        base_vs = _base_v_set(fam, schema_id)
        if takes_v:
            for v in base_vs:
                out.append(IndecName(fam, v=v, schema_id=schema_id))
        elif _family_exists_base(fam, schema_id):
            out.append(IndecName(fam, schema_id=schema_id))
        for has_r, has_s in _decorations(fam, schema_id):
            rs = range(1, r_cap + 1) if has_r else (None,)
            ss = range(1, s_cap + 1) if has_s else (None,)
            vs = _deco_v_set(fam, schema_id) if takes_v else (None,)
            for v in vs:
                for r in rs:
                    for s in ss:
                        out.append(IndecName(fam, v=v, r=r, s=s, schema_id=schema_id))
    if include_atoms:
        out.extend(atom_names(schema_id, r_cap, s_cap))
    return sorted(out, key=IndecName.sort_key)


def atom_names(schema_id: SchemaId, r_cap: int = 4, s_cap: int = 4) -> list[IndecName]:
    rows = [IndecName("atom_row", strip=StripId(k), schema_id=schema_id)
            for k in ("S_n", "S_n1", "S_n2", "C_eta")]
    cols = [IndecName("atom_col", strip=StripId(k), schema_id=schema_id)
            for k in ("S_n2", "S_n3")]
    if schema_id.name != "A0":
        rows += [IndecName("atom_row", strip=_m_row(s), schema_id=schema_id)
                 for s in range(1, s_cap + 1)]
        cols += [IndecName("atom_col", strip=_m_col(r), schema_id=schema_id)
                 for r in range(1, r_cap + 1)]
    return rows + cols


def matrix_of(name: IndecName) -> BlockMatrix:
    """The exact normal-form matrix of a catalog entry."""
    _check_name(name)
    fam, v, r, s, schema = name.family, name.v, name.r, name.s, name.schema_id
    b = _builder(fam)
    return b(schema, v, r, s, name.strip)


def _builder(fam: str):
    return {
        "eta_v_eta": _mx_eta_v_eta,
        "etaeta_v_etaeta": _mx_ii_wide(S_N1),
        "etaeta_v_eta": _mx_ii_wide(S_N2),
        "eta_v_etaeta": _mx_eta_v_etaeta,
        "etaeta_v": _mx_etaeta_v,
        "v_etaeta": _mx_ii_tall(S_N1),
        "eta_v": _mx_eta_v,
        "v_eta": _mx_ii_tall(S_N2),
        "v": _mx_v,
        "eta1": lambda sc, v, r, s, st: BlockMatrix.build(
            sc, [(S_N1, 1)], [(COL_P, 1)], {(S_N1, COL_P): [[1]]}),
        "eta2": _mx_eta2,
        "etaeta0": _mx_etaeta0,
        "etaeta1": _mx_etaeta1,
        "a": _mx_a,
        "eta_a": _mx_eta_a,
        "atom_row": lambda sc, v, r, s, st: BlockMatrix.build(sc, [(st, 1)], []),
        "atom_col": lambda sc, v, r, s, st: BlockMatrix.build(sc, [], [(st, 1)]),
    }[fam]


def _mx_eta_v_eta(sc, v, r, s, st):
    rows = [(S_N2, 1), (C_ETA, 1)] + ([(_m_row(s), 1)] if s else [])
    cols = [(COL_Q, 1)] + ([(_m_col(r), 1)] if r else [])
    ent = {(S_N2, COL_Q): [[1]], (C_ETA, COL_Q): [[v]]}
    if r:
        ent[(C_ETA, _m_col(r))] = [[1]]
    if s:
        ent[(_m_row(s), COL_Q)] = [[1]]
    return BlockMatrix.build(sc, rows, cols, ent)


def _mx_ii_wide(second_row):
    def build(sc, v, r, s, st):
        rows = [(S_N, 1), (second_row, 1)] + ([(_m_row(s), 1)] if s else [])
        cols = [(COL_P, 1), (COL_Q, 1)] + ([(_m_col(r), 1)] if r else [])
        ent = {(S_N, COL_P): [[1]], (S_N, COL_Q): [[v]],
               (second_row, COL_Q): [[1]]}
        if r:
            ent[(S_N, _m_col(r))] = [[1]]
        if s:
            ent[(_m_row(s), COL_Q)] = [[1]]
        return BlockMatrix.build(sc, rows, cols, ent)
    return build


def _mx_eta_v_etaeta(sc, v, r, s, st):
    rows = [(S_N1, 1), (C_ETA, 1)] + ([(_m_row(s), 1)] if s else [])
    cols = [(COL_Q, 1)] + ([(_m_col(r), 1)] if r else [])
    ent = {(S_N1, COL_Q): [[1]], (C_ETA, COL_Q): [[v]]}
    if r:
        ent[(C_ETA, _m_col(r))] = [[1]]
    if s:
        ent[(_m_row(s), COL_Q)] = [[1]]
    return BlockMatrix.build(sc, rows, cols, ent)


def _mx_etaeta_v(sc, v, r, s, st):
    rows = [(S_N, 1)] + ([(_m_row(s), 1)] if s else [])
    cols = [(COL_P, 1), (COL_Q, 1)] + ([(_m_col(r), 1)] if r else [])
    ent = {(S_N, COL_P): [[1]], (S_N, COL_Q): [[v]]}
    if r:
        ent[(S_N, _m_col(r))] = [[1]]
    if s:
        ent[(_m_row(s), COL_Q)] = [[1]]
    return BlockMatrix.build(sc, rows, cols, ent)


def _mx_ii_tall(second_row):
    def build(sc, v, r, s, st):
        rows = [(S_N, 1), (second_row, 1)] + ([(_m_row(s), 1)] if s else [])
        cols = [(COL_Q, 1)] + ([(_m_col(r), 1)] if r else [])
        ent = {(S_N, COL_Q): [[v]], (second_row, COL_Q): [[1]]}
        if r:
            ent[(S_N, _m_col(r))] = [[1]]
        if s:
            ent[(_m_row(s), COL_Q)] = [[1]]
        return BlockMatrix.build(sc, rows, cols, ent)
    return build


def _mx_eta_v(sc, v, r, s, st):
    rows = [(C_ETA, 1)] + ([(_m_row(s), 1)] if s else [])
    cols = [(COL_Q, 1)] + ([(_m_col(r), 1)] if r else [])
    ent = {(C_ETA, COL_Q): [[v]]}
    if r:
        ent[(C_ETA, _m_col(r))] = [[1]]
    if s:
        ent[(_m_row(s), COL_Q)] = [[1]]
    return BlockMatrix.build(sc, rows, cols, ent)


def _mx_v(sc, v, r, s, st):
    rows = [(S_N, 1)] + ([(_m_row(s), 1)] if s else [])
    cols = [(COL_Q, 1)] + ([(_m_col(r), 1)] if r else [])
    ent = {(S_N, COL_Q): [[v]]}
    if r:
        ent[(S_N, _m_col(r))] = [[1]]
    if s:
        ent[(_m_row(s), COL_Q)] = [[1]]
    return BlockMatrix.build(sc, rows, cols, ent)


def _mx_eta2(sc, v, r, s, st):
    rows = [(S_N2, 1)] + ([(_m_row(s), 1)] if s else [])
    ent = {(S_N2, COL_Q): [[1]]}
    if s:
        ent[(_m_row(s), COL_Q)] = [[1]]
    return BlockMatrix.build(sc, rows, [(COL_Q, 1)], ent)


def _mx_etaeta0(sc, v, r, s, st):
    cols = [(COL_P, 1)] + ([(_m_col(r), 1)] if r else [])
    ent = {(S_N, COL_P): [[1]]}
    if r:
        ent[(S_N, _m_col(r))] = [[1]]
    return BlockMatrix.build(sc, [(S_N, 1)], cols, ent)


def _mx_etaeta1(sc, v, r, s, st):
    rows = [(S_N1, 1)] + ([(_m_row(s), 1)] if s else [])
    ent = {(S_N1, COL_Q): [[1]]}
    if s:
        ent[(_m_row(s), COL_Q)] = [[1]]
    return BlockMatrix.build(sc, rows, [(COL_Q, 1)], ent)


def _mx_a(sc, v, r, s, st):
    if r and s:
        return BlockMatrix.build(sc, [(_m_row(s), 1)], [(_m_col(r), 1)],
                                 {(_m_row(s), _m_col(r)): [[1]]})
    if s:
        return BlockMatrix.build(sc, [(_m_row(s), 1)], [(COL_Q, 1)],
                                 {(_m_row(s), COL_Q): [[1]]})
    return BlockMatrix.build(sc, [(S_N, 1)], [(_m_col(r), 1)],
                             {(S_N, _m_col(r)): [[1]]})


def _mx_eta_a(sc, v, r, s, st):
    return BlockMatrix.build(sc, [(C_ETA, 1)], [(_m_col(r), 1)],
                             {(C_ETA, _m_col(r)): [[1]]})


# Text rendering and parsing.

_ATOM_RENDER = {
    ("atom_row", "S_n"): "S^n", ("atom_row", "S_n1"): "S^{n+1}",
    ("atom_row", "S_n2"): "S^{n+2}", ("atom_row", "C_eta"): "C_eta",
    ("atom_col", "S_n2"): "S^{n+3}", ("atom_col", "S_n3"): "S^{n+4}",
}

_WORDS = {
    "eta_v_eta": ("eta", "v", "eta"),
    "etaeta_v_etaeta": ("etaeta", "v", "etaeta"),
    "etaeta_v_eta": ("etaeta", "v", "eta"),
    "eta_v_etaeta": ("eta", "v", "etaeta"),
    "etaeta_v": ("etaeta", "v"),
    "v_etaeta": ("v", "etaeta"),
    "eta_v": ("eta", "v"),
    "v_eta": ("v", "eta"),
    "v": ("v",),
    "eta1": ("eta_1",),
    "eta2": ("eta_2",),
    "etaeta0": ("etaeta_0",),
    "etaeta1": ("etaeta_1",),
    "a": ("a",),
    "eta_a": ("eta", "a"),
}
_WORD_TO_FAMILY = {w: f for f, w in _WORDS.items()}


def render_name(name: IndecName) -> str:
    if name.family == "atom_row":
        if name.strip.kind == "M3":
            return f"M(3^{name.strip.param},n)"
        return _ATOM_RENDER[("atom_row", name.strip.kind)]
    if name.family == "atom_col":
        if name.strip.kind == "M3":
            return f"M(3^{name.strip.param},n+3)"
        return _ATOM_RENDER[("atom_col", name.strip.kind)]
    word = " ".join(str(name.v) if t == "v" else t for t in _WORDS[name.family])
    out = f"X({word})"
    if name.r is not None:
        out += f"^{name.r}"
    if name.s is not None:
        out += f"_{name.s}"
    return out


_NAME_RE = re.compile(r"^X\((?P<word>[^)]*)\)(?:\^(?P<r>\d+))?(?:_(?P<s>\d+))?$")
_ATOM_ROW_M = re.compile(r"^M\(3\^(\d+),n\)$")
_ATOM_COL_M = re.compile(r"^M\(3\^(\d+),n\+3\)$")


def parse_name(text: str, schema_id: SchemaId = SchemaId("Aprime"),
               r_cap: int | None = None, s_cap: int | None = None) -> IndecName:
    """Inverse of render_name; rejects names outside the catalog."""
    text = text.strip()
    for (fam, kind), tok in _ATOM_RENDER.items():
        if text == tok:
            return IndecName(fam, strip=StripId(kind), schema_id=schema_id)
    m = _ATOM_ROW_M.match(text)
    if m:
        return IndecName("atom_row", strip=StripId("M3", int(m.group(1))),
                         schema_id=schema_id)
    m = _ATOM_COL_M.match(text)
    if m:
        return IndecName("atom_col", strip=StripId("M3", int(m.group(1))),
                         schema_id=schema_id)
    m = _NAME_RE.match(text)
    if not m:
        raise CatalogError(f"cannot parse name {text!r}")
    tokens = tuple(m.group("word").split())
    v = None
    pattern = []
    for t in tokens:
        if t.lstrip("-").isdigit():
            if v is not None:
                raise CatalogError(f"two values in name {text!r}")
            v = int(t)
            pattern.append("v")
        else:
            pattern.append(t)
    fam = _WORD_TO_FAMILY.get(tuple(pattern))
    if fam is None:
        raise CatalogError(f"unknown family word in {text!r}")
    r = int(m.group("r")) if m.group("r") else None
    s = int(m.group("s")) if m.group("s") else None
    name = IndecName(fam, v=v, r=r, s=s, schema_id=schema_id)
    _check_name(name, r_cap, s_cap)
    return name
