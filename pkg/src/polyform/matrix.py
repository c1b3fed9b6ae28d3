"""Strip-profiled block matrices with per-cell residue rings.

A BlockMatrix is the value the whole library revolves around: rows and
columns come in strips, and the (row strip, column strip) cell prescribes
the ring of every entry inside it.  Matrices are immutable; the transform
engine returns new values.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .rings import Residue
from .schema import (
    SchemaId,
    StripId,
    col_order,
    full_cell_modulus,
    row_order,
)

_PART_MAPS = {
    "A0": {0: 0, 2: 2, 3: 3, 12: 12, 24: 24},
    "Aprime": {0: 0, 2: 2, 3: 3, 12: 12, 24: 24},
    "Aprime2": {0: 0, 2: 2, 3: 0, 12: 4, 24: 8},
    "Aprime3": {0: 0, 2: 0, 3: 3, 12: 3, 24: 3},
}


def cell_modulus(schema_id: SchemaId, row: StripId, col: StripId) -> int:
    """Modulus of a cell under a schema (0 for the zero cell)."""
    return _PART_MAPS[schema_id.name][full_cell_modulus(row, col)]


class MatrixError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class StripProfile:
    """Ordered (strip, dimension) lists for rows and columns.

    Strips appear in the fixed table order, each at most once, with
    dimension >= 1; absent strips have dimension 0.  Empty row or column
    lists are legal (they encode the 1x0 / 0x1 wedge summands).
    """

    rows: tuple[tuple[StripId, int], ...]
    cols: tuple[tuple[StripId, int], ...]

    @staticmethod
    def make(rows, cols) -> "StripProfile":
        def norm(pairs, order):
            pairs = [(s, int(d)) for s, d in pairs if d != 0]
            if any(d < 0 for _, d in pairs):
                raise MatrixError("negative strip dimension")
            seen = [s for s, _ in pairs]
            if len(seen) != len(set(seen)):
                raise MatrixError("strip repeated in profile")
            return tuple(sorted(pairs, key=lambda p: order(p[0])))

        return StripProfile(norm(rows, row_order), norm(cols, col_order))

    def row_dim(self, strip: StripId) -> int:
        for s, d in self.rows:
            if s == strip:
                return d
        return 0

    def col_dim(self, strip: StripId) -> int:
        for s, d in self.cols:
            if s == strip:
                return d
        return 0

    @property
    def total_rows(self) -> int:
        return sum(d for _, d in self.rows)

    @property
    def total_cols(self) -> int:
        return sum(d for _, d in self.cols)


@dataclass(frozen=True)
class BlockMatrix:
    """An element of the matrix set of a schema.

    ``blocks`` maps (row strip, col strip) to a tuple-of-tuples of ints,
    one entry per matrix position, canonical in the cell's ring.  Cells
    whose ring is zero are not stored.
    """

    schema_id: SchemaId
    profile: StripProfile
    blocks: dict = field(default_factory=dict)

    @staticmethod
    def build(schema_id: SchemaId, rows, cols, entries=None) -> "BlockMatrix":
        """Construct and validate.

        ``entries`` maps (row strip, col strip) to a nested list of ints;
        omitted cells are zero-filled.
        """
        profile = StripProfile.make(rows, cols)
        blocks = {}
        entries = dict(entries or {})
        for rs, nr in profile.rows:
            for cs, nc in profile.cols:
                m = cell_modulus(schema_id, rs, cs)
                if m == 0:
                    continue
                given = entries.pop((rs, cs), None)
                if given is None:
                    block = tuple(tuple(0 for _ in range(nc)) for _ in range(nr))
                else:
                    block = tuple(tuple(int(x) for x in r) for r in given)
                blocks[(rs, cs)] = block
        if entries:
            key = next(iter(entries))
            raise MatrixError(f"entries given for cell {key} outside profile "
                              "or in a zero cell")
        mat = BlockMatrix(schema_id, profile, blocks)
        problem = validate(mat)
        if problem is not None:
            raise MatrixError(problem)
        return mat

    def entry(self, row_strip: StripId, i: int, col_strip: StripId, j: int) -> int:
        block = self.blocks.get((row_strip, col_strip))
        if block is None:
            return 0
        return block[i][j]

    def residue(self, row_strip: StripId, i: int, col_strip: StripId, j: int) -> Residue:
        m = cell_modulus(self.schema_id, row_strip, col_strip)
        if m == 0:
            raise MatrixError(f"cell ({row_strip}, {col_strip}) is zero")
        return Residue(self.entry(row_strip, i, col_strip, j), m)

    def is_zero(self) -> bool:
        return all(x == 0 for b in self.blocks.values() for r in b for x in r)

    def _key(self):
        return (
            self.schema_id,
            self.profile.rows,
            self.profile.cols,
            tuple(sorted(
                ((rs.token, cs.token, block) for (rs, cs), block in self.blocks.items())
            )),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, BlockMatrix):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __repr__(self) -> str:
        rows = ",".join(f"{s}:{d}" for s, d in self.profile.rows)
        cols = ",".join(f"{s}:{d}" for s, d in self.profile.cols)
        parts = []
        for (rs, cs), block in sorted(self.blocks.items(),
                                      key=lambda kv: (kv[0][0].token, kv[0][1].token)):
            if any(x for r in block for x in r):
                parts.append(f"{rs}/{cs}={list(map(list, block))}")
        body = "; ".join(parts) if parts else "0"
        return f"<{self.schema_id} [{rows} x {cols}] {body}>"


def validate(m: BlockMatrix) -> str | None:
    """Check profile/ring/zero-cell invariants; None if fine, else the first
    violation as a message."""
    seen_rows = [s for s, _ in m.profile.rows]
    if seen_rows != sorted(seen_rows, key=row_order) or len(set(seen_rows)) != len(seen_rows):
        return "row strips out of order or repeated"
    seen_cols = [s for s, _ in m.profile.cols]
    if seen_cols != sorted(seen_cols, key=col_order) or len(set(seen_cols)) != len(seen_cols):
        return "column strips out of order or repeated"
    expected = set()
    for rs, nr in m.profile.rows:
        for cs, nc in m.profile.cols:
            mod = cell_modulus(m.schema_id, rs, cs)
            if mod == 0:
                if (rs, cs) in m.blocks and any(x for r in m.blocks[(rs, cs)] for x in r):
                    return f"zero cell ({rs}, {cs}) stores a nonzero value"
                if (rs, cs) in m.blocks:
                    return f"zero cell ({rs}, {cs}) is stored"
                continue
            expected.add((rs, cs))
            block = m.blocks.get((rs, cs))
            if block is None:
                return f"cell ({rs}, {cs}) missing"
            if len(block) != nr or any(len(r) != nc for r in block):
                return f"cell ({rs}, {cs}) has wrong shape"
            for r in block:
                for x in r:
                    if not isinstance(x, int) or not 0 <= x < mod:
                        return (f"entry {x!r} in cell ({rs}, {cs}) is not canonical "
                                f"mod {mod}")
    extra = set(m.blocks) - expected
    if extra:
        rs, cs = sorted(extra, key=lambda k: (k[0].token, k[1].token))[0]
        return f"unexpected block at ({rs}, {cs})"
    return None


def empty_matrix(schema_id: SchemaId) -> BlockMatrix:
    return BlockMatrix.build(schema_id, [], [])


def direct_sum(m1: BlockMatrix, m2: BlockMatrix) -> BlockMatrix:
    """Block-diagonal sum; strip dimensions add, blocks land diagonally."""
    if m1.schema_id != m2.schema_id:
        raise MatrixError("direct sum across different schemas")
    strips_r = sorted({s for s, _ in m1.profile.rows} | {s for s, _ in m2.profile.rows},
                      key=row_order)
    strips_c = sorted({s for s, _ in m1.profile.cols} | {s for s, _ in m2.profile.cols},
                      key=col_order)
    rows = [(s, m1.profile.row_dim(s) + m2.profile.row_dim(s)) for s in strips_r]
    cols = [(s, m1.profile.col_dim(s) + m2.profile.col_dim(s)) for s in strips_c]
    entries = {}
    for rs, nr in rows:
        r1 = m1.profile.row_dim(rs)
        for cs, nc in cols:
            if cell_modulus(m1.schema_id, rs, cs) == 0:
                continue
            c1 = m1.profile.col_dim(cs)
            block = [[0] * nc for _ in range(nr)]
            b1 = m1.blocks.get((rs, cs))
            if b1 is not None:
                for i, row in enumerate(b1):
                    for j, x in enumerate(row):
                        block[i][j] = x
            b2 = m2.blocks.get((rs, cs))
            if b2 is not None:
                for i, row in enumerate(b2):
                    for j, x in enumerate(row):
                        block[r1 + i][c1 + j] = x
            entries[(rs, cs)] = block
    return BlockMatrix.build(m1.schema_id, rows, cols, entries)


def direct_sum_all(schema_id: SchemaId, mats) -> BlockMatrix:
    out = empty_matrix(schema_id)
    for m in mats:
        out = direct_sum(out, m)
    return out


def equals(m1: BlockMatrix, m2: BlockMatrix) -> bool:
    """Literal equality of profile and canonical entries."""
    return m1 == m2


def canonical_hash(m: BlockMatrix) -> str:
    """Stable digest: equal matrices hash equal, across runs."""
    h = hashlib.sha256()
    h.update(repr(m.schema_id).encode())
    for side in (m.profile.rows, m.profile.cols):
        for s, d in side:
            h.update(f"|{s.token}:{d}".encode())
    for (rs, cs), block in sorted(m.blocks.items(),
                                  key=lambda kv: (kv[0][0].token, kv[0][1].token)):
        h.update(f"#{rs.token}/{cs.token}".encode())
        for row in block:
            h.update((",".join(map(str, row)) + ";").encode())
    return h.hexdigest()
