"""Splitting a main-problem matrix into its 2- and 3-primary components
and merging the pair back, entrywise, via the ring isomorphisms
Z/24 = Z/8 x Z/3 and Z/12 = Z/4 x Z/3.
"""

from __future__ import annotations

from .matrix import BlockMatrix, MatrixError, cell_modulus
from .rings import Residue, l12_split, l24_split, t4_merge, t8_merge
from .schema import SchemaId, full_cell_modulus


def split_parts(m: BlockMatrix, plus: bool = False) -> tuple[BlockMatrix, BlockMatrix]:
    """Entrywise 2-/3-primary split of an Aprime matrix.

    Returns (two_part, three_part) on the same strip profile, tagged with
    the Aprime2 / Aprime3 schemas (sign-restricted when ``plus``).
    """
    if m.schema_id.name != "Aprime":
        raise MatrixError("split_parts expects an Aprime matrix")
    id2 = SchemaId("Aprime2", plus)
    id3 = SchemaId("Aprime3", plus)
    ent2, ent3 = {}, {}
    for (rs, cs), block in m.blocks.items():
        full = full_cell_modulus(rs, cs)
        m2 = cell_modulus(id2, rs, cs)
        m3 = cell_modulus(id3, rs, cs)
        if m2:
            ent2[(rs, cs)] = [[x % m2 for x in row] for row in block]
        if m3:
            ent3[(rs, cs)] = [[x % m3 for x in row] for row in block]
        assert bool(m2 or m3) == bool(full)
    two = BlockMatrix.build(id2, m.profile.rows, m.profile.cols, ent2)
    three = BlockMatrix.build(id3, m.profile.rows, m.profile.cols, ent3)
    return two, three


def merge_parts(two: BlockMatrix, three: BlockMatrix) -> BlockMatrix:
    """Inverse of split_parts: merge matched 2-/3-primary matrices."""
    if two.schema_id.name != "Aprime2" or three.schema_id.name != "Aprime3":
        raise MatrixError("merge_parts expects an (Aprime2, Aprime3) pair")
    if (two.profile.rows, two.profile.cols) != (three.profile.rows, three.profile.cols):
        raise MatrixError("profiles of the two parts differ")
    target = SchemaId("Aprime")
    entries = {}
    for rs, nr in two.profile.rows:
        for cs, nc in two.profile.cols:
            full = full_cell_modulus(rs, cs)
            if full == 0:
                continue
            b2 = two.blocks.get((rs, cs))
            b3 = three.blocks.get((rs, cs))
            block = [[0] * nc for _ in range(nr)]
            for i in range(nr):
                for j in range(nc):
                    x2 = b2[i][j] if b2 is not None else None
                    x3 = b3[i][j] if b3 is not None else None
                    if full == 24:
                        block[i][j] = t8_merge(Residue(x2, 8), Residue(x3, 3)).value
                    elif full == 12:
                        block[i][j] = t4_merge(Residue(x2, 4), Residue(x3, 3)).value
                    elif full == 2:
                        block[i][j] = x2
                    else:
                        block[i][j] = x3
            entries[(rs, cs)] = block
    return BlockMatrix.build(target, two.profile.rows, two.profile.cols, entries)
