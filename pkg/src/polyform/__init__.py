"""polyform: exact canonical forms for block matrix problems over residue
rings, brute-force orbit verification, and CW-complex reports."""

from .matrix import BlockMatrix, StripProfile, canonical_hash, direct_sum, equals, validate
from .rings import Residue, canonical_residue, l12_split, l24_split, t4_merge, t8_merge
from .schema import SchemaId, StripId, admissible_moves, cell_domain

__all__ = [
    "BlockMatrix",
    "StripProfile",
    "Residue",
    "SchemaId",
    "StripId",
    "admissible_moves",
    "canonical_hash",
    "canonical_residue",
    "cell_domain",
    "direct_sum",
    "equals",
    "l12_split",
    "l24_split",
    "t4_merge",
    "t8_merge",
    "validate",
]
