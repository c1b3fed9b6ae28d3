"""Exact arithmetic in Z/m for the closed set of moduli used by the matrix
problems, plus the 2-/3-primary splitting and merging isomorphisms.

Every scalar in a block matrix is a Residue.  Only the moduli that actually
occur as cell rings or Moore coefficient rings are admissible; anything else
is rejected early so a wiring bug in a schema table cannot go unnoticed.
"""

from __future__ import annotations

from dataclasses import dataclass

_FIXED_MODULI = frozenset({2, 3, 4, 8, 12, 24})


def is_admissible_modulus(m: int) -> bool:
    """True for m in {2, 3, 4, 8, 12, 24} or any positive power of 3."""
    if m in _FIXED_MODULI:
        return True
    if m < 3:
        return False
    while m % 3 == 0:
        m //= 3
    return m == 1


class InadmissibleModulus(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class Residue:
    """An element of Z/m with the least non-negative representative.

    Equality and hashing are on the canonical (value, modulus) pair, which
    keeps orbit search and matrix hashing deterministic.
    """

    value: int
    modulus: int

    def __post_init__(self):
        if not is_admissible_modulus(self.modulus):
            raise InadmissibleModulus(f"modulus {self.modulus} is not admissible")
        if not 0 <= self.value < self.modulus:
            raise ValueError(f"{self.value} is not canonical mod {self.modulus}")

    def __add__(self, other: "Residue") -> "Residue":
        self._check(other)
        return Residue((self.value + other.value) % self.modulus, self.modulus)

    def __sub__(self, other: "Residue") -> "Residue":
        self._check(other)
        return Residue((self.value - other.value) % self.modulus, self.modulus)

    def __mul__(self, other: "Residue") -> "Residue":
        self._check(other)
        return Residue((self.value * other.value) % self.modulus, self.modulus)

    def __neg__(self) -> "Residue":
        return Residue((-self.value) % self.modulus, self.modulus)

    def is_unit(self) -> bool:
        from math import gcd

        return gcd(self.value, self.modulus) == 1

    def _check(self, other: "Residue") -> None:
        if self.modulus != other.modulus:
            raise ValueError(f"modulus mismatch: {self.modulus} vs {other.modulus}")

    def __repr__(self) -> str:
        return f"{self.value} (mod {self.modulus})"


def canonical_residue(x: int, m: int) -> Residue:
    """Reduce an arbitrary integer to its canonical residue mod m."""
    if not is_admissible_modulus(m):
        raise InadmissibleModulus(f"modulus {m} is not admissible")
    return Residue(x % m, m)


def l24_split(v: Residue) -> tuple[Residue, Residue]:
    """Z/24 -> Z/8 x Z/3, the ring isomorphism sending 1 to (1, 1)."""
    if v.modulus != 24:
        raise ValueError("l24_split expects a residue mod 24")
    return Residue(v.value % 8, 8), Residue(v.value % 3, 3)


def t8_merge(a: Residue, b: Residue) -> Residue:
    """Z/8 x Z/3 -> Z/24 via (a, b) |-> 9a + 16b; inverse of l24_split."""
    if a.modulus != 8 or b.modulus != 3:
        raise ValueError("t8_merge expects residues mod 8 and mod 3")
    return Residue((9 * a.value + 16 * b.value) % 24, 24)


def l12_split(v: Residue) -> tuple[Residue, Residue]:
    """Z/12 -> Z/4 x Z/3, the ring isomorphism sending 1 to (1, 1)."""
    if v.modulus != 12:
        raise ValueError("l12_split expects a residue mod 12")
    return Residue(v.value % 4, 4), Residue(v.value % 3, 3)


def t4_merge(a: Residue, b: Residue) -> Residue:
    """Z/4 x Z/3 -> Z/12 via (a, b) |-> 9a + 4b; inverse of l12_split."""
    if a.modulus != 4 or b.modulus != 3:
        raise ValueError("t4_merge expects residues mod 4 and mod 3")
    return Residue((9 * a.value + 4 * b.value) % 12, 12)
