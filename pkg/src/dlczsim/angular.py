"""Angular momentum coupling for hyperfine Raman transitions.

Clebsch-Gordan coefficients are evaluated from the Racah closed form with
exact big-integer rationals, so selection rules produce exact zeros and the
only rounding is the final square root.  On top of that sit the branching
amplitudes of a three-level (ground a, excited c, ground b) Raman scheme
driven by right-circular light, and the mixing angle that those amplitudes
induce between the two scattered-photon helicities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

__all__ = [
    "HalfInt",
    "LevelScheme",
    "BranchingTable",
    "cg",
    "branching_table",
    "mixing_angle",
    "mixing_cos_sq",
]


@dataclass(frozen=True, order=True)
class HalfInt:
    """An integer or half-integer quantum number, stored as twice its value.

    Storing ``2j`` as an int keeps arithmetic and selection rules exact;
    ``HalfInt(3)`` is 3/2 and ``HalfInt(6)`` is 3.
    """

    twice: int

    @classmethod
    def of(cls, value) -> "HalfInt":
        """Coerce an int, float, Fraction or HalfInt into a HalfInt."""
        if isinstance(value, HalfInt):
            return value
        doubled = 2 * Fraction(value)
        if doubled.denominator != 1:
            raise ValueError(f"{value!r} is not an integer or half-integer")
        return cls(int(doubled))

    @property
    def value(self) -> float:
        return self.twice / 2

    def is_integer(self) -> bool:
        return self.twice % 2 == 0

    def __add__(self, other) -> "HalfInt":
        return HalfInt(self.twice + HalfInt.of(other).twice)

    __radd__ = __add__

    def __sub__(self, other) -> "HalfInt":
        return HalfInt(self.twice - HalfInt.of(other).twice)

    def __rsub__(self, other) -> "HalfInt":
        return HalfInt(HalfInt.of(other).twice - self.twice)

    def __neg__(self) -> "HalfInt":
        return HalfInt(-self.twice)

    def __abs__(self) -> "HalfInt":
        return HalfInt(abs(self.twice))

    def __str__(self) -> str:
        if self.twice % 2 == 0:
            return str(self.twice // 2)
        return f"{self.twice}/2"

    def __repr__(self) -> str:
        return f"HalfInt({self})"


def projections(j: HalfInt) -> list[HalfInt]:
    """All magnetic sublevels -j, -j+1, ..., +j."""
    return [HalfInt(t) for t in range(-j.twice, j.twice + 1, 2)]


def _triangle_ok(tj1: int, tj2: int, tj3: int) -> bool:
    """Triangle rule on doubled angular momenta, including integer perimeter."""
    if (tj1 + tj2 + tj3) % 2 != 0:
        return False
    return abs(tj1 - tj2) <= tj3 <= tj1 + tj2


def _check_jm(tj: int, tm: int) -> None:
    if tj < 0:
        raise ValueError(f"total angular momentum must be >= 0, got {tj / 2}")
    if (tj + tm) % 2 != 0:
        raise ValueError(
            f"projection {tm / 2} is not an integer step away from j={tj / 2}"
        )


@lru_cache(maxsize=None)
def _cg_signed_square(tj1: int, tm1: int, tj2: int, tm2: int, tJ: int, tM: int):
    """Signed square of a Clebsch-Gordan coefficient as (sign, Fraction).

    Everything up to the final square root is exact.  Couplings that violate
    a selection rule come back as (0, Fraction(0)).
    """
    if tM != tm1 + tm2:
        return 0, Fraction(0)
    if not _triangle_ok(tj1, tj2, tJ):
        return 0, Fraction(0)
    if abs(tm1) > tj1 or abs(tm2) > tj2 or abs(tM) > tJ:
        return 0, Fraction(0)

    f = math.factorial
    # Racah's closed form; every factorial argument below is a non-negative
    # integer once the parity and triangle checks above have passed.
    delta = Fraction(
        f((tj1 + tj2 - tJ) // 2) * f((tj1 - tj2 + tJ) // 2) * f((-tj1 + tj2 + tJ) // 2),
        f((tj1 + tj2 + tJ) // 2 + 1),
    )
    weight = (
        f((tJ + tM) // 2)
        * f((tJ - tM) // 2)
        * f((tj1 - tm1) // 2)
        * f((tj1 + tm1) // 2)
        * f((tj2 - tm2) // 2)
        * f((tj2 + tm2) // 2)
    )

    k_lo = max(0, (tj2 - tJ - tm1) // 2, (tj1 - tJ + tm2) // 2)
    k_hi = min((tj1 + tj2 - tJ) // 2, (tj1 - tm1) // 2, (tj2 + tm2) // 2)
    total = Fraction(0)
    for k in range(k_lo, k_hi + 1):
        term = Fraction(
            1,
            f(k)
            * f((tj1 + tj2 - tJ) // 2 - k)
            * f((tj1 - tm1) // 2 - k)
            * f((tj2 + tm2) // 2 - k)
            * f((tJ - tj2 + tm1) // 2 + k)
            * f((tJ - tj1 - tm2) // 2 + k),
        )
        total += -term if k % 2 else term

    if total == 0:
        return 0, Fraction(0)
    sign = 1 if total > 0 else -1
    square = Fraction(tJ + 1) * delta * weight * total * total
    return sign, square


def cg(j1, m1, j2, m2, J, M) -> float:
    """Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M> (Condon-Shortley).

    Arguments may be ints, floats, Fractions or HalfInt.  Invalid couplings
    (M != m1+m2, triangle violations, |m| > j) return exactly 0.0.
    """
    tj1, tm1 = HalfInt.of(j1).twice, HalfInt.of(m1).twice
    tj2, tm2 = HalfInt.of(j2).twice, HalfInt.of(m2).twice
    tJ, tM = HalfInt.of(J).twice, HalfInt.of(M).twice
    _check_jm(tj1, tm1)
    _check_jm(tj2, tm2)
    _check_jm(tJ, tM)
    sign, square = _cg_signed_square(tj1, tm1, tj2, tm2, tJ, tM)
    if sign == 0:
        return 0.0
    return sign * math.sqrt(float(square))


@dataclass(frozen=True)
class LevelScheme:
    """Ground level a, storage level b and excited level c of a Raman scheme.

    The a->c leg absorbs one photon and the c->b leg emits one, so both
    pairs must satisfy the dipole triangle rule with j=1.
    """

    f_a: HalfInt
    f_b: HalfInt
    f_c: HalfInt

    def __post_init__(self):
        for name, f in (("f_a", self.f_a), ("f_b", self.f_b), ("f_c", self.f_c)):
            if not isinstance(f, HalfInt):
                raise TypeError(f"{name} must be a HalfInt, got {type(f).__name__}")
            if f.twice < 0:
                raise ValueError(f"{name} must be >= 0, got {f}")
        if not _triangle_ok(self.f_a.twice, 2, self.f_c.twice):
            raise ValueError(
                f"f_a={self.f_a} and f_c={self.f_c} are not dipole-coupled"
            )
        if not _triangle_ok(self.f_c.twice, 2, self.f_b.twice):
            raise ValueError(
                f"f_c={self.f_c} and f_b={self.f_b} are not dipole-coupled"
            )

    @classmethod
    def of(cls, f_a, f_b, f_c) -> "LevelScheme":
        return cls(HalfInt.of(f_a), HalfInt.of(f_b), HalfInt.of(f_c))


@dataclass(frozen=True)
class BranchingTable:
    """Two-photon branching amplitudes X_m(alpha) of a Raman scheme.

    ``X_m(alpha)`` is the product of the absorption coefficient
    <f_a m; 1 +1 | f_c m+1> (right-circular drive) and the emission
    coefficient <f_c m+1; 1 alpha | f_b m+1+alpha> for scattered helicity
    alpha in {-1, +1}.  Exact signed squares are kept alongside the float
    amplitudes so downstream ratios stay rational.
    """

    scheme: LevelScheme
    entries: dict = field(compare=False)
    signed_squares: dict = field(compare=False, repr=False)

    def amplitude(self, m, alpha: int) -> float:
        """X_m(alpha); 0.0 for any (m, alpha) outside the table."""
        return self.entries.get((HalfInt.of(m).twice, alpha), 0.0)

    def square(self, m, alpha: int) -> Fraction:
        sign, sq = self.signed_squares.get((HalfInt.of(m).twice, alpha), (0, Fraction(0)))
        return sq

    def sum_squares(self, alpha: int | None = None) -> Fraction:
        """Exact sum of X_m^2 over m, for one helicity or for both."""
        alphas = (-1, +1) if alpha is None else (alpha,)
        return sum(
            (sq for (tm, a), (s, sq) in self.signed_squares.items() if a in alphas),
            Fraction(0),
        )


def branching_table(scheme: LevelScheme) -> BranchingTable:
    """Tabulate X_m(alpha) for every ground sublevel m and helicity alpha."""
    entries = {}
    squares = {}
    for m in projections(scheme.f_a):
        up_sign, up_sq = _cg_signed_square(
            scheme.f_a.twice, m.twice, 2, 2, scheme.f_c.twice, m.twice + 2
        )
        for alpha in (-1, +1):
            down_sign, down_sq = _cg_signed_square(
                scheme.f_c.twice,
                m.twice + 2,
                2,
                2 * alpha,
                scheme.f_b.twice,
                m.twice + 2 + 2 * alpha,
            )
            sign = up_sign * down_sign
            square = up_sq * down_sq
            value = sign * math.sqrt(float(square)) if sign else 0.0
            entries[(m.twice, alpha)] = value
            squares[(m.twice, alpha)] = (sign, square)
    return BranchingTable(scheme=scheme, entries=entries, signed_squares=squares)


def mixing_cos_sq(scheme: LevelScheme) -> Fraction:
    """Exact cos^2(eta) = sum_m X_m^2(-1) / sum_m,alpha X_m^2(alpha)."""
    table = branching_table(scheme)
    minus = table.sum_squares(-1)
    total = table.sum_squares()
    if total == 0:
        raise ValueError(
            f"scheme {scheme} has no allowed two-photon path; mixing angle undefined"
        )
    return minus / total


def mixing_angle(scheme: LevelScheme) -> float:
    """Mixing angle eta in [0, pi/2] between the two scattered helicities."""
    return math.acos(math.sqrt(float(mixing_cos_sq(scheme))))
