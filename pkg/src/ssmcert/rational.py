"""Exact rationals and rigorous rational intervals.

Everything in the certified paths goes through ``Fraction`` and
``RationalInterval``. Irrational quantities (roots, logarithms) are only ever
handled as enclosures with rational endpoints.
"""
from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Union

Number = Union[int, Fraction]

DEFAULT_BITS = 60


def parse_rational(text: str) -> Fraction:
    """Parse ``p/q``, an integer, or a decimal literal exactly."""
    text = text.strip()
    if not text:
        raise ValueError("empty rational literal")
    if "/" in text:
        p, q = text.split("/", 1)
        try:
            value = Fraction(int(p), int(q))
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"bad rational literal {text!r}") from exc
        return value
    try:
        return Fraction(Decimal(text))
    except (InvalidOperation, ValueError) as exc:
        raise ValueError(f"bad rational literal {text!r}") from exc


def format_rational(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def iroot_floor(n: int, k: int) -> int:
    """Largest integer y with y**k <= n, for n >= 0, by integer bisection."""
    if n < 0 or k < 1:
        raise ValueError("iroot_floor needs n >= 0 and k >= 1")
    if n < 2 or k == 1:
        return n
    lo, hi = 0, 1 << (n.bit_length() // k + 1)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if mid**k <= n:
            lo = mid
        else:
            hi = mid
    return lo


def exact_root(x: Fraction, k: int) -> Fraction | None:
    """Return x**(1/k) if it is rational, else None."""
    p, q = x.numerator, x.denominator
    rp, rq = iroot_floor(p, k), iroot_floor(q, k)
    if rp**k == p and rq**k == q:
        return Fraction(rp, rq)
    return None


@dataclass(frozen=True)
class RationalInterval:
    """Closed interval [lo, hi] with rational endpoints."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", Fraction(self.lo))
        object.__setattr__(self, "hi", Fraction(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x: Number) -> "RationalInterval":
        return cls(Fraction(x), Fraction(x))

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def is_point(self) -> bool:
        return self.lo == self.hi

    def contains(self, x) -> bool:
        if isinstance(x, RationalInterval):
            return self.lo <= x.lo and x.hi <= self.hi
        if isinstance(x, float):
            return float(self.lo) <= x <= float(self.hi)
        return self.lo <= Fraction(x) <= self.hi

    def __contains__(self, x) -> bool:
        return self.contains(x)

    def __float__(self) -> float:
        return float(self.mid)

    @staticmethod
    def _coerce(other) -> "RationalInterval":
        if isinstance(other, RationalInterval):
            return other
        return RationalInterval.point(other)

    def __add__(self, other):
        o = self._coerce(other)
        return RationalInterval(self.lo + o.lo, self.hi + o.hi)

    __radd__ = __add__

    def __neg__(self):
        return RationalInterval(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        ps = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return RationalInterval(min(ps), max(ps))

    __rmul__ = __mul__

    def reciprocal(self) -> "RationalInterval":
        if self.lo <= 0 <= self.hi:
            raise ZeroDivisionError("interval contains zero")
        return RationalInterval(1 / self.hi, 1 / self.lo)

    def __truediv__(self, other):
        return self * self._coerce(other).reciprocal()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.reciprocal()

    def __pow__(self, k: int):
        if k < 0:
            return (self ** (-k)).reciprocal()
        if self.lo >= 0:
            return RationalInterval(self.lo**k, self.hi**k)
        if self.hi <= 0:
            a, b = self.hi**k, self.lo**k
            return RationalInterval(min(a, b), max(a, b))
        hi = max(self.lo**k, self.hi**k)
        lo = min(self.lo**k, 0) if k % 2 else Fraction(0)
        return RationalInterval(lo, hi)

    def __repr__(self) -> str:
        return f"RationalInterval({float(self.lo):.17g}, {float(self.hi):.17g})"


def root_interval(x: Number, k: int, bits: int = DEFAULT_BITS) -> RationalInterval:
    """Enclosure of x**(1/k) for rational x >= 0 of absolute width <= 2**-bits.

    Exact (a point interval) whenever the root is rational.
    """
    x = Fraction(x)
    if x < 0:
        raise ValueError("root of a negative number")
    if k < 1:
        raise ValueError("root order must be positive")
    exact = exact_root(x, k)
    if exact is not None:
        return RationalInterval.point(exact)
    # x^(1/k) = (p q^(k-1))^(1/k) / q ; scale by 2^bits before taking the floor root
    p, q = x.numerator, x.denominator
    y = iroot_floor(p * q ** (k - 1) << (bits * k), k)
    den = q << bits
    return RationalInterval(Fraction(y, den), Fraction(y + 1, den))


def interval_root(x: RationalInterval, k: int, bits: int = DEFAULT_BITS) -> RationalInterval:
    """Enclosure of the k-th root over a nonnegative interval (root is monotone)."""
    return RationalInterval(root_interval(x.lo, k, bits).lo, root_interval(x.hi, k, bits).hi)


def rational_from_float(x: float, max_den: int) -> Fraction:
    return Fraction(x).limit_denominator(max_den)


def round_down(x: Fraction, max_den: int) -> Fraction:
    """Largest fraction with denominator max_den that is <= x."""
    n = (x.numerator * max_den) // x.denominator
    return Fraction(n, max_den)


def round_up(x: Fraction, max_den: int) -> Fraction:
    n = -((-x.numerator * max_den) // x.denominator)
    return Fraction(n, max_den)
