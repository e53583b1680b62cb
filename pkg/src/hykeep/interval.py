"""Closed float intervals with outward rounding.

Every primitive widens its result to the adjacent float in the outward
direction unless an error-free transformation shows the rounded result
is exact, so zero bounds stay zero when they really are zero.
"""

from __future__ import annotations

import math
from fractions import Fraction

__all__ = ["Interval", "DivisionInterval", "PI", "TWO_PI", "HALF_PI"]

_INF = math.inf
_SPLITTER = 134217729.0  # 2**27 + 1


class DivisionInterval(ZeroDivisionError):
    """Denominator enclosure contains zero."""


def _down(x: float) -> float:
    return math.nextafter(x, -_INF)


def _up(x: float) -> float:
    return math.nextafter(x, _INF)


def _two_sum_err(a: float, b: float, s: float) -> float:
    """Exact ``(a + b) - s`` for ``s = fl(a + b)``."""
    bb = s - a
    return (a - (s - bb)) + (b - bb)


def _split(a: float):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod_sign(a: float, b: float, p: float) -> int:
    """Sign of ``a*b - p`` for ``p = fl(a*b)``."""
    if a == 0.0 or b == 0.0:
        return 0
    if abs(p) < 1e-290 or abs(a) > 1e290 or abs(b) > 1e290:
        exact = Fraction(a) * Fraction(b)
        fp = Fraction(p)
        return (exact > fp) - (exact < fp)
    ah, al = _split(a)
    bh, bl = _split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return (err > 0) - (err < 0)


# a round-to-nearest result is stepped outward only when it lies on the
# wrong side of the exact value; this keeps every operation monotone

def add_down(a, b):
    s = a + b
    if math.isinf(s):
        return _down(s) if s > 0 and math.isfinite(a) and math.isfinite(b) else s
    return s if _two_sum_err(a, b, s) >= 0 else _down(s)


def add_up(a, b):
    s = a + b
    if math.isinf(s):
        return _up(s) if s < 0 and math.isfinite(a) and math.isfinite(b) else s
    return s if _two_sum_err(a, b, s) <= 0 else _up(s)


def mul_down(a, b):
    p = a * b
    if math.isinf(p):
        # overflow from finite factors leaves the exact value finite
        return _down(p) if p > 0 and math.isfinite(a) and math.isfinite(b) else p
    return p if _two_prod_sign(a, b, p) >= 0 else _down(p)


def mul_up(a, b):
    p = a * b
    if math.isinf(p):
        return _up(p) if p < 0 and math.isfinite(a) and math.isfinite(b) else p
    return p if _two_prod_sign(a, b, p) <= 0 else _up(p)


def _frac_down(c: Fraction) -> float:
    f = float(c)
    return f if Fraction(f) <= c else _down(f)


def _frac_up(c: Fraction) -> float:
    f = float(c)
    return f if Fraction(f) >= c else _up(f)


class Interval:
    """Closed interval [lo, hi] of floats."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: float, hi: float | None = None):
        if hi is None:
            hi = lo
        lo, hi = float(lo), float(hi)
        if not (lo <= hi):
            raise ValueError(f"empty or invalid interval [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi

    @classmethod
    def from_fraction(cls, c: Fraction) -> "Interval":
        return cls(_frac_down(c), _frac_up(c))

    @classmethod
    def hull(cls, items) -> "Interval":
        items = list(items)
        return cls(min(i.lo for i in items), max(i.hi for i in items))

    # -- basic queries -----------------------------------------------------
    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        m = 0.5 * self.lo + 0.5 * self.hi
        return min(max(m, self.lo), self.hi)

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    def contains_zero(self) -> bool:
        return self.lo <= 0.0 <= self.hi

    def subset_of(self, other: "Interval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def intersect(self, other: "Interval"):
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return Interval(lo, hi) if lo <= hi else None

    def split(self):
        m = self.mid
        if not (self.lo < m < self.hi):
            m = self.lo + (self.hi - self.lo) / 2
        return Interval(self.lo, m), Interval(m, self.hi)

    def __eq__(self, other):
        return isinstance(other, Interval) and self.lo == other.lo and self.hi == other.hi

    def __hash__(self):
        return hash((self.lo, self.hi))

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"

    # -- arithmetic ----------------------------------------------------------
    @staticmethod
    def _lift(x):
        if isinstance(x, Interval):
            return x
        if isinstance(x, Fraction):
            return Interval.from_fraction(x)
        if isinstance(x, (int, float)):
            return Interval(x, x)
        return NotImplemented

    def __add__(self, other):
        o = Interval._lift(other)
        if o is NotImplemented:
            return o
        return Interval(add_down(self.lo, o.lo), add_up(self.hi, o.hi))

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        o = Interval._lift(other)
        if o is NotImplemented:
            return o
        return Interval(add_down(self.lo, -o.hi), add_up(self.hi, -o.lo))

    def __rsub__(self, other):
        return Interval._lift(other) - self

    def __mul__(self, other):
        o = Interval._lift(other)
        if o is NotImplemented:
            return o
        a, b, c, d = self.lo, self.hi, o.lo, o.hi
        pairs = ((a, c), (a, d), (b, c), (b, d))
        lo = min(mul_down(x, y) for x, y in pairs)
        hi = max(mul_up(x, y) for x, y in pairs)
        return Interval(lo, hi)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = Interval._lift(other)
        if o is NotImplemented:
            return o
        return self * o.reciprocal()

    def __rtruediv__(self, other):
        return Interval._lift(other) / self

    def reciprocal(self) -> "Interval":
        if self.lo <= 0.0 <= self.hi:
            raise DivisionInterval(f"denominator enclosure {self!r} contains 0")
        lo = 1.0 / self.hi
        hi = 1.0 / self.lo
        # 1/x is exact only for powers of two; always widen
        return Interval(_down(lo), _up(hi))

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("integer power expected")
        if n == 0:
            return Interval(1.0, 1.0)
        if n == 1:
            return self
        lo_p = _pow_bounds(self.lo, n)
        hi_p = _pow_bounds(self.hi, n)
        if n % 2 == 1:
            return Interval(lo_p[0], hi_p[1])
        if self.lo >= 0:
            return Interval(lo_p[0], hi_p[1])
        if self.hi <= 0:
            return Interval(hi_p[0], lo_p[1])
        return Interval(0.0, max(lo_p[1], hi_p[1]))

    # -- transcendental ---------------------------------------------------------
    def cos(self) -> "Interval":
        return _trig(self, math.cos, 0.0)

    def sin(self) -> "Interval":
        # sin x = cos(x - pi/2): maxima at pi/2 + 2k pi
        return _trig(self, math.sin, 0.5)


def _pow_bounds(x: float, n: int):
    """Outward bounds on x**n by repeated outward multiplication."""
    lo = hi = x
    for _ in range(n - 1):
        cands = (mul_down(lo, x), mul_up(lo, x), mul_down(hi, x), mul_up(hi, x))
        lo, hi = min(cands), max(cands)
    return lo, hi


# pi enclosure: float(pi) is below pi by about 1.2e-16
_PI_LO = 3.141592653589793
_PI_HI = math.nextafter(_PI_LO, _INF)
PI = Interval(_PI_LO, _PI_HI)
TWO_PI = Interval(2 * _PI_LO, 2 * _PI_HI)
HALF_PI = Interval(0.5 * _PI_LO, 0.5 * _PI_HI)


def _trig(x: Interval, fn, shift: float) -> Interval:
    """Enclosure of cos (shift=0) or sin (shift=1/2) over x.

    Extrema of cos lie at k*pi; for sin at (k + 1/2)*pi. The test for an
    extremum inside x uses both pi bounds so it errs towards including it.
    """
    if not (math.isfinite(x.lo) and math.isfinite(x.hi)):
        return Interval(-1.0, 1.0)
    if x.width >= 2 * _PI_HI:
        return Interval(-1.0, 1.0)
    # candidate integers k with (k + shift) * pi in x
    kmin = math.floor(x.lo / _PI_HI - shift) - 1
    kmax = math.ceil(x.hi / _PI_LO - shift) + 1
    a, b = fn(x.lo), fn(x.hi)
    # libm results are within one ulp; widen by two
    lo = min(a, b)
    hi = max(a, b)
    lo = _down(_down(lo))
    hi = _up(_up(hi))
    for k in range(kmin, kmax + 1):
        t = k + shift
        p_lo = t * _PI_LO if t >= 0 else t * _PI_HI
        p_hi = t * _PI_HI if t >= 0 else t * _PI_LO
        p_lo, p_hi = _down(p_lo), _up(p_hi)
        if p_hi < x.lo or p_lo > x.hi:
            continue
        # extremum value is +1 for even k (cos) / even k (sin at pi/2 + 2k pi)
        if k % 2 == 0:
            hi = 1.0
        else:
            lo = -1.0
    return Interval(max(lo, -1.0), min(hi, 1.0))
