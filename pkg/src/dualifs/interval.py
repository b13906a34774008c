"""Closed real intervals with outward rounding.

Every operation rounds its endpoints one ulp outward with ``math.nextafter``
so the returned interval always contains the exact range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

_INF = math.inf


def _down(v: float) -> float:
    return math.nextafter(v, -_INF)


def _up(v: float) -> float:
    return math.nextafter(v, _INF)


@dataclass(frozen=True, slots=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @staticmethod
    def point(v: float) -> "Interval":
        return Interval(v, v)

    @staticmethod
    def of(v) -> "Interval":
        """Enclose a float, int, Fraction or Interval."""
        if isinstance(v, Interval):
            return v
        if isinstance(v, Fraction):
            return Interval.from_fraction(v)
        if isinstance(v, int):
            f = float(v)
            if int(f) == v:
                return Interval(f, f)
            return Interval(_down(f), _up(f))
        return Interval(float(v), float(v))

    @staticmethod
    def from_fraction(q: Fraction) -> "Interval":
        f = float(q)
        if Fraction(f) == q:
            return Interval(f, f)
        return Interval(_down(f), _up(f))

    @staticmethod
    def hull(*items) -> "Interval":
        ivs = [Interval.of(i) for i in items]
        return Interval(min(i.lo for i in ivs), max(i.hi for i in ivs))

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        m = 0.5 * (self.lo + self.hi)
        return min(max(m, self.lo), self.hi)

    @property
    def mag(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    @property
    def mig(self) -> float:
        if self.lo <= 0.0 <= self.hi:
            return 0.0
        return min(abs(self.lo), abs(self.hi))

    def contains(self, v) -> bool:
        if isinstance(v, Interval):
            return self.lo <= v.lo and v.hi <= self.hi
        return self.lo <= v <= self.hi

    def __contains__(self, v) -> bool:
        return self.contains(v)

    def interior_contains(self, other: "Interval") -> bool:
        return self.lo < other.lo and other.hi < self.hi

    def intersects(self, other: "Interval") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def intersect(self, other: "Interval") -> "Interval":
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi:
            raise ValueError("disjoint intervals")
        return Interval(lo, hi)

    def split(self) -> tuple["Interval", "Interval"]:
        m = self.mid
        return Interval(self.lo, m), Interval(m, self.hi)

    def widen(self, slack: float) -> "Interval":
        return Interval(_down(self.lo - slack), _up(self.hi + slack))

    # arithmetic

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __pos__(self) -> "Interval":
        return self

    def __add__(self, other) -> "Interval":
        o = _coerce(other)
        if o is NotImplemented:
            return o
        # adding an exact zero is exact
        if o.lo == o.hi == 0.0:
            return self
        if self.lo == self.hi == 0.0:
            return o
        return Interval(_down(self.lo + o.lo), _up(self.hi + o.hi))

    __radd__ = __add__

    def __sub__(self, other) -> "Interval":
        o = _coerce(other)
        if o is NotImplemented:
            return o
        if o.lo == o.hi == 0.0:
            return self
        if self.lo == self.hi == 0.0:
            return -o
        return Interval(_down(self.lo - o.hi), _up(self.hi - o.lo))

    def __rsub__(self, other) -> "Interval":
        o = _coerce(other)
        if o is NotImplemented:
            return o
        return o - self

    def __mul__(self, other) -> "Interval":
        o = _coerce(other)
        if o is NotImplemented:
            return o
        if self.lo == self.hi == 0.0 or o.lo == o.hi == 0.0:
            return Interval(0.0, 0.0)
        ps = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        ps = [0.0 if math.isnan(p) else p for p in ps]
        return Interval(_down(min(ps)), _up(max(ps)))

    __rmul__ = __mul__

    def reciprocal(self) -> "Interval":
        if self.lo <= 0.0 <= self.hi:
            raise ZeroDivisionError(f"interval [{self.lo}, {self.hi}] contains zero")
        return Interval(_down(1.0 / self.hi), _up(1.0 / self.lo))

    def __truediv__(self, other) -> "Interval":
        o = _coerce(other)
        if o is NotImplemented:
            return o
        if o.lo <= 0.0 <= o.hi:
            raise ZeroDivisionError(f"interval [{o.lo}, {o.hi}] contains zero")
        if self.lo == self.hi == 0.0:
            return self
        qs = (self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi)
        return Interval(_down(min(qs)), _up(max(qs)))

    def __rtruediv__(self, other) -> "Interval":
        o = _coerce(other)
        if o is NotImplemented:
            return o
        return o / self

    def __pow__(self, n: int) -> "Interval":
        if not isinstance(n, int) or n < 0:
            raise ValueError("only nonnegative integer powers are supported")
        if n == 0:
            return Interval(1.0, 1.0)
        if n == 1 or self.lo == self.hi == 0.0:
            return self
        if n % 2 == 0:
            if self.lo >= 0.0:
                return Interval(max(0.0, _pow_lo(self.lo, n)), _pow_hi(self.hi, n))
            if self.hi <= 0.0:
                return Interval(max(0.0, _pow_lo(-self.hi, n)), _pow_hi(-self.lo, n))
            return Interval(0.0, _pow_hi(self.mag, n))
        lo = _pow_lo(self.lo, n) if self.lo >= 0 else -_pow_hi(-self.lo, n)
        hi = _pow_hi(self.hi, n) if self.hi >= 0 else -_pow_lo(-self.hi, n)
        return Interval(lo, hi)

    def exp(self) -> "Interval":
        # exp is increasing, so exp(709) stays a valid lower bound past the overflow point
        lo = math.exp(min(self.lo, 709.0))
        hi = math.exp(self.hi) if self.hi < 709.0 else _INF
        # libm exp is within one ulp; step out two to be safe
        return Interval(max(0.0, _down(_down(lo))), _up(_up(hi)))

    def log(self) -> "Interval":
        if self.lo <= 0.0:
            raise ValueError("log of an interval touching zero")
        return Interval(_down(_down(math.log(self.lo))), _up(_up(math.log(self.hi))))

    def sqrt(self) -> "Interval":
        if self.lo < 0.0:
            raise ValueError("sqrt of negative interval")
        return Interval(max(0.0, _down(math.sqrt(self.lo))), _up(math.sqrt(self.hi)))

    def abs(self) -> "Interval":
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return Interval(0.0, self.mag)

    def __repr__(self) -> str:
        return f"Interval({self.lo!r}, {self.hi!r})"


def _pow_hi(v: float, n: int) -> float:
    # v >= 0
    r = 1.0
    for _ in range(n):
        r = _up(r * v)
    return r


def _pow_lo(v: float, n: int) -> float:
    r = 1.0
    for _ in range(n):
        r = max(0.0, _down(r * v))
    return r


def _coerce(v):
    if isinstance(v, Interval):
        return v
    if isinstance(v, (int, float, Fraction)):
        return Interval.of(v)
    return NotImplemented


# ---------------------------------------------------------------- vectorized intervals


def _vdown(v):
    return np.nextafter(v, -np.inf)


def _vup(v):
    return np.nextafter(v, np.inf)


class IntervalArray:
    """A batch of intervals held as two float arrays, with the same outward rounding as Interval.

    Used to evaluate one expression on many pieces of a domain in a single pass.
    """

    __slots__ = ("lo", "hi")
    __array_ufunc__ = None

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)

    @staticmethod
    def points(v) -> "IntervalArray":
        v = np.asarray(v, dtype=float)
        return IntervalArray(v, v.copy())

    def __len__(self) -> int:
        return self.lo.shape[0]

    def __getitem__(self, k):
        if isinstance(k, (int, np.integer)):
            return Interval(float(self.lo[k]), float(self.hi[k]))
        return IntervalArray(self.lo[k], self.hi[k])

    @property
    def mid(self):
        return np.clip(0.5 * (self.lo + self.hi), self.lo, self.hi)

    @property
    def width(self):
        return self.hi - self.lo

    def contains_zero(self):
        return (self.lo <= 0.0) & (0.0 <= self.hi)

    def _other(self, o):
        if isinstance(o, IntervalArray):
            return o.lo, o.hi
        if isinstance(o, Interval):
            return o.lo, o.hi
        if isinstance(o, (int, float, Fraction)):
            iv = Interval.of(o)
            return iv.lo, iv.hi
        return None

    def __neg__(self):
        return IntervalArray(-self.hi, -self.lo)

    def _zero(self):
        return (self.lo == 0.0) & (self.hi == 0.0)

    def _keep_exact(self, lo, hi, b, sign: float):
        """Undo rounding where one operand of a sum or difference is an exact zero."""
        za = self._zero()
        zb = (b[0] == 0.0) & (b[1] == 0.0)
        blo, bhi = (b[0], b[1]) if sign > 0 else (-b[1], -b[0])
        lo = np.where(zb, self.lo, np.where(za, blo, lo))
        hi = np.where(zb, self.hi, np.where(za, bhi, hi))
        return IntervalArray(lo, hi)

    def __add__(self, o):
        b = self._other(o)
        if b is None:
            return NotImplemented
        return self._keep_exact(_vdown(self.lo + b[0]), _vup(self.hi + b[1]), b, 1.0)

    __radd__ = __add__

    def __sub__(self, o):
        b = self._other(o)
        if b is None:
            return NotImplemented
        return self._keep_exact(_vdown(self.lo - b[1]), _vup(self.hi - b[0]), b, -1.0)

    def __rsub__(self, o):
        b = self._other(o)
        if b is None:
            return NotImplemented
        return (-self)._keep_exact(_vdown(b[0] - self.hi), _vup(b[1] - self.lo), b, 1.0)

    def __mul__(self, o):
        b = self._other(o)
        if b is None:
            return NotImplemented
        with np.errstate(invalid="ignore", over="ignore"):
            ps = np.stack(np.broadcast_arrays(self.lo * b[0], self.lo * b[1], self.hi * b[0], self.hi * b[1]))
        ps = np.where(np.isnan(ps), 0.0, ps)
        lo, hi = _vdown(ps.min(axis=0)), _vup(ps.max(axis=0))
        zero = ((self.lo == 0.0) & (self.hi == 0.0)) | ((b[0] == 0.0) & (b[1] == 0.0))
        return IntervalArray(np.where(zero, 0.0, lo), np.where(zero, 0.0, hi))

    __rmul__ = __mul__

    def __truediv__(self, o):
        b = self._other(o)
        if b is None:
            return NotImplemented
        blo, bhi = np.broadcast_arrays(b[0], b[1])
        if np.any((blo <= 0.0) & (0.0 <= bhi)):
            raise ZeroDivisionError("divisor enclosure contains zero")
        qs = np.stack(np.broadcast_arrays(self.lo / b[0], self.lo / b[1], self.hi / b[0], self.hi / b[1]))
        za = self._zero()
        return IntervalArray(np.where(za, 0.0, _vdown(qs.min(axis=0))), np.where(za, 0.0, _vup(qs.max(axis=0))))

    def __rtruediv__(self, o):
        b = self._other(o)
        if b is None:
            return NotImplemented
        return IntervalArray(*np.broadcast_arrays(b[0], b[1])) / self

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only nonnegative integer powers are supported")
        if n == 0:
            return IntervalArray(np.ones_like(self.lo), np.ones_like(self.hi))
        if n == 1:
            return self

        def up(v):
            r = np.ones_like(v)
            for _ in range(n):
                r = _vup(r * v)
            return r

        def down(v):
            r = np.ones_like(v)
            for _ in range(n):
                r = np.maximum(0.0, _vdown(r * v))
            return r

        lo, hi = self.lo, self.hi
        if n % 2 == 0:
            mag = np.maximum(np.abs(lo), np.abs(hi))
            mig = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(np.abs(lo), np.abs(hi)))
            return IntervalArray(down(mig), up(mag))
        plo = np.where(lo >= 0, down(np.abs(lo)), -up(np.abs(lo)))
        phi = np.where(hi >= 0, up(np.abs(hi)), -down(np.abs(hi)))
        return IntervalArray(plo, phi)

    def exp(self):
        with np.errstate(over="ignore"):
            lo = np.exp(self.lo)
            hi = np.where(self.hi < 709.0, np.exp(np.minimum(self.hi, 709.0)), np.inf)
        return IntervalArray(np.maximum(0.0, _vdown(_vdown(lo))), _vup(_vup(hi)))

    def log(self):
        if np.any(self.lo <= 0.0):
            raise ValueError("log of an interval touching zero")
        return IntervalArray(_vdown(_vdown(np.log(self.lo))), _vup(_vup(np.log(self.hi))))

    def __repr__(self) -> str:
        return f"IntervalArray(n={self.lo.size})"
