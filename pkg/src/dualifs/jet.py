"""Truncated derivative jets.

A jet of order K at a point x stores the derivative values
``d[k] = f^(k)(x)`` for k = 0..K. Coefficients may be floats or
``Interval`` objects; the arithmetic only needs + - * / on them.
"""

from __future__ import annotations

import math
from math import comb, factorial
from typing import Sequence

import numpy as np

from .interval import Interval, IntervalArray


def _scalar_exp(c):
    if isinstance(c, (Interval, IntervalArray)):
        return c.exp()
    if isinstance(c, np.ndarray):
        return np.exp(c)
    return math.exp(c)


def _scalar_log(c):
    if isinstance(c, (Interval, IntervalArray)):
        return c.log()
    if isinstance(c, np.ndarray):
        return np.log(c)
    return math.log(c)


def _zero_like(c):
    if isinstance(c, (Interval, IntervalArray)):
        return Interval(0.0, 0.0)
    return c * 0


def _one_like(c):
    if isinstance(c, (Interval, IntervalArray)):
        return Interval(1.0, 1.0)
    return c * 0 + 1


class Jet:
    __slots__ = ("d",)
    __array_ufunc__ = None  # make numpy defer to our reflected operators

    def __init__(self, d: Sequence):
        self.d = tuple(d)

    @property
    def order(self) -> int:
        return len(self.d) - 1

    @property
    def value(self):
        return self.d[0]

    def __getitem__(self, k):
        return self.d[k]

    def __len__(self):
        return len(self.d)

    def __iter__(self):
        return iter(self.d)

    def __repr__(self):
        return f"Jet({list(self.d)!r})"

    @staticmethod
    def constant(c, order: int) -> "Jet":
        return Jet((c,) + (_zero_like(c),) * order)

    @staticmethod
    def variable(x, order: int) -> "Jet":
        if order == 0:
            return Jet((x,))
        return Jet((x, _one_like(x)) + (_zero_like(x),) * (order - 1))

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.order != self.order:
                raise ValueError("jet orders differ")
            return other
        return Jet.constant(other, self.order)

    def __add__(self, other):
        o = self._lift(other)
        return Jet(a + b for a, b in zip(self.d, o.d))

    __radd__ = __add__

    def __neg__(self):
        return Jet(-a for a in self.d)

    def __sub__(self, other):
        o = self._lift(other)
        return Jet(a - b for a, b in zip(self.d, o.d))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(a * other for a in self.d)
        o = self._lift(other)
        f, g = self.d, o.d
        out = []
        for k in range(len(f)):
            s = f[0] * g[k]
            for j in range(1, k + 1):
                s = s + comb(k, j) * f[j] * g[k - j]
            out.append(s)
        return Jet(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(a / other for a in self.d)
        o = self._lift(other)
        f, g = self.d, o.d
        q = []
        for k in range(len(f)):
            s = f[k]
            for j in range(1, k + 1):
                s = s - comb(k, j) * g[j] * q[k - j]
            q.append(s / g[0])
        return Jet(q)

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only nonnegative integer powers are supported")
        result = Jet.constant(_one_like(self.d[0]), self.order)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def exp(self) -> "Jet":
        f = self.d
        h = [_scalar_exp(f[0])]
        # h' = f' h, differentiated k-1 times
        for k in range(1, len(f)):
            s = f[1] * h[k - 1]
            for j in range(1, k):
                s = s + comb(k - 1, j) * f[j + 1] * h[k - 1 - j]
            h.append(s)
        return Jet(h)

    def log(self) -> "Jet":
        f = self.d
        if self.order == 0:
            return Jet((_scalar_log(f[0]),))
        tail = Jet(f[1:]) / Jet(f[:-1])  # derivative jet of log f, one order lower
        return Jet((_scalar_log(f[0]),) + tail.d)

    def derivative(self) -> "Jet":
        """Jet of f' of one order less."""
        return Jet(self.d[1:])

    def taylor(self) -> list:
        return [c / factorial(k) for k, c in enumerate(self.d)]

    @staticmethod
    def from_taylor(coeffs: Sequence) -> "Jet":
        return Jet(c * factorial(k) for k, c in enumerate(coeffs))

    def compose(self, inner: "Jet") -> "Jet":
        """Jet of outer∘inner, where ``self`` is the outer jet taken at inner.value."""
        K = min(self.order, inner.order)
        a = self.taylor()[: K + 1]
        b = inner.taylor()[: K + 1]
        zero = _zero_like(b[0])
        b = [zero] + list(b[1:])
        out = [zero] * (K + 1)
        power = [zero] * (K + 1)
        power[0] = _one_like(b[1] if K else zero)
        out[0] = a[0]
        for m in range(1, K + 1):
            nxt = [zero] * (K + 1)
            for i in range(K + 1):
                if i == 0:
                    continue
                s = zero
                for j in range(1, i + 1):
                    s = s + b[j] * power[i - j]
                nxt[i] = s
            power = nxt
            for i in range(K + 1):
                out[i] = out[i] + a[m] * power[i]
        return Jet.from_taylor(out)


def identity_jet(x, order: int) -> Jet:
    return Jet.variable(x, order)


def invert_jet(outer: Jet, z) -> Jet:
    """Jet of the local inverse h = g^{-1} at y = g(z), given the jet of g at z.

    Solved order by order: the k-th derivative of g∘h vanishes for k >= 2 and
    depends on h^(k) only through g'(z) h^(k).
    """
    K = outer.order
    g1 = outer.d[1]
    zero = _zero_like(outer.d[0])
    h = [z, 1.0 / g1] + [zero] * (K - 1)
    for k in range(2, K + 1):
        comp = outer.compose(Jet(h[: k + 1]))
        h[k] = -comp.d[k] / g1
    return Jet(h)
