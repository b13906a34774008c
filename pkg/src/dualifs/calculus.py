"""Higher derivatives of dual projections and the constants that bound them."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .errors import EtaTooLarge, OrderTooHigh
from .interval import Interval
from .words import Orientation, Word, check_letters, compose_eval

MAX_ORDER = 6


# ---------------------------------------------------------------- g_k polynomials


@lru_cache(maxsize=None)
def gk_terms(k: int) -> tuple[tuple[tuple[int, ...], int], ...]:
    """Expanded g_k as (exponents of y_1..y_k, coefficient) pairs."""
    if k < 1:
        raise ValueError("g_k is defined for k >= 1")
    if k == 1:
        return (((1,), 1),)
    prev = dict(gk_terms(k - 1))
    out: Counter = Counter()
    for exps, c in prev.items():
        e = list(exps) + [0]
        # sum over l of dg/dy_l * y_{l+1}
        for l in range(k - 1):
            if e[l]:
                n = e.copy()
                n[l] -= 1
                n[l + 1] += 1
                out[tuple(n)] += c * e[l]
        # g * y_1
        n = e.copy()
        n[0] += 1
        out[tuple(n)] += c
    return tuple(sorted((e, c) for e, c in out.items() if c))


def gk_eval(k: int, inputs: Sequence):
    """Evaluate g_k at inputs ordered (y_k, ..., y_1); g_0 is the constant 1."""
    if k == 0:
        return 1.0
    if len(inputs) != k:
        raise ValueError(f"g_{k} takes {k} inputs")
    y = list(inputs)[::-1]  # y[0] is y_1
    total = None
    for exps, c in gk_terms(k):
        t = c
        for v, e in zip(y, exps):
            if e:
                t = t * v**e
        total = t if total is None else total + t
    return total


# ---------------------------------------------------------------- set partitions


def set_partitions(k: int) -> Iterator[tuple[tuple[int, ...], ...]]:
    """All partitions of {1..k}, generated from restricted growth strings."""
    if k == 0:
        yield ()
        return

    def rec(i: int, labels: list[int], nblocks: int):
        if i == k:
            blocks: list[list[int]] = [[] for _ in range(nblocks)]
            for pos, lab in enumerate(labels):
                blocks[lab].append(pos + 1)
            yield tuple(tuple(b) for b in blocks)
            return
        for lab in range(nblocks + 1):
            labels.append(lab)
            yield from rec(i + 1, labels, max(nblocks, lab + 1))
            labels.pop()

    yield from rec(0, [], 0)


@lru_cache(maxsize=None)
def partition_shapes(k: int) -> tuple[tuple[tuple[int, ...], int], ...]:
    """Partitions of {1..k} grouped by their sorted block sizes, with multiplicities."""
    c = Counter(tuple(sorted(len(b) for b in p)) for p in set_partitions(k))
    return tuple(sorted(c.items()))


# ---------------------------------------------------------------- derivatives of H


def _phi_jet(fmap, y, order: int):
    """Derivatives 0..order of log|f'| at y."""
    j = fmap.jet(y, order + 1).derivative()
    if isinstance(y, Interval):
        if j.d[0].hi < 0:
            j = -j
    elif not isinstance(y, np.ndarray) and j.d[0] < 0:
        j = -j
    elif isinstance(y, np.ndarray):
        j = j * np.sign(j.d[0])
    return j.log()


def H_derivatives(ifs, word: Word, x, k: int, max_order: int = MAX_ORDER) -> list:
    """[H, H', ..., H^(k)] at x by the partition-sum formula, accumulated over prefixes."""
    if k > max_order:
        raise OrderTooHigh(f"order {k} exceeds the configured maximum {max_order}")
    if k < 0:
        raise ValueError("order must be nonnegative")
    check_letters(word, ifs.arity)
    is_iv = isinstance(x, Interval)
    zero = Interval(0.0, 0.0) if is_iv else 0.0 * x
    one = Interval(1.0, 1.0) if is_iv else 1.0 + 0.0 * x
    Hs = [zero] * (k + 1)  # derivatives of H along the current prefix
    y, slope = x, one
    shapes = [partition_shapes(j + 1) for j in range(k + 1)]
    for a in word:
        phi = _phi_jet(ifs[a], y, k + 1)
        # g_{m}(H^(m-1), ..., H) of the prefix, with g_0 = 1
        g = [one] + [gk_eval(m, Hs[:m][::-1]) for m in range(1, k + 1)]
        new = []
        for j in range(k + 1):
            term = zero
            for sizes, mult in shapes[j]:
                p = len(sizes)
                prod = phi.d[p] * slope**p
                for s in sizes:
                    prod = prod * g[s - 1]
                term = term + mult * prod
            new.append(Hs[j] + term)
        Hs = new
        j1 = ifs[a].jet(y, 1)
        slope = slope * j1.d[1]
        y = j1.d[0]
    return Hs


def H_derivative(ifs, word: Word, x, k: int, max_order: int = MAX_ORDER):
    return H_derivatives(ifs, word, x, k, max_order)[k]


def fandg_check(ifs, word: Word, x: float, k: int, max_order: int = MAX_ORDER) -> float:
    """|f_rev^(k)/f_rev' - g_{k-1}(H^(k-2), ..., H)| with the left side from a composed jet."""
    if k < 2:
        raise ValueError("k must be at least 2")
    cj = compose_eval(ifs, word, Orientation.REVERSED, x, k)
    lhs = cj.jet.d[k] / cj.jet.d[1]
    hs = H_derivatives(ifs, word, x, k - 2, max_order)
    rhs = gk_eval(k - 1, hs[::-1])
    return abs(lhs - rhs)


# ---------------------------------------------------------------- constants


@dataclass(frozen=True)
class BoundConstants:
    c_max: float
    c_min: float
    D: tuple[float, ...]  # D[k] for k = 0..max_k+1 (D[0] unused, set to 0)
    E: tuple[float, ...]  # E[0..max_k], E[0] = 1
    C: tuple[float, ...]  # C[0..max_k]

    def to_dict(self) -> dict:
        return {
            "c_max": self.c_max,
            "c_min": self.c_min,
            "D": list(self.D),
            "E": list(self.E),
            "C": list(self.C),
        }


def _iv(v) -> Interval:
    return Interval.of(v)


def constants_from(D: Sequence[float], c_max: float, max_k: int) -> tuple[list[float], list[float]]:
    """E_k and C_k from the recursion, rounded upward."""
    c = _iv(c_max)
    C: list[float] = []
    E: list[float] = [1.0]
    for k in range(max_k + 1):
        if k >= 1:
            # g_k has nonnegative coefficients, so its sup over the box sits at y_j = C_{j-1}
            ys = [_iv(C[j]) for j in range(k)][::-1]
            E.append(gk_eval(k, ys).hi)
        total = Interval(0.0, 0.0)
        for sizes, mult in partition_shapes(k + 1):
            p = len(sizes)
            num = _iv(D[p])
            for s in sizes:
                num = num * _iv(E[s - 1])
            total = total + mult * num / (1 - c**p)
        C.append(total.hi)
    return E, C


def bound_constants(ifs, max_k: int = 4) -> BoundConstants:
    if max_k > MAX_ORDER:
        raise OrderTooHigh(f"order {max_k} exceeds the configured maximum {MAX_ORDER}")
    D = [0.0] + [ifs.D(k) for k in range(1, max_k + 2)]
    E, C = constants_from(D, ifs.c_max.hi, max_k)
    return BoundConstants(ifs.c_max.hi, ifs.c_min.lo, tuple(D), tuple(E), tuple(C))


# ---------------------------------------------------------------- derivative gap


@dataclass(frozen=True)
class GapBound:
    eta: float
    Q: float
    bound: float
    observed: float
    observed_sup_diff: float

    @property
    def holds(self) -> bool:
        return self.observed <= self.bound


def derivative_gap_bound(f, g, eta: float, grid: int = 1001) -> GapBound:
    """(2+Q)sqrt(eta) bound on sup|f'-g'| when sup|f-g| <= eta, with the observed value."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if 2.0 * math.sqrt(eta) >= 1.0:
        raise EtaTooLarge(f"2*sqrt({eta}) >= 1")
    xs = np.linspace(0.0, 1.0, grid)
    diff = float(np.max(np.abs(f.vec(xs) - g.vec(xs))))
    if diff > eta:
        raise ValueError(f"sup|f-g| = {diff} exceeds eta = {eta}")
    from .enclosure import enclose_fn
    from .maps import UNIT

    Q = max(enclose_fn(m.range_fn(2), UNIT).abs_sup().hi for m in (f, g))
    bound = (2.0 + Q) * math.sqrt(eta)
    jf, jg = f.jet(xs, 1), g.jet(xs, 1)
    observed = float(np.max(np.abs(np.asarray(jf.d[1]) - np.asarray(jg.d[1]))))
    return GapBound(eta, Q, bound, observed, diff)
