"""Adaptive branch-and-bound range enclosures.

A function is supplied as ``fn(X) -> (value, slope)`` where both are
intervals enclosing the function and its derivative over ``X``. Bounds on a
piece combine the natural extension with the mean-value form, and the piece
with the worst bound is bisected until the bound is within ``tol`` of a value
actually attained at a sample point.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ToleranceNotReached
from .interval import Interval, IntervalArray

DEFAULT_TOL = 1e-8
DEFAULT_MAX_DEPTH = 40
MAX_SPLITS = 20000

RangeFn = Callable[[Interval], tuple[Interval, Interval]]


@dataclass(frozen=True)
class Enclosure:
    """Certified range of a function on a domain.

    ``sup`` brackets the supremum: sup.lo is attained at a sample, sup.hi is a
    rigorous upper bound. ``inf`` does the same for the infimum.
    """

    domain: Interval
    sup: Interval
    inf: Interval
    converged: bool

    @property
    def range(self) -> Interval:
        return Interval(self.inf.lo, self.sup.hi)

    def abs_sup(self) -> Interval:
        # sup|g| = max(sup g, -inf g)
        return Interval(max(self.sup.lo, -self.inf.hi), max(self.sup.hi, -self.inf.lo))

    def abs_inf(self) -> Interval:
        if self.inf.lo > 0:
            return self.inf
        if self.sup.hi < 0:
            return Interval(-self.sup.hi, -self.sup.lo)
        # both sample values are attained, so either bounds inf|g| from above
        return Interval(0.0, min(abs(self.inf.hi), abs(self.sup.lo)))


def _piece_bound(fn: RangeFn, X: Interval) -> tuple[Interval, Interval]:
    v, dv = fn(X)
    m = X.mid
    vm, _ = fn(Interval.point(m))
    centered = vm + dv * (X - m)
    if v.intersects(centered):
        v = v.intersect(centered)
    return v, vm


def _search(fn: RangeFn, domain: Interval, tol: float, max_depth: int, upper: bool):
    sign = 1.0 if upper else -1.0

    def key(b: Interval) -> float:
        return -b.hi if upper else b.lo

    counter = 0
    b, vm = _piece_bound(fn, domain)
    best = vm.lo if upper else vm.hi
    for x in (domain.lo, domain.hi):
        pv, _ = fn(Interval.point(x))
        best = max(best, pv.lo) if upper else min(best, pv.hi)
    heap = [(key(b), counter, domain, 0)]
    splits = 0
    converged = True
    while True:
        k, _, piece, depth = heap[0]
        bound = -k if upper else k
        if sign * (bound - best) <= tol:
            break
        if depth >= max_depth or splits >= MAX_SPLITS:
            converged = False
            break
        heapq.heappop(heap)
        splits += 1
        for child in piece.split():
            cb, cvm = _piece_bound(fn, child)
            best = max(best, cvm.lo) if upper else min(best, cvm.hi)
            counter += 1
            heapq.heappush(heap, (key(cb), counter, child, depth + 1))
    bound = -heap[0][0] if upper else heap[0][0]
    if upper:
        return Interval(min(best, bound), bound), converged
    return Interval(bound, max(best, bound)), converged


def _bounds(v, n: int):
    if isinstance(v, IntervalArray):
        return np.broadcast_to(v.lo, (n,)), np.broadcast_to(v.hi, (n,))
    return np.full(n, v.lo), np.full(n, v.hi)


def _batch_bounds(fn, lo: np.ndarray, hi: np.ndarray):
    """Piece bounds (lo, hi) and midpoint value brackets for a batch of pieces, in one call."""
    n = lo.size
    mid = np.clip(0.5 * (lo + hi), lo, hi)
    X = IntervalArray(np.concatenate([lo, mid]), np.concatenate([hi, mid]))
    v, dv = fn(X)
    vlo, vhi = _bounds(v, 2 * n)
    dlo, dhi = _bounds(dv, 2 * n)
    plo, phi, mlo, mhi = vlo[:n], vhi[:n], vlo[n:], vhi[n:]
    # mean-value form vm + dv * (X - m), evaluated with outward rounding
    c = IntervalArray(mlo, mhi) + IntervalArray(dlo[:n], dhi[:n]) * IntervalArray(lo - mid, hi - mid)
    clo, chi = np.maximum(plo, c.lo), np.minimum(phi, c.hi)
    meet = clo <= chi
    return np.where(meet, clo, plo), np.where(meet, chi, phi), mlo, mhi


def _search_batch(fn, domain: Interval, tol: float, max_depth: int, upper: bool):
    sign = 1.0 if upper else -1.0
    lo = np.array([domain.lo])
    hi = np.array([domain.hi])
    depth = np.zeros(1, dtype=int)
    blo, bhi, mlo, mhi = _batch_bounds(fn, lo, hi)
    ends = fn(IntervalArray.points([domain.lo, domain.hi]))[0]
    elo, ehi = _bounds(ends, 2)
    # work with s*f so that the search is always for a supremum
    b = bhi if upper else -blo
    best = max(float(np.max(mlo if upper else -mhi)), float(np.max(elo if upper else -ehi)))
    settled = -np.inf
    splits = 0
    converged = True
    while True:
        active = b > best + tol
        if np.any(~active):
            settled = max(settled, float(np.max(b[~active])))
        if not np.any(active):
            bound = settled
            break
        lo, hi, depth, b_act = lo[active], hi[active], depth[active], b[active]
        if np.any(depth >= max_depth) or splits + lo.size > MAX_SPLITS:
            converged = False
            bound = max(settled, float(np.max(b_act)))
            break
        splits += lo.size
        mid = np.clip(0.5 * (lo + hi), lo, hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        depth = np.concatenate([depth, depth]) + 1
        blo, bhi, mlo, mhi = _batch_bounds(fn, lo, hi)
        b = bhi if upper else -blo
        best = max(best, float(np.max(mlo if upper else -mhi)))
    bound = max(bound, best)
    if upper:
        return Interval(min(best, bound), bound), converged
    return Interval(-bound, max(-best, -bound)), converged


def enclose_fn(
    fn: RangeFn,
    domain: Interval,
    tol: float = DEFAULT_TOL,
    max_depth: int = DEFAULT_MAX_DEPTH,
    batched: bool = True,
) -> Enclosure:
    """Range of fn over domain. Batched mode evaluates whole frontiers of pieces at once;
    ``fn`` must then accept an IntervalArray."""
    search = _search_batch if batched else _search
    sup, ok_hi = search(fn, domain, tol, max_depth, upper=True)
    inf, ok_lo = search(fn, domain, tol, max_depth, upper=False)
    return Enclosure(domain, sup, inf, ok_hi and ok_lo)


def enclose_strict(fn: RangeFn, domain: Interval, tol: float = DEFAULT_TOL,
                   max_depth: int = DEFAULT_MAX_DEPTH) -> Enclosure:
    enc = enclose_fn(fn, domain, tol, max_depth)
    if not enc.converged:
        raise ToleranceNotReached(
            f"enclosure on [{domain.lo}, {domain.hi}] did not reach tolerance {tol}", enc
        )
    return enc
