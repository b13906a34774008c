"""Dual projections H_w, lifted operators, cylinders and the depth-n disjointness check.

For a word w = (i_1, ..., i_n), write f_rev = f_{i_n} ∘ ... ∘ f_{i_1}. Then

    H_w(x) = sum_n (f''_{i_n}/f'_{i_n})(y_{n-1}) * (f_{i_{n-1}} ∘ ... ∘ f_{i_1})'(x)

with y_{n-1} the partial orbit of x, and the lifted operator along w sends a
function h to f_rev'(x) * h(f_rev(x)) + H_w(x).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .errors import EnvelopeNotFound
from .interval import Interval
from .words import Orientation, PeriodicWord, Word, check_letters, compose_eval, enumerate_words


@dataclass
class Orbit:
    """Values along the reversed composition of a word at x: f_rev(x), f_rev'(x), H_w(x)."""

    value: object
    slope: object
    H: object


def orbit(ifs, word: Word, x) -> Orbit:
    """Run the sum formula; x may be a float, numpy array or Interval."""
    check_letters(word, ifs.arity)
    y = x
    slope = 1.0 if not isinstance(x, Interval) else Interval(1.0, 1.0)
    total = 0.0 if not isinstance(x, Interval) else Interval(0.0, 0.0)
    for a in word:
        j = ifs[a].jet(y, 2)
        total = total + (j.d[2] / j.d[1]) * slope
        slope = slope * j.d[1]
        y = j.d[0]
    return Orbit(y, slope, total)


def tail_bound(ifs, depth: int) -> float:
    """Bound 2*C0*c_max^depth on the error of truncating an infinite word."""
    return 2.0 * ifs.C0 * ifs.c_max.hi**depth


def truncation_depth(ifs, tol: float) -> int:
    c = ifs.c_max.hi
    target = 1e-3 * tol
    if ifs.C0 == 0.0:
        return 1
    return max(1, math.ceil(math.log(target / (2.0 * ifs.C0)) / math.log(c)))


def H(ifs, word, x, tol: float = 1e-12):
    """Dual projection at x. Periodic words are truncated where the tail drops below tol/1000."""
    if isinstance(word, PeriodicWord):
        word = word.prefix(truncation_depth(ifs, tol))
    return orbit(ifs, word, x).H


def H_by_composition(ifs, word: Word, x):
    """f''/f' of the reversed composition, from a composed jet."""
    cj = compose_eval(ifs, word, Orientation.REVERSED, x, 2)
    return cj.jet.d[2] / cj.jet.d[1]


def H_identity_check(ifs, word: Word, x: float) -> float:
    return abs(H(ifs, word, x) - H_by_composition(ifs, word, x))


def apply_lift(ifs, letter: int, h: Callable[[float], float], x):
    f = ifs[letter]
    j = f.jet(x, 2)
    return j.d[1] * h(j.d[0]) + j.d[2] / j.d[1]


def lift_word(ifs, word: Word, h: Callable) -> Callable:
    """The function obtained by applying the lifted operators of ``word`` to h (last letter first)."""
    g = h
    for a in reversed(word.letters):
        g = (lambda inner, a: (lambda x: apply_lift(ifs, a, inner, x)))(g, a)
    return g


# ---------------------------------------------------------------- envelope


@dataclass(frozen=True)
class Envelope:
    k: float
    K: float
    verified: bool
    iterations: int

    @property
    def width(self) -> float:
        return self.K - self.k


def _lift_image(ifs, letter: int, k: float, K: float, pieces: int) -> bool:
    """Check f'(X)*[k,K] + (f''/f')(X) lies in (k,K) for every piece X of [0,1]."""
    band = Interval(k, K)
    edges = np.linspace(0.0, 1.0, pieces + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        X = Interval(float(lo), float(hi))
        j = ifs[letter].jet(X, 2)
        img = j.d[1] * band + j.d[2] / j.d[1]
        if not band.interior_contains(img):
            return False
    return True


def choose_envelope(ifs, max_iter: int = 20, pieces: int = 64) -> Envelope:
    """Symmetric band [-K, K] just above K = C0, the smallest radius the lifted maps can preserve."""
    C0 = ifs.C0
    margin = max(1e-6 * C0, 1e-9)
    for it in range(max_iter):
        K = C0 + margin
        if all(_lift_image(ifs, a, -K, K, pieces) for a in range(1, ifs.arity + 1)):
            return Envelope(-K, K, True, it)
        # enclosure overestimation ate the margin: widen it and refine the pieces
        margin *= 10.0
        pieces *= 2
    raise EnvelopeNotFound(f"no invariant band found after {max_iter} attempts")


def invariant_envelope(ifs, margin: float) -> Envelope:
    """Symmetric band [-K, K] with K = beta/(1-c_max) + margin.

    Invariance follows from c_max*K + beta < K, which is checked in interval arithmetic.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    R = Interval.of(ifs.beta.hi)
    c = Interval.of(ifs.c_max.hi)
    K = (R / (1 - c)).hi + margin
    ok = (c * K + R).hi < K
    return Envelope(-K, K, ok, 0)


# ---------------------------------------------------------------- cylinders


class Verdict(str, Enum):
    DISJOINT = "DISJOINT"
    OVERLAPPING = "OVERLAPPING"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class CylinderResult:
    a: Word
    b: Word
    verdict: Verdict
    witness_x: float | None
    gap: float
    enclosure_widths: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "pair": [str(self.a), str(self.b)],
            "verdict": self.verdict.value,
            "witness_x": self.witness_x,
            "gap": self.gap,
            "enclosure_widths": list(self.enclosure_widths),
        }


def band_at(ifs, word: Word, x, env: Envelope):
    """Endpoints (low, high) of conv(F_w k(x), F_w K(x))."""
    o = orbit(ifs, word, x)
    a = o.slope * env.k + o.H
    b = o.slope * env.K + o.H
    if isinstance(x, Interval):
        return Interval(min(a.lo, b.lo), min(a.hi, b.hi)), Interval(max(a.lo, b.lo), max(a.hi, b.hi))
    if isinstance(x, np.ndarray):
        return np.minimum(a, b), np.maximum(a, b)
    return min(a, b), max(a, b)


def _gap(la, ha, lb, hb):
    # positive distance between the two bands, negative overlap otherwise
    return np.maximum(lb - ha, la - hb)


def certified_gap(ifs, a: Word, b: Word, x: float, env: Envelope,
                  cache: dict | None = None) -> tuple[float, tuple[float, float]]:
    def bands(w):
        if cache is None:
            return band_at(ifs, w, Interval.point(float(x)), env)
        key = (w, float(x))
        if key not in cache:
            cache[key] = band_at(ifs, w, Interval.point(float(x)), env)
        return cache[key]

    la, ha = bands(a)
    lb, hb = bands(b)
    g = max((lb - ha).lo, (la - hb).lo)
    return g, ((ha - la).hi, (hb - lb).hi)


def _search_witness(gap_fn, grid: int = 64, rounds: int = 12) -> tuple[float, float]:
    xs = np.linspace(0.0, 1.0, grid)
    g = gap_fn(xs)
    i = int(np.argmax(g))
    best_x, best_g = float(xs[i]), float(g[i])
    h = 1.0 / (grid - 1)
    for _ in range(rounds):
        h /= 3.0
        cand = np.clip(best_x + h * np.arange(-3, 4), 0.0, 1.0)
        gc = gap_fn(cand)
        i = int(np.argmax(gc))
        if gc[i] > best_g:
            best_x, best_g = float(cand[i]), float(gc[i])
    return best_x, best_g


def _certify_overlap(ifs, a: Word, b: Word, env: Envelope, pieces: int = 64) -> bool:
    edges = np.linspace(0.0, 1.0, pieces + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        X = Interval(float(lo), float(hi))
        la, ha = band_at(ifs, a, X, env)
        lb, hb = band_at(ifs, b, X, env)
        # bands meet when max(lows) <= min(highs); need it for every x in X
        if not (max(la.hi, lb.hi) <= min(ha.lo, hb.lo)):
            return False
    return True


def cylinders_disjoint(ifs, a: Word, b: Word, env: Envelope, grid: int = 64,
                       rounds: int = 12) -> CylinderResult:
    if a == b:
        raise ValueError("cylinders_disjoint needs two different words")
    xs = np.linspace(0.0, 1.0, grid)
    la, ha = band_at(ifs, a, xs, env)
    lb, hb = band_at(ifs, b, xs, env)
    return _decide(ifs, a, b, env, xs, _gap(la, ha, lb, hb), rounds)


def _decide(ifs, a, b, env, xs, gaps, rounds, cache=None) -> CylinderResult:
    i = int(np.argmax(gaps))
    x0 = float(xs[i])
    if gaps[i] > 0:
        g, widths = certified_gap(ifs, a, b, x0, env, cache)
        if g > 0:
            return CylinderResult(a, b, Verdict.DISJOINT, x0, g, widths)

    def gap_fn(v):
        la, ha = band_at(ifs, a, v, env)
        lb, hb = band_at(ifs, b, v, env)
        return _gap(la, ha, lb, hb)

    x1, g1 = _search_witness(gap_fn, len(xs), rounds)
    g, widths = certified_gap(ifs, a, b, x1, env)
    if g > 0:
        return CylinderResult(a, b, Verdict.DISJOINT, x1, g, widths)
    if _certify_overlap(ifs, a, b, env):
        return CylinderResult(a, b, Verdict.OVERLAPPING, None, g1, widths)
    return CylinderResult(a, b, Verdict.INCONCLUSIVE, x1, g1, widths)


class SSCStatus(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class DualSSCReport:
    depth: int
    status: SSCStatus
    envelope: Envelope
    pairs_checked: int
    min_gap: float | None
    failures: tuple[CylinderResult, ...]
    results: tuple[CylinderResult, ...]

    def to_dict(self, include_pairs: bool = False) -> dict:
        d = {
            "depth": self.depth,
            "status": self.status.value,
            "envelope": [self.envelope.k, self.envelope.K],
            "pairs_checked": self.pairs_checked,
            "min_gap": self.min_gap,
            "failures": [r.to_dict() for r in self.failures],
        }
        if include_pairs:
            d["pairs"] = [r.to_dict() for r in self.results]
        return d


def _word_bands(ifs, words, xs, env):
    return {w: band_at(ifs, w, xs, env) for w in words}


def dual_ssc_check(ifs, depth: int, env: Envelope | None = None, grid: int = 64, rounds: int = 12,
                   threads: int = 1, max_failures: int = 50, extra_points=()) -> DualSSCReport:
    """Every pair of depth-n words with different first letters must have disjoint cylinders.

    ``extra_points`` are added to the search grid (useful when witnesses are known in advance).
    """
    env = env or choose_envelope(ifs)
    words = list(enumerate_words(ifs.arity, depth))
    if depth == 0:
        return DualSSCReport(0, SSCStatus.PASS, env, 0, None, (), ())
    xs = np.union1d(np.linspace(0.0, 1.0, grid), np.clip(np.asarray(extra_points, dtype=float), 0.0, 1.0))
    bands = _word_bands(ifs, words, xs, env)
    by_first: dict[int, list[Word]] = {}
    for w in words:
        by_first.setdefault(w.first, []).append(w)
    firsts = sorted(by_first)
    blocks = [(p, q) for p in firsts for q in firsts if p < q]

    def run_block(pq):
        p, q = pq
        cache: dict = {}
        out = []
        for a in by_first[p]:
            la, ha = bands[a]
            for b in by_first[q]:
                lb, hb = bands[b]
                out.append(_decide(ifs, a, b, env, xs, _gap(la, ha, lb, hb), rounds, cache))
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(run_block, blocks))
    else:
        chunks = [run_block(pq) for pq in blocks]
    results = tuple(r for chunk in chunks for r in chunk)
    bad = [r for r in results if r.verdict != Verdict.DISJOINT]
    if not bad:
        status = SSCStatus.PASS
    elif any(r.verdict == Verdict.OVERLAPPING for r in bad):
        status = SSCStatus.FAIL
    else:
        status = SSCStatus.INCONCLUSIVE
    gaps = [r.gap for r in results if r.verdict == Verdict.DISJOINT]
    return DualSSCReport(
        depth,
        status,
        env,
        len(results),
        min(gaps) if gaps and not bad else None,
        tuple(bad[:max_failures]),
        results,
    )
