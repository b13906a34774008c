"""Pressure, conformality dimension, entropy, Lyapunov exponents and dimension upper bounds."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidProbability, SingletonAttractor
from .maps import fixed_point
from .words import Orientation, compose_eval, enumerate_words

PROB_TOL = 1e-12
CHAOS_CHUNKS = 8


class ProbabilityVector(tuple):
    """Strictly positive weights summing to one (within 1e-12, then renormalized)."""

    def __new__(cls, values: Sequence[float]):
        vals = [float(v) for v in values]
        if not vals:
            raise InvalidProbability("empty probability vector")
        if any(not (v > 0.0) or not math.isfinite(v) for v in vals):
            raise InvalidProbability("probabilities must be strictly positive")
        total = math.fsum(vals)
        if abs(total - 1.0) > PROB_TOL:
            raise InvalidProbability(f"probabilities sum to {total!r}, not 1")
        return super().__new__(cls, [v / total for v in vals])

    @staticmethod
    def uniform(n: int) -> "ProbabilityVector":
        return ProbabilityVector([1.0 / n] * n)


def entropy(p: ProbabilityVector) -> float:
    return -math.fsum(q * math.log(q) for q in p)


# ---------------------------------------------------------------- pressure


class PressureFunction:
    """P_n(t) = (1/n) log sum_w (max over the grid of |f_w'|)^t for words of length n."""

    def __init__(self, ifs, depth: int, grid: int = 257):
        if depth < 1:
            raise ValueError("depth must be at least 1")
        self.ifs = ifs
        self.depth = depth
        self.grid = grid
        xs = np.linspace(0.0, 1.0, grid)
        logs = []
        for w in enumerate_words(ifs.arity, depth):
            d = np.abs(np.asarray(compose_eval(ifs, w, Orientation.FORWARD, xs, 1).jet.d[1]))
            logs.append(math.log(float(np.max(d))))
        self.log_sups = np.array(logs)

    def __call__(self, t: float) -> float:
        a = t * self.log_sups
        m = float(np.max(a))
        return (m + math.log(float(np.sum(np.exp(a - m))))) / self.depth


def pressure(ifs, t: float, depth: int, grid: int = 257) -> float:
    if t < 0:
        raise ValueError("t must be nonnegative")
    return PressureFunction(ifs, depth, grid)(t)


def _check_not_singleton(ifs):
    if ifs.arity < 2:
        raise SingletonAttractor("a single map has a one-point attractor")
    pts = [fixed_point(m) for m in ifs.maps]
    if max(pts) - min(pts) < 1e-12:
        raise SingletonAttractor("all maps share one fixed point")


def _root(P, tol: float) -> tuple[float, float]:
    lo, hi = 0.0, 1.0
    while P(hi) >= 0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            raise RuntimeError("pressure does not become negative")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if P(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo, hi


@dataclass(frozen=True)
class DimensionEstimate:
    value: float
    bracket: tuple[float, float]
    depth: int
    spread: float  # |s_n - s_{n-1}|, a heuristic systematic error

    def to_dict(self) -> dict:
        return {"value": self.value, "bracket": list(self.bracket), "depth": self.depth,
                "spread": self.spread}


def conformality_dimension(ifs, depth: int = 6, tol: float = 1e-10, grid: int = 257) -> DimensionEstimate:
    _check_not_singleton(ifs)
    lo, hi = _root(PressureFunction(ifs, depth, grid), tol)
    s = 0.5 * (lo + hi)
    spread = 0.0
    if depth > 1:
        plo, phi = _root(PressureFunction(ifs, depth - 1, grid), tol)
        spread = abs(s - 0.5 * (plo + phi))
    return DimensionEstimate(s, (lo, hi), depth, spread)


def pressure_csv(ifs, depth: int, ts: Sequence[float], grid: int = 257) -> str:
    P = PressureFunction(ifs, depth, grid)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "P"])
    for t in ts:
        w.writerow([f"{t:.17g}", f"{P(t):.17g}"])
    return buf.getvalue()


# ---------------------------------------------------------------- Lyapunov exponent


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    stderr: float
    samples: int
    seed: int


def chaos_game(ifs, p: ProbabilityVector, samples: int, horizon: int, rng) -> np.ndarray:
    """Points f_{i_n}∘...∘f_{i_1}(1/2) with i.i.d. letters of law p."""
    x = np.full(samples, 0.5)
    cum = np.cumsum(p)
    for _ in range(horizon):
        letters = np.searchsorted(cum, rng.random(samples), side="right")
        letters = np.minimum(letters, ifs.arity - 1)
        nxt = np.empty_like(x)
        for a in range(ifs.arity):
            sel = letters == a
            if sel.any():
                nxt[sel] = ifs.maps[a].vec(x[sel])
        x = nxt
    return x


def _neg_log_deriv(ifs, p, x):
    total = np.zeros_like(x)
    for q, m in zip(p, ifs.maps):
        d = np.asarray(m.jet(x, 1).d[1], dtype=float) * np.ones_like(x)
        total += q * -np.log(np.abs(d))
    return total


def lyapunov(ifs, p: ProbabilityVector, samples: int = 100_000, horizon: int = 50, seed: int = 0,
             threads: int = 1) -> LyapunovEstimate:
    """Chaos-game estimate of -sum_i p_i ∫ log|f_i'| dμ_p with its Monte-Carlo standard error."""
    if len(p) != ifs.arity:
        raise InvalidProbability("weight count differs from the number of maps")
    children = np.random.SeedSequence(seed).spawn(CHAOS_CHUNKS)
    sizes = [samples // CHAOS_CHUNKS + (1 if k < samples % CHAOS_CHUNKS else 0) for k in range(CHAOS_CHUNKS)]

    def run(k):
        rng = np.random.default_rng(children[k])
        x = chaos_game(ifs, p, sizes[k], horizon, rng)
        return _neg_log_deriv(ifs, p, x)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(CHAOS_CHUNKS)))
    else:
        parts = [run(k) for k in range(CHAOS_CHUNKS)]
    vals = np.concatenate(parts)
    mean = float(np.mean(vals))
    if np.all(vals == vals[0]):
        return LyapunovEstimate(float(vals[0]), 0.0, samples, seed)
    stderr = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    return LyapunovEstimate(mean, stderr, samples, seed)


# ---------------------------------------------------------------- report


@dataclass(frozen=True)
class DimensionReport:
    s_phi: DimensionEstimate
    entropy: float
    lyapunov: LyapunovEstimate
    weights: tuple[float, ...]
    attractor_bound: float
    measure_bound: float
    bounds_attained: bool
    certificate_verdict: str

    def to_dict(self) -> dict:
        return {
            "conformality_dimension": self.s_phi.to_dict(),
            "weights": list(self.weights),
            "entropy": self.entropy,
            "lyapunov": {"value": self.lyapunov.value, "stderr": self.lyapunov.stderr,
                         "samples": self.lyapunov.samples, "seed": self.lyapunov.seed},
            "attractor_dimension_upper_bound": self.attractor_bound,
            "measure_dimension_upper_bound": self.measure_bound,
            "bounds_attained": self.bounds_attained,
            "separation_certificate": self.certificate_verdict,
        }


def dimension_bounds(ifs, p: ProbabilityVector | None = None, depth: int = 6, samples: int = 100_000,
                     horizon: int = 50, seed: int = 0, threads: int = 1) -> DimensionReport:
    from .separation import CertVerdict, sesc_certify

    p = p or ProbabilityVector.uniform(ifs.arity)
    s = conformality_dimension(ifs, depth)
    h = entropy(p)
    chi = lyapunov(ifs, p, samples, horizon, seed, threads)
    verdict = sesc_certify(ifs).verdict if ifs.arity >= 2 else CertVerdict.REJECT_CRITERION
    return DimensionReport(
        s, h, chi, tuple(p), min(1.0, s.value), min(1.0, h / chi.value),
        verdict == CertVerdict.ACCEPT, verdict.value,
    )
