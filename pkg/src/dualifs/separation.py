"""Separation diagnostics: the second-derivative-ratio certificate, depth scans and the C^2 distance."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass
from enum import Enum
from itertools import combinations

import numpy as np

from .enclosure import enclose_fn
from .errors import ArityMismatch, ToleranceNotReached
from .expr import Sub
from .interval import Interval
from .maps import UNIT, AnalyticMap
from .words import Orientation, enumerate_words, compose_value

# below this the ratio sup is treated as identically zero
BETA_ZERO = 1e-12


class CertVerdict(str, Enum):
    ACCEPT = "ACCEPT"
    REJECT_CRITERION = "REJECT_CRITERION"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class PairWitness:
    i: int
    j: int
    x: float
    alpha: float  # certified lower bound of |r_i(x) - r_j(x)| at x


@dataclass(frozen=True)
class SescCertificate:
    verdict: CertVerdict
    reasons: tuple[str, ...]
    alpha: float
    beta: Interval
    c_max: Interval
    c_min: Interval
    margin: float
    witnesses: tuple[PairWitness, ...]
    runtime: float

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "reasons": list(self.reasons),
            "alpha": self.alpha,
            "beta": [self.beta.lo, self.beta.hi],
            "c_max": [self.c_max.lo, self.c_max.hi],
            "c_min": [self.c_min.lo, self.c_min.hi],
            "margin": self.margin,
            "witnesses": [
                {"pair": [w.i, w.j], "x": w.x, "alpha": w.alpha} for w in self.witnesses
            ],
            "runtime_seconds": self.runtime,
        }


def _ratio_vec(fmap: AnalyticMap, xs: np.ndarray) -> np.ndarray:
    j = fmap.jet(xs, 2)
    return np.asarray(j.d[2] / j.d[1], dtype=float)


def _ratio_iv(fmap: AnalyticMap, x: float) -> Interval:
    j = fmap.jet(Interval.point(x), 2)
    return j.d[2] / j.d[1]


def _pair_witness(f: AnalyticMap, g: AnalyticMap, grid: int, rounds: int) -> tuple[float, float]:
    def score(xs):
        return np.abs(_ratio_vec(f, xs) - _ratio_vec(g, xs))

    xs = np.linspace(0.0, 1.0, grid)
    s = score(xs)
    i = int(np.argmax(s))
    best_x = float(xs[i])
    best = _certify_pair(f, g, best_x)
    h = 1.0 / (grid - 1)
    for _ in range(rounds):
        h /= 3.0
        cand = np.clip(best_x + h * np.arange(-3, 4), 0.0, 1.0)
        for x in cand[np.argsort(-score(cand), kind="stable")][:1]:
            c = _certify_pair(f, g, float(x))
            if c > best:
                best, best_x = c, float(x)
    return best_x, best


def _certify_pair(f, g, x: float) -> float:
    d = _ratio_iv(f, x) - _ratio_iv(g, x)
    return d.mig


def sesc_certify(ifs, grid: int = 65, rounds: int = 12) -> SescCertificate:
    """Check alpha > 2*beta*c_max/(1-c_max) with alpha certified pairwise at witness points."""
    t0 = time.perf_counter()
    if ifs.arity < 2:
        raise ValueError("the criterion needs at least two maps")
    reasons = []
    converged = True
    try:
        beta = ifs.beta
        c_max = ifs.c_max
        c_min = ifs.c_min
        for m in ifs.maps:
            converged &= m.deriv_enclosure.converged and m.ratio_enclosure.converged
    except ToleranceNotReached:
        return SescCertificate(CertVerdict.INCONCLUSIVE, ("tolerance_not_reached",), 0.0,
                               Interval(0.0, math.inf), Interval(0.0, 1.0), Interval(0.0, 1.0),
                               -math.inf, (), time.perf_counter() - t0)
    witnesses = []
    for i, j in combinations(range(1, ifs.arity + 1), 2):
        x, a = _pair_witness(ifs[i], ifs[j], grid, rounds)
        witnesses.append(PairWitness(i, j, x, a))
    alpha = min(w.alpha for w in witnesses)
    c = c_max.hi
    penalty = (2.0 * Interval.of(beta.hi) * c / (1.0 - Interval.of(c))).hi
    margin = (Interval.of(alpha) - penalty).lo
    if beta.hi <= BETA_ZERO:
        reasons.append("beta_zero")
    if alpha <= 0.0:
        reasons.append("alpha_zero")
    if margin > 0 and not reasons:
        verdict = CertVerdict.ACCEPT
    elif not converged and not reasons:
        verdict = CertVerdict.INCONCLUSIVE
        reasons.append("tolerance_not_reached")
    else:
        verdict = CertVerdict.REJECT_CRITERION
        if margin <= 0:
            reasons.append("margin_nonpositive")
    return SescCertificate(verdict, tuple(reasons), alpha, beta, c_max, c_min, margin,
                           tuple(witnesses), time.perf_counter() - t0)


# ---------------------------------------------------------------- scans


@dataclass(frozen=True)
class ScanRow:
    depth: int
    delta: float  # min over pairs of the grid sup, a lower bound for the true sup
    delta_upper: float  # with Lipschitz slack added
    pairs_scanned: int
    witness_i: str
    witness_j: str
    exact_overlap: bool

    @property
    def log_delta_over_n(self) -> float:
        if self.delta <= 0:
            return -math.inf
        return math.log(self.delta) / self.depth


@dataclass(frozen=True)
class SeparationSeries:
    rows: tuple[ScanRow, ...]
    grid: int

    @property
    def empirical_rate(self) -> float:
        """min_n delta_n^(1/n)."""
        vals = [r.delta ** (1.0 / r.depth) if r.delta > 0 else 0.0 for r in self.rows]
        return min(vals) if vals else math.nan

    @property
    def overlap_depth(self) -> int | None:
        return next((r.depth for r in self.rows if r.exact_overlap), None)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["depth", "delta", "log_delta_over_n", "pairs_scanned", "witness_i", "witness_j"])
        for r in self.rows:
            w.writerow([r.depth, f"{r.delta:.17g}", f"{r.log_delta_over_n:.17g}", r.pairs_scanned,
                        r.witness_i, r.witness_j])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "grid": self.grid,
            "empirical_rate": self.empirical_rate,
            "overlap_depth": self.overlap_depth,
            "rows": [
                {
                    "depth": r.depth,
                    "delta": r.delta,
                    "delta_upper": r.delta_upper,
                    "log_delta_over_n": r.log_delta_over_n,
                    "pairs_scanned": r.pairs_scanned,
                    "witness_i": r.witness_i,
                    "witness_j": r.witness_j,
                    "exact_overlap": r.exact_overlap,
                }
                for r in self.rows
            ],
        }


def overlap_threshold(n: int) -> float:
    return 1e-13 * (1 + n)


def separation_scan(ifs, max_depth: int, grid: int = 257) -> SeparationSeries:
    xs = np.linspace(0.0, 1.0, grid)
    h = xs[1] - xs[0]
    c = ifs.c_max.hi
    rows = []
    for n in range(1, max_depth + 1):
        words = list(enumerate_words(ifs.arity, n))
        F = np.stack([compose_value(ifs, w, Orientation.FORWARD, xs) for w in words])
        best, bi, bj = math.inf, 0, 1
        for i in range(len(words) - 1):
            rest = F[i + 1:]
            sup = np.max(np.abs(rest - F[i]), axis=1)
            k = int(np.argmin(sup))
            if sup[k] < best:
                best, bi, bj = float(sup[k]), i, i + 1 + k
        pairs = len(words) * (len(words) - 1) // 2
        # both compositions are c_max^n Lipschitz, so the difference moves at most 2c^n per unit
        slack = 2.0 * c**n * h / 2.0
        rows.append(ScanRow(n, best, best + slack, pairs, str(words[bi]), str(words[bj]),
                            best < overlap_threshold(n)))
    return SeparationSeries(tuple(rows), grid)


# ---------------------------------------------------------------- distance


@dataclass(frozen=True)
class D2Result:
    value: float  # certified upper bound
    grid_value: float  # grid maximum, a lower bound
    per_map: tuple[float, ...]


def _diff_map(f: AnalyticMap, g: AnalyticMap) -> AnalyticMap:
    return AnalyticMap(Sub(f.expr, g.expr), max(f.epsilon, g.epsilon))


D2_TOL = 1e-9
D2_DEPTH = 80


def d2_distance(phi, psi, grid: int = 2001) -> D2Result:
    """max_i sum_{k<=2} sup|f_i^(k) - g_i^(k)|, bounded above by branch and bound."""
    if phi.arity != psi.arity:
        raise ArityMismatch(f"{phi.arity} maps versus {psi.arity}")
    xs = np.linspace(0.0, 1.0, grid)
    per_map, grid_vals = [], []
    for f, g in zip(phi.maps, psi.maps):
        if f.expr == g.expr:
            per_map.append(0.0)
            grid_vals.append(0.0)
            continue
        jf, jg = f.jet(xs, 2), g.jet(xs, 2)
        dm = _diff_map(f, g)
        total = total_grid = 0.0
        for k in range(3):
            s = float(np.max(np.abs(np.asarray(jf.d[k] - jg.d[k], dtype=float))))
            enc = enclose_fn(dm.range_fn(k), UNIT, D2_TOL, D2_DEPTH).abs_sup()
            total += max(float(enc.hi), s)
            total_grid += max(s, float(enc.lo))
        per_map.append(total)
        grid_vals.append(total_grid)
    return D2Result(max(per_map), max(grid_vals), tuple(per_map))


# ---------------------------------------------------------------- stability constant


@dataclass(frozen=True)
class StabilityConstant:
    C: float
    per_term: float
    C_prime: float


def stability_constant(ifs) -> StabilityConstant:
    """C' with |H_w - H~_w| <= C' d2 for nearby systems.

    C bounds |f''|, |f''/f'| and |(f''/f')'| on [0,1]; each term of the sum
    formula moves by at most T*c_max^(n-1)*d2, so C' = T/(1-c_max).
    """
    C = 0.0
    for m in ifs.maps:
        C = max(C,
                enclose_fn(m.range_fn(2), UNIT, 1e-10).abs_sup().hi,
                m.ratio_enclosure.abs_sup().hi,
                enclose_fn(m.log_deriv_fn(2), UNIT, 1e-10).abs_sup().hi)
    C = C * (1 + 1e-9) + 1e-12  # strict inequalities
    cmax = Interval.of(ifs.c_max.hi)
    cmin = Interval.of(ifs.c_min.lo)
    Ci = Interval.of(C)
    T = (Ci * (Ci + 1) + Ci) / (1 - cmax) + (cmax + Ci) / (cmin * cmin)
    Cp = T / (1 - cmax)
    return StabilityConstant(C, T.hi, Cp.hi)
