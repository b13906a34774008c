"""Orbit-avoiding point selection and analytic bump perturbations that separate dual cylinders."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.stats import qmc

from .dual import (
    CylinderResult,
    Envelope,
    SSCStatus,
    Verdict,
    band_at,
    certified_gap,
    cylinders_disjoint,
    dual_ssc_check,
    invariant_envelope,
    orbit,
)
from .errors import ConstraintInfeasible, EnvelopeNotFound, InvalidMap, SelectionExhausted, ToleranceNotReached
from .expr import X, const, exp
from .maps import IFS, AnalyticMap, ValidationReport, validate_map
from .separation import d2_distance, separation_scan
from .words import Word, enumerate_words

DEFAULT_MIN_GAP = 1e-3
MAX_TRIALS = 20000
MAX_HALVINGS = 60
ETA_FLOOR = 1e-300
KICK_FACTOR = 1.0 - 1e-6


# ---------------------------------------------------------------- bad pairs


@dataclass(frozen=True)
class BadPairSet:
    depth: int
    envelope: Envelope
    results: tuple[CylinderResult, ...]

    @property
    def bad(self) -> tuple[CylinderResult, ...]:
        return tuple(r for r in self.results if r.verdict != Verdict.DISJOINT)

    @staticmethod
    def expected_count(N: int, n: int) -> int:
        return comb(N, 2) * N ** (2 * (n - 1))

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "envelope": [self.envelope.k, self.envelope.K],
            "pairs": len(self.results),
            "bad": [r.to_dict() for r in self.bad],
        }


def find_bad_pairs(ifs, depth: int, env: Envelope, grid: int = 64, rounds: int = 12) -> BadPairSet:
    """Classify every (i, j) of length ``depth`` with i_1 < j_1; bad means not certified disjoint."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    words = list(enumerate_words(ifs.arity, depth))
    results = tuple(
        cylinders_disjoint(ifs, a, b, env, grid, rounds)
        for a in words for b in words if a.first < b.first
    )
    return BadPairSet(depth, env, results)


# ---------------------------------------------------------------- point selection


def orbit_points(ifs, word: Word, x: float) -> list[float]:
    """x, f_{i1}(x), f_{i2}(f_{i1}(x)), ..., one point per prefix."""
    pts = [x]
    for a in word:
        x = ifs[a](x)
        pts.append(x)
    return pts


@dataclass(frozen=True)
class PairPoint:
    a: Word
    b: Word
    x: float
    bad: bool
    kicked: int | None  # generator whose Y set receives x
    orbit_a: tuple[float, ...]
    orbit_b: tuple[float, ...]
    trials: int

    def to_dict(self) -> dict:
        return {"pair": [str(self.a), str(self.b)], "x": self.x, "bad": self.bad,
                "kicked": self.kicked, "trials": self.trials}


@dataclass(frozen=True)
class PointAssignment:
    points: tuple[PairPoint, ...]
    Y: dict[int, tuple[float, ...]]
    Z: dict[int, tuple[float, ...]]
    min_gap: float  # required separation
    observed_gap: float  # smallest distance between distinct orbit points

    def to_dict(self) -> dict:
        return {
            "min_gap": self.min_gap,
            "observed_gap": self.observed_gap,
            "points": [p.to_dict() for p in self.points],
            "Y": {str(k): list(v) for k, v in self.Y.items()},
            "Z": {str(k): list(v) for k, v in self.Z.items()},
        }


def _first_endpoint(ifs, word: Word, x: float, k: float) -> float:
    o = orbit(ifs, word, x)
    return o.slope * k + o.H


def _candidates(seed: int, centre: float | None, total: int):
    stream = qmc.Halton(d=1, seed=seed).random(total)[:, 0]
    if centre is not None:
        yield centre
        # first half: jitter around a known witness, shrinking; then the global stream
        for t, u in enumerate(stream[: total // 2]):
            r = 0.1 * 0.5 ** (8 * t / total)
            yield centre + (u - 0.5) * r
        stream = stream[total // 2:]
    for u in stream:
        yield float(u)


def _far_from(pts: np.ndarray, used: np.ndarray, gap: float) -> bool:
    if len(pts) > 1:
        d = np.abs(pts[:, None] - pts[None, :])
        np.fill_diagonal(d, np.inf)
        if d.min() < gap:
            return False
    if used.size and np.min(np.abs(pts[:, None] - used[None, :])) < gap:
        return False
    return True


def select_points(ifs, bad: BadPairSet, min_gap: float = DEFAULT_MIN_GAP, seed: int = 0,
                  max_trials: int = MAX_TRIALS) -> PointAssignment:
    env = bad.envelope
    used = np.empty(0)
    chosen = []
    for r in bad.results:
        is_bad = r.verdict != Verdict.DISJOINT
        centre = None if is_bad else r.witness_x
        trials = 0
        found = None
        last = None
        for x in _candidates(seed + len(chosen), centre, max_trials):
            trials += 1
            if not (min_gap <= x <= 1.0 - min_gap):
                continue
            oa = orbit_points(ifs, r.a, x)
            ob = orbit_points(ifs, r.b, x)
            pts = np.array(oa + ob[1:])
            last = (x, pts)
            if not _far_from(pts, used, min_gap):
                continue
            if min(abs(ifs[r.a.first](x)), abs(ifs[r.b.first](x))) < min_gap:
                continue
            if not is_bad and certified_gap(ifs, r.a, r.b, x, env)[0] <= 0:
                continue
            found = (x, oa, ob, pts)
            break
        if found is None:
            where = f"last candidate {last[0]:.17g}" if last else "no candidate in range"
            raise SelectionExhausted(f"no admissible point for ({r.a}), ({r.b}) after {trials} trials; {where}")
        x, oa, ob, pts = found
        kicked = None
        if is_bad:
            lo, hi = band_at(ifs, r.b, x, env)
            # first containment case wins when both hold
            kicked = r.a.first if lo <= _first_endpoint(ifs, r.a, x, env.k) <= hi else r.b.first
        chosen.append(PairPoint(r.a, r.b, x, is_bad, kicked, tuple(oa), tuple(ob), trials))
        used = np.concatenate([used, pts])

    Y: dict[int, list[float]] = {a: [] for a in range(1, ifs.arity + 1)}
    Z: dict[int, list[float]] = {a: [] for a in range(1, ifs.arity + 1)}
    for p in chosen:
        if p.kicked is not None:
            Y[p.kicked].append(p.x)
        for w, orb in ((p.a, p.orbit_a), (p.b, p.orbit_b)):
            # map w[m] is evaluated at orb[m]; the last point only feeds h
            for m, letter in enumerate(w):
                y = orb[m]
                if m == 0 and letter == p.kicked:
                    continue
                Z[letter].append(y)
    Yt = {a: tuple(sorted(set(v))) for a, v in Y.items()}
    Zt = {a: tuple(sorted(set(v))) for a, v in Z.items()}
    allpts = np.unique(used)
    observed = float(np.min(np.diff(allpts))) if allpts.size > 1 else math.inf
    return PointAssignment(tuple(chosen), Yt, Zt, min_gap, observed)


# ---------------------------------------------------------------- bump


@dataclass(frozen=True)
class EtaDiagnostics:
    """log10 of each width bound for one Y point; the smallest active bound is marked."""

    log10_C1: float
    log10_C2: float
    log10_C3: float
    log10_C4: float
    log10_separation: float
    log10_tail: float
    log10_product: float

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class BumpResult:
    g: AnalyticMap
    Y: tuple[float, ...]
    Z: tuple[float, ...]
    a: tuple[float, ...]
    eta: tuple[float, ...]
    halvings: int
    diagnostics: tuple[EtaDiagnostics, ...]
    norm_bounds_met: bool
    product_factor: float
    kicks: tuple[float, ...]
    interpolation_residual: float
    sup_diff: tuple[float, float]  # certified sup|g-f|, sup|g'-f'|
    C: float  # constant in sup|g''-f''| < C*delta + eps
    report: ValidationReport | None = None

    def to_dict(self) -> dict:
        return {
            "source": self.g.source,
            "Y": list(self.Y),
            "Z_count": len(self.Z),
            "a": list(self.a),
            "eta": list(self.eta),
            "halvings": self.halvings,
            "norm_width_bounds_met": self.norm_bounds_met,
            "width_bounds_log10": [d.to_dict() for d in self.diagnostics],
            "product_factor": self.product_factor,
            "kicks": list(self.kicks),
            "interpolation_residual": self.interpolation_residual,
            "sup_diff": list(self.sup_diff),
            "C": self.C,
        }


def _log_amplitude(fy: float, dfy: float, y: float, Y, Z, delta: float) -> float:
    s = math.log(delta) + math.log(abs(dfy)) - math.log(2.0) - math.log(abs(fy))
    s -= 2.0 * sum(math.log(abs(y - v)) for v in Y if v != y)
    s -= 4.0 * sum(math.log(abs(y - z)) for z in Z)
    return s


def _product_factor(t: float, y: float, Y, Z) -> float:
    s = 2.0 * sum(math.log1p(t / abs(y - v)) for v in Y if v != y)
    s += 4.0 * sum(math.log1p(t / abs(y - z)) for z in Z)
    return math.exp(s)


def _width_bounds(i: int, Y, Z, log_a: float, eps: float) -> EtaDiagnostics:
    M, Q = len(Y), len(Z)
    L10 = math.log(10.0)
    la = log_a
    q = max(16 * Q * Q + 12 * Q, 1)  # with no Z points psi is 1 and its norms are bounded by 1
    Qe = max(Q, 1)
    c1 = math.log(2 * math.e) + 2 * (math.log(eps) - math.log(2 * M * M * q) - la)
    c2 = 2 * (math.log(eps) + 1.5 - math.log(8 * M * Qe * 1.5**1.5) - la)
    c3 = 2 * (math.log(eps * math.sqrt(2 * math.e)) - math.log(4 * M**3) - la)
    c4 = math.log(eps * math.e) - math.log(2 * M * M) - la
    y = Y[i]
    nb = [abs(y - Y[j]) for j in (i - 1, i + 1) if 0 <= j < M]
    sep = 3 * math.log(0.5 * min(nb) * (1 - 1e-9)) if nb else 0.0
    # sum of 2 a_j exp(-eta_j^{-1/3}) < eps, split evenly between the M terms
    lg = la + math.log(4 * M / eps)
    tail = -3 * math.log(lg) if lg > 0 else 0.0
    inv = 2.0 * sum(1.0 / abs(y - v) for v in Y if v != y) + 4.0 * sum(1.0 / abs(y - z) for z in Z)
    prod = 3 * math.log(math.log(2.0) / inv) if inv > 0 else 0.0
    return EtaDiagnostics(*(v / L10 for v in (c1, c2, c3, c4, sep, tail, prod)))


def _bump_expr(f: AnalyticMap, Y, Z, a, eta):
    # phi*psi = (prod (x - y))^2 * (prod (x - z))^4, one power per product
    py = None
    for y in Y:
        t = X - const(y)
        py = t if py is None else py * t
    expo = py**2
    if Z:
        pz = None
        for z in Z:
            t = X - const(z)
            pz = t if pz is None else pz * t
        expo = expo * pz**4
    A = None
    for y, ai, ei in zip(Y, a, eta):
        term = const(ai) * exp(-((X - const(y)) ** 2) / const(ei))
        A = term if A is None else A + term
    return f.expr * exp(expo * A)


def _sup_abs(fmap: AnalyticMap, k: int) -> float:
    from .enclosure import enclose_fn
    from .maps import UNIT

    return float(enclose_fn(fmap.range_fn(k), UNIT, 1e-9, 80).abs_sup().hi)


def _interp_residual(f, g, Y, Z) -> float:
    worst = 0.0
    for pts, order in ((Z, 2), (Y, 1)):
        if not pts:
            continue
        xs = np.array(pts)
        jf, jg = f.jet(xs, order), g.jet(xs, order)
        for k in range(order + 1):
            worst = max(worst, float(np.max(np.abs(np.asarray(jg.d[k] - jf.d[k], dtype=float)))))
    return worst


def _kicks(f, g, Y) -> tuple[float, ...]:
    xs = np.array(Y)
    jf, jg = f.jet(xs, 2), g.jet(xs, 2)
    return tuple(float(v) for v in np.abs(jg.d[2] / jg.d[1] - jf.d[2] / jf.d[1]))


def build_bump(f: AnalyticMap, Y, Z, delta: float, eps: float | None = None) -> BumpResult:
    """g = f * exp(phi * psi * A) with g = f to second order on Z, to first order on Y, and a kick on Y."""
    eps = delta if eps is None else eps
    Y = tuple(sorted(float(y) for y in Y))
    Z = tuple(sorted(float(z) for z in Z))
    if set(Y) & set(Z):
        raise ValueError("Y and Z must be disjoint")
    if any(not 0.0 <= v <= 1.0 for v in Y + Z):
        raise ValueError("points must lie in [0,1]")
    if not Y:
        return BumpResult(f, Y, Z, (), (), 0, (), True, 1.0, (), 0.0, (0.0, 0.0), 0.0)
    jets = f.jet(np.array(Y), 1)
    fy, dfy = np.atleast_1d(jets.d[0]), np.atleast_1d(jets.d[1])
    if np.any(fy == 0.0):
        raise ConstraintInfeasible("f vanishes at a Y point, so the amplitude is undefined")
    log_a = [_log_amplitude(float(fy[i]), float(dfy[i]), y, Y, Z, delta) for i, y in enumerate(Y)]
    if max(log_a) > math.log(1e300):
        raise ConstraintInfeasible("bump amplitude overflows; the points are too crowded")
    a = [math.exp(v) for v in log_a]
    diags = tuple(_width_bounds(i, Y, Z, log_a[i], eps) for i in range(len(Y)))
    eta = []
    for d in diags:
        e = 10.0 ** min(d.log10_separation, d.log10_tail, d.log10_product, -2.0)
        eta.append(e)
    halvings = 0
    while True:
        if min(eta) < ETA_FLOOR:
            raise ConstraintInfeasible(f"bump width fell below {ETA_FLOOR:g}")
        g = AnalyticMap(_bump_expr(f, Y, Z, a, eta), f.epsilon)
        factor = max(_product_factor(e ** (1 / 3), y, Y, Z) for e, y in zip(eta, Y))
        report = validate_map(g) if factor <= 2.0 else None
        ok = report is not None and report.passed
        sup0 = sup1 = math.inf
        if ok:
            diff = AnalyticMap(g.expr - f.expr, f.epsilon)
            sup0, sup1 = _sup_abs(diff, 0), _sup_abs(diff, 1)
            ok = sup0 < eps and sup1 < eps
        if ok:
            break
        halvings += 1
        if halvings > MAX_HALVINGS:
            raise ConstraintInfeasible(f"no admissible bump width after {MAX_HALVINGS} halvings")
        eta = [e / 2.0 for e in eta]
    met = all(
        math.log10(e) <= min(d.log10_C1, d.log10_C2, d.log10_C3, d.log10_C4)
        for e, d in zip(eta, diags)
    )
    norm_f = max(abs(v) for v in f.vec(np.linspace(0.0, 1.0, 1001)))
    C = 2.0 * math.exp(eps) * norm_f * max(abs(float(dfy[i] / fy[i])) for i in range(len(Y)))
    return BumpResult(g, Y, Z, tuple(a), tuple(eta), halvings, diags, met, factor, _kicks(f, g, Y),
                      _interp_residual(f, g, Y, Z), (sup0, sup1), C, report)


# ---------------------------------------------------------------- pipeline


@dataclass(frozen=True)
class PerturbationReport:
    depth: int
    delta: float
    eps: float
    envelope: Envelope
    pairs: int
    bad_pairs: int
    assignment: PointAssignment | None
    bumps: tuple[BumpResult, ...]
    perturbed: IFS
    interpolation_residual: float
    min_kick_ratio: float | None
    validated: bool
    repaired_gaps: tuple[float, ...]
    preserved_gaps: tuple[float, ...]
    d2: float
    C: float
    final_status: str
    final_envelope: Envelope | None
    runtime: float
    notes: tuple[str, ...] = field(default=())

    @property
    def d2_bound(self) -> float:
        return self.C * self.delta + self.eps

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "delta": self.delta,
            "eps": self.eps,
            "envelope": [self.envelope.k, self.envelope.K],
            "pairs": self.pairs,
            "bad_pairs": self.bad_pairs,
            "assignment": self.assignment.to_dict() if self.assignment else None,
            "bumps": [b.to_dict() for b in self.bumps],
            "perturbed_maps": self.perturbed.sources,
            "interpolation_residual": self.interpolation_residual,
            "min_kick_ratio": self.min_kick_ratio,
            "validated": self.validated,
            "repaired_gaps": list(self.repaired_gaps),
            "preserved_gaps": list(self.preserved_gaps),
            "d2": self.d2,
            "C": self.C,
            "d2_bound": self.d2_bound,
            "final_status": self.final_status,
            "final_envelope": [self.final_envelope.k, self.final_envelope.K] if self.final_envelope else None,
            "runtime_seconds": self.runtime,
            "notes": list(self.notes),
        }


def _choose_depth(c: float, base: float, delta: float, depth: int | None) -> tuple[int, float]:
    """Depth n and envelope margin with c^n (K - k) < delta/3, K = base + margin."""
    if depth is not None:
        margin = delta / (6.0 * c**depth * 1.01) - base
        if margin <= 0:
            raise ConstraintInfeasible(f"depth {depth} is too small for delta {delta:g}")
        return depth, margin
    margin = delta
    n = 1
    while 2.0 * (base + margin) * c**n * 1.01 >= delta / 3.0:
        n += 1
    return n, margin


def perturb_to_dual_ssc(ifs, depth: int | None = None, delta: float = 1e-3, eps: float | None = None,
                        min_gap: float = DEFAULT_MIN_GAP, seed: int = 0, threads: int = 1) -> PerturbationReport:
    t0 = time.perf_counter()
    eps = delta if eps is None else eps
    c = ifs.c_max.hi
    base = ifs.beta.hi / (1.0 - c)
    n, margin = _choose_depth(c, base, delta, depth)
    env = invariant_envelope(ifs, margin)
    scan = separation_scan(ifs, n, grid=129)
    if scan.overlap_depth is not None:
        raise ConstraintInfeasible(f"exact overlap at depth {scan.overlap_depth}")
    bad = find_bad_pairs(ifs, n, env)
    notes = []
    if not bad.bad:
        return PerturbationReport(n, delta, eps, env, len(bad.results), 0, None, (), ifs, 0.0, None, True,
                                  (), (), 0.0, 0.0, SSCStatus.PASS.value, env, time.perf_counter() - t0,
                                  ("already separated at this depth; maps unchanged",))
    assign = select_points(ifs, bad, min_gap, seed)
    bumps = tuple(build_bump(ifs[a], assign.Y[a], assign.Z[a], delta, eps) for a in range(1, ifs.arity + 1))
    # each bump map was validated inside build_bump; unchanged maps are validated here
    reports = tuple(b.report or validate_map(b.g) for b in bumps)
    if not all(r.passed for r in reports):
        raise InvalidMap("a perturbed map failed validation")
    psi = IFS(tuple(b.g for b in bumps), reports=reports, name=f"{ifs.name} perturbed".strip())
    kicks = [k for b in bumps for k in b.kicks]
    repaired, preserved = [], []
    for p in assign.points:
        g, _ = certified_gap(psi, p.a, p.b, p.x, env)
        (repaired if p.bad else preserved).append(g)
    d2 = d2_distance(ifs, psi).value
    C = max(b.C for b in bumps)
    final_env = None
    try:
        final_env = invariant_envelope(psi, margin)
        rep = dual_ssc_check(psi, n, final_env, threads=threads, extra_points=[p.x for p in assign.points])
        status = rep.status.value
    except (EnvelopeNotFound, ToleranceNotReached) as exc:
        status = SSCStatus.INCONCLUSIVE.value
        notes.append(f"re-check incomplete: {exc}")
    if not all(b.norm_bounds_met for b in bumps if b.Y):
        notes.append("bump widths chosen from the separation, tail and product conditions; "
                     "the crude norm bounds would need widths below double precision")
    return PerturbationReport(
        n, delta, eps, env, len(bad.results), len(bad.bad), assign, bumps, psi,
        max(b.interpolation_residual for b in bumps),
        min(kicks) / delta if kicks else None,
        True, tuple(repaired), tuple(preserved), d2, C, status, final_env,
        time.perf_counter() - t0, tuple(notes),
    )
