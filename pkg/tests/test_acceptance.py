"""End-to-end acceptance checks, one test per criterion.

Each test records its outcome in ``conftest.ACCEPTANCE`` (printed in the terminal
summary) and prints a single PASS/FAIL line before asserting.
"""

import json
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE, THREE_MAPS
from dualifs.calculus import H_derivatives, bound_constants, fandg_check
from dualifs.cli import EXIT_OK, main
from dualifs.conjugation import ConjugacyKind, KoenigsMap, conjugacy_test, conjugate_ifs
from dualifs.dimension import ProbabilityVector, conformality_dimension, entropy, lyapunov
from dualifs.dual import H, H_by_composition, choose_envelope, dual_ssc_check
from dualifs.maps import IFS
from dualifs.perturbation import perturb_to_dual_ssc
from dualifs.separation import d2_distance, separation_scan, stability_constant
from dualifs.words import Word, common_prefix


def _record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (ok, detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _random_system(rng) -> IFS:
    """Two or three validated maps: quadratics and an exponential, with random coefficients."""
    srcs = []
    for _ in range(int(rng.integers(2, 4))):
        if rng.random() < 0.3:
            s = rng.uniform(0.1, 0.3)
            top = s * (math.e - 1) / 2
            srcs.append(f"{s!r}*(exp(x) - 1)/2 + {rng.uniform(0, 1 - top)!r}")
        else:
            a = rng.uniform(0.1, 0.35)
            b = rng.uniform(-a / 3, a / 3)
            lo, hi = min(0.0, a + b), max(0.0, a + b)
            srcs.append(f"{a!r}*x + {b!r}*x^2 + {rng.uniform(-lo, 1 - hi)!r}")
    return IFS.from_sources(srcs)


def _random_word(rng, arity: int, lo: int, hi: int) -> Word:
    return Word(rng.integers(1, arity + 1, size=int(rng.integers(lo, hi + 1))).tolist())


@pytest.fixture(scope="module")
def systems(three):
    rng = np.random.default_rng(2024)
    return [three] + [_random_system(rng) for _ in range(5)]


def test_criterion_1_sesc_certificate(capsys):
    t0 = time.perf_counter()
    code = main(["sesc-certify", "example", "--json"])
    rep = json.loads(capsys.readouterr().out)["result"]
    dt = time.perf_counter() - t0
    c_lo, c_hi = rep["c_max"]
    alpha_ok = all(w["alpha"] >= 0.5 - 1e-9 for w in rep["witnesses"])
    ok = (code == EXIT_OK and rep["verdict"] == "ACCEPT"
          and c_lo <= 3 / 16 <= c_hi and c_hi - c_lo <= 1e-9
          and rep["beta"][1] <= 1 + 1e-9 and alpha_ok
          and rep["margin"] >= 1 / 26 - 1e-6 and dt <= 5.0)
    _record(1, ok, f"margin={rep['margin']:.12g} c_max=[{c_lo:.17g}, {c_hi:.17g}] "
                   f"beta<={rep['beta'][1]:.12g} alpha={rep['alpha']:.12g} t={dt:.2f}s")


def test_criterion_2_projection_identity(systems):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    xs = np.linspace(0.0, 1.0, 20)
    worst = 0.0
    for ifs in systems:
        for _ in range(100):
            w = _random_word(rng, ifs.arity, 1, 12)
            h = np.asarray(H(ifs, w, xs), dtype=float)
            ref = np.asarray(H_by_composition(ifs, w, xs), dtype=float)
            worst = max(worst, float(np.max(np.abs(h - ref) / (1 + np.abs(h)))))
    dt = time.perf_counter() - t0
    _record(2, worst <= 1e-10 and dt <= 10.0, f"max scaled error={worst:.3g} t={dt:.2f}s")


def test_criterion_3_derivative_formula(systems):
    rng = np.random.default_rng(11)
    h = 1e-4
    worst_fd = 0.0
    for _ in range(50):
        ifs = systems[int(rng.integers(len(systems)))]
        w = _random_word(rng, ifs.arity, 1, 8)
        x = float(rng.uniform(0.0, 1.0))
        exact = H_derivatives(ifs, w, x, 4)
        lo = H_derivatives(ifs, w, x - h, 3)
        hi = H_derivatives(ifs, w, x + h, 3)
        for k in range(1, 5):
            fd = (hi[k - 1] - lo[k - 1]) / (2 * h)
            worst_fd = max(worst_fd, abs(fd - exact[k]) / max(abs(exact[k]), 1.0))
    worst_fg = 0.0
    for _ in range(50):
        ifs = systems[int(rng.integers(len(systems)))]
        w = _random_word(rng, ifs.arity, 1, 8)
        x = float(rng.uniform(0.0, 1.0))
        for k in range(2, 6):
            worst_fg = max(worst_fg, fandg_check(ifs, w, x, k))
    _record(3, worst_fd <= 1e-5 and worst_fg <= 1e-9,
            f"finite-difference rel err={worst_fd:.3g} composition residual={worst_fg:.3g}")


def test_criterion_4_bound_suite(systems):
    rng = np.random.default_rng(13)
    slack = 1e-9
    instances = violations = 0
    per_system = 10_000 // len(systems) + 1
    for ifs in systems:
        bc = bound_constants(ifs, 4)
        C, c = bc.C, bc.c_max
        words = 20
        npts = per_system // words + 1
        for _ in range(words):
            a = _random_word(rng, ifs.arity, 1, 10)
            # b shares a random prefix with a, then diverges
            m = int(rng.integers(0, len(a)))
            tail = _random_word(rng, ifs.arity, 1, 6)
            if m < len(a) and tail[0] == a[m]:
                tail = Word([tail[0] % ifs.arity + 1] + list(tail)[1:])
            b = Word(list(a)[:m] + list(tail))
            x = rng.uniform(0.0, 1.0, npts)
            y = rng.uniform(0.0, 1.0, npts)
            Ha = H_derivatives(ifs, a, x, 4)
            Hy = H_derivatives(ifs, a, y, 3)
            Hb = H_derivatives(ifs, b, x, 3)
            shared = len(common_prefix(a, b))
            for k in range(4):
                violations += int(np.sum(np.abs(Ha[k]) > C[k] + slack))
                violations += int(np.sum(np.abs(Ha[k] - Hy[k]) > C[k + 1] * np.abs(x - y) + slack))
                violations += int(np.sum(np.abs(Ha[k] - Hb[k]) > 2 * C[k] * c**shared + slack))
            instances += npts
    _record(4, violations == 0 and instances >= 10_000,
            f"instances={instances} orders 0..3, violations={violations}")


def test_criterion_5_moran_oracle():
    halves = IFS.from_sources(["x/2", "x/2 + 1/2"])
    thirds = IFS.from_sources(["x/3", "x/3 + 2/3"])
    s2 = conformality_dimension(halves, depth=6).value
    s3 = conformality_dimension(thirds, depth=6).value
    mixed = IFS.from_sources(["x/3", "x/2 + 1/2"])
    p = ProbabilityVector([0.3, 0.7])
    chi = lyapunov(mixed, p, samples=2000).value
    chi_err = abs(chi - (0.3 * math.log(3) + 0.7 * math.log(2)))
    u = ProbabilityVector.uniform(2)
    ratio = entropy(u) / lyapunov(thirds, u, samples=2000).value
    ok = (abs(s2 - 1.0) <= 1e-6 and abs(s3 - math.log(2) / math.log(3)) <= 1e-6
          and chi_err <= 1e-12 and abs(ratio - s3) <= 1e-6)
    _record(5, ok, f"s(1/2)={s2:.12g} s(1/3)={s3:.12g} lyapunov err={chi_err:.3g} H/chi={ratio:.12g}")


def test_criterion_6_conjugacy_round_trip(three, thirds):
    v = conjugacy_test(conjugate_ifs(thirds, "(exp(x) - 1)/(exp(1) - 1)"))
    ratios = [s.ratio for s in v.parameters]
    ok1 = v.kind == ConjugacyKind.CONJUGATE and all(abs(r - 1 / 3) <= 1e-8 for r in ratios)
    w = conjugacy_test(three)
    g12 = next((g for g in w.generators if (g.i, g.j) == (1, 2)), None)
    ok2 = w.kind == ConjugacyKind.NOT_DETECTED and g12 is not None and abs(g12.at_zero - 4 / 7) <= 1e-9
    _record(6, ok1 and ok2, f"ratios={ratios} example={w.kind.value} "
                            f"|H1(0)-H2(0)|={g12.at_zero if g12 else float('nan'):.17g}")


def test_criterion_7_koenigs_equation(three):
    res = [KoenigsMap(m).residual(101) for m in three.maps]
    _record(7, max(res) <= 1e-10, "residuals=" + ", ".join(f"{r:.3g}" for r in res))


def test_criterion_8_perturbation_pipeline():
    phi = IFS.from_sources(["x/3", "x/3 + 1/3"])
    delta = 1e-3
    t0 = time.perf_counter()
    rep = perturb_to_dual_ssc(phi, depth=3, delta=delta)
    dt = time.perf_counter() - t0
    kicks = [k for b in rep.bumps for k in b.kicks]
    checks = {
        "a": rep.interpolation_residual <= 1e-9,
        "b": bool(kicks) and min(kicks) >= delta * (1 - 1e-6),
        "c": rep.validated and all(r.passed for r in rep.perturbed.reports),
        "d": bool(rep.repaired_gaps) and min(rep.repaired_gaps) >= delta / 3 - 1e-6,
        "e": rep.d2 <= rep.C * delta + delta,
    }
    ok = all(checks.values()) and dt <= 60.0
    _record(8, ok, " ".join(f"({k})={'ok' if v else 'no'}" for k, v in checks.items())
            + f" bad={rep.bad_pairs}/{rep.pairs} residual={rep.interpolation_residual:.3g}"
            f" min gap={min(rep.repaired_gaps, default=math.nan):.3g}"
            f" d2={rep.d2:.3g}<= {rep.d2_bound:.3g} final={rep.final_status} t={dt:.1f}s")


def test_criterion_9_separation_scan(three):
    t0 = time.perf_counter()
    series = separation_scan(three, 6, grid=257)
    overlap = IFS.from_sources(THREE_MAPS + ["(x/8 + x^2/32)/8 + (x/8 + x^2/32)^2/32"])
    o = separation_scan(overlap, 3, grid=257)
    dt = time.perf_counter() - t0
    ok = (all(r.delta > 0 for r in series.rows) and math.isfinite(series.empirical_rate)
          and series.overlap_depth is None and o.overlap_depth == 2 and dt <= 30.0)
    _record(9, ok, f"rate={series.empirical_rate:.6g} min delta={min(r.delta for r in series.rows):.3g} "
                   f"overlap depth={o.overlap_depth} t={dt:.1f}s")


def _perturbed_three(u: np.ndarray, s: float) -> IFS:
    """Coefficient perturbation of the three-map example that keeps every map inside [0,1]."""
    e = [float(v) for v in s * u]
    return IFS.from_sources([
        f"{1 / 8 + e[0]!r}*x + {abs(e[1])!r}",
        f"{1 / 8 + e[2]!r}*x + {1 / 32 + e[3]!r}*x^2 + {abs(e[4])!r}",
        f"{1 / 16 + e[5]!r}*x + {1 / 32 + e[6]!r}*x^2 + {29 / 32 - abs(e[7]) - abs(e[5]) - abs(e[6])!r}",
    ])


def test_criterion_10_stability(three):
    depth = 2
    base = dual_ssc_check(three, depth)
    gamma = base.min_gap
    Cp = stability_constant(three).C_prime
    target = gamma / (3 * Cp)
    rng = np.random.default_rng(17)
    passed = 0
    worst_d2 = 0.0
    for _ in range(10):
        u = rng.uniform(-1.0, 1.0, 8)
        unit = d2_distance(three, _perturbed_three(u, 1e-3)).value / 1e-3
        psi = _perturbed_three(u, 0.99 * target / unit)
        d2 = d2_distance(three, psi).value
        worst_d2 = max(worst_d2, d2)
        if d2 <= target and dual_ssc_check(psi, depth, choose_envelope(psi)).status.value == "PASS":
            passed += 1
    ok = base.status.value == "PASS" and passed == 10
    _record(10, ok, f"depth={depth} gamma={gamma:.4g} C'={Cp:.4g} d2 max={worst_d2:.3g} "
                    f"<= {target:.3g}, passing {passed}/10")
