import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualifs.dimension import (PressureFunction, ProbabilityVector, chaos_game, conformality_dimension,
                               dimension_bounds, entropy, lyapunov, pressure, pressure_csv)
from dualifs.errors import InvalidProbability, SingletonAttractor
from dualifs.maps import IFS


def test_pressure_at_zero(three):
    assert pressure(three, 0.0, 4) == pytest.approx(math.log(3), abs=1e-15)


@pytest.mark.parametrize("n", [1, 3, 5])
def test_pressure_of_similarities(n):
    ifs = IFS.from_sources(["x/3", "x/2 + 1/2"])
    t = 0.7
    assert pressure(ifs, t, n) == pytest.approx(math.log(3**-t + 2**-t), rel=1e-12)


def test_pressure_decreasing(three):
    P = PressureFunction(three, 4)
    vals = [P(t) for t in np.linspace(0, 2, 9)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_pressure_depth_spread(three):
    vals = [pressure(three, 1.0, n) for n in (4, 5, 6)]
    assert max(vals) - min(vals) < 0.2


@pytest.mark.parametrize("srcs,s", [(["x/2", "x/2 + 1/2"], 1.0), (["x/3", "x/3 + 2/3"], math.log(2) / math.log(3))])
def test_moran(srcs, s):
    est = conformality_dimension(IFS.from_sources(srcs), 6)
    assert est.value == pytest.approx(s, abs=1e-6)
    assert est.bracket[0] <= s + 1e-9 and s - 1e-9 <= est.bracket[1]


def test_singleton():
    with pytest.raises(SingletonAttractor):
        conformality_dimension(IFS.from_sources(["x/2"]))
    with pytest.raises(SingletonAttractor):
        conformality_dimension(IFS.from_sources(["x/2", "x/3"]))


def test_probability_vector():
    assert entropy(ProbabilityVector.uniform(3)) == pytest.approx(math.log(3), abs=1e-15)
    assert entropy(ProbabilityVector([0.5, 0.25, 0.25])) == pytest.approx(1.5 * math.log(2), abs=1e-15)
    with pytest.raises(InvalidProbability):
        ProbabilityVector([1 - 1e-12, 0.0, 1e-12])
    with pytest.raises(InvalidProbability):
        ProbabilityVector([0.5, 0.6])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6))
def test_entropy_bounds(ws):
    p = ProbabilityVector([w / sum(ws) for w in ws])
    assert 0.0 <= entropy(p) <= math.log(len(ws)) + 1e-12


def test_lyapunov_similarities():
    ifs = IFS.from_sources(["x/3", "x/2 + 1/2"])
    p = ProbabilityVector([0.3, 0.7])
    est = lyapunov(ifs, p, 5000, 20, seed=3)
    expect = -(0.3 * math.log(1 / 3) + 0.7 * math.log(1 / 2))
    assert est.value == pytest.approx(expect, abs=1e-12) and est.stderr == 0.0


def test_lyapunov_bracket_and_determinism(three):
    p = ProbabilityVector.uniform(3)
    a = lyapunov(three, p, 20000, 30, seed=11)
    b = lyapunov(three, p, 20000, 30, seed=11)
    assert a == b
    assert -math.log(three.c_max.hi) <= a.value <= -math.log(three.c_min.lo)
    c = lyapunov(three, p, 20000, 30, seed=11, threads=4)
    assert c.value == a.value


def test_chaos_game_stays_on_attractor_hull(three):
    xs = chaos_game(three, ProbabilityVector.uniform(3), 1000, 40, np.random.default_rng(0))
    assert xs.min() >= 0.0 and xs.max() <= 1.0


def test_report_uniform_thirds(thirds):
    rep = dimension_bounds(thirds, samples=5000)
    s = math.log(2) / math.log(3)
    assert rep.attractor_bound == pytest.approx(s, abs=1e-6)
    assert rep.measure_bound == pytest.approx(s, abs=1e-6)


def test_report_three(three):
    rep = dimension_bounds(three, samples=20000, depth=5)
    assert rep.bounds_attained and rep.certificate_verdict == "ACCEPT"
    skewed = dimension_bounds(three, ProbabilityVector([0.9, 0.05, 0.05]), samples=20000, depth=5)
    assert skewed.measure_bound < skewed.s_phi.value


def test_pressure_csv(thirds):
    lines = pressure_csv(thirds, 2, [0.0, 1.0]).splitlines()
    assert lines[0] == "t,P" and lines[1].startswith("0,0.69314718055994")
