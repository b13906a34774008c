import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualifs.enclosure import enclose_fn
from dualifs.interval import Interval, IntervalArray
from dualifs.jet import Jet, identity_jet, invert_jet
from dualifs.maps import UNIT, AnalyticMap, eval_jet

finite = st.floats(-1e3, 1e3, allow_nan=False)


@st.composite
def intervals(draw):
    a, b = draw(finite), draw(finite)
    return Interval(min(a, b), max(a, b))


def _inside(X: Interval, t: float) -> float:
    return min(max(X.lo + t * (X.hi - X.lo), X.lo), X.hi)


@settings(max_examples=300, deadline=None)
@given(intervals(), intervals(), st.floats(0, 1), st.floats(0, 1))
def test_arithmetic_is_inclusive(X, Y, s, t):
    x, y = _inside(X, s), _inside(Y, t)
    assert (X + Y).contains(x + y)
    assert (X - Y).contains(x - y)
    assert (X * Y).contains(x * y)
    if Y.lo > 0 or Y.hi < 0:
        assert (X / Y).contains(x / y)


@settings(max_examples=200, deadline=None)
@given(st.floats(-20, 20), st.floats(0, 5), st.floats(0, 1), st.integers(0, 6))
def test_exp_log_pow(lo, w, t, n):
    X = Interval(lo, lo + w)
    x = _inside(X, t)
    assert X.exp().contains(math.exp(x))
    assert (X**n).contains(x**n)
    if X.lo > 0:
        assert X.log().contains(math.log(x))


def test_outward_rounding():
    r = Interval.point(0.1) + Interval.point(0.2)
    assert r.lo < 0.30000000000000004 or r.hi > 0.3
    assert r.contains(0.3) or r.contains(0.30000000000000004)
    assert r.width > 0


def test_interval_array_matches_scalar():
    lo = np.array([-1.0, 0.5, 2.0])
    hi = np.array([0.5, 1.5, 3.0])
    A = IntervalArray(lo, hi)
    B = IntervalArray(np.array([1.0, -2.0, 0.25]), np.array([2.0, -1.0, 0.5]))
    for op in (lambda a, b: a + b, lambda a, b: a - b, lambda a, b: a * b, lambda a, b: a / b):
        R = op(A, B)
        for i in range(3):
            r = op(Interval(lo[i], hi[i]), Interval(B.lo[i], B.hi[i]))
            assert R.lo[i] <= r.lo + 1e-15 and R.hi[i] >= r.hi - 1e-15
    E = A.exp()
    assert np.all(E.lo <= np.exp(lo)) and np.all(E.hi >= np.exp(hi))


def test_jet_rules():
    j = Jet.variable(0.0, 3).exp()
    assert [float(v) for v in j.d] == [1.0, 1.0, 1.0, 1.0]
    x = Jet.variable(2.0, 3)
    q = (x * x * x) / (x + 1)
    # d/dx x^3/(x+1) at 2 = (3x^2(x+1) - x^3)/(x+1)^2 = (36 - 8)/9
    assert q.d[1] == pytest.approx(28 / 9)
    lg = Jet.variable(2.0, 2).log()
    assert lg.d[1] == pytest.approx(0.5) and lg.d[2] == pytest.approx(-0.25)


def test_invert_jet_of_exp():
    outer = Jet.variable(0.3, 4).exp()
    inv = invert_jet(outer, 0.3)
    # inverse of exp is log; at exp(0.3): derivatives 1/y, -1/y^2, 2/y^3, -6/y^4
    y = math.exp(0.3)
    for k, expect in enumerate([1 / y, -1 / y**2, 2 / y**3, -6 / y**4], start=1):
        assert inv.d[k] == pytest.approx(expect, rel=1e-12)
    ident = outer.compose(inv)
    assert ident.d[1] == pytest.approx(1.0) and abs(ident.d[2]) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_composition_chain_rule(a, b, x):
    inner = Jet.variable(x, 3) * a + Jet.variable(x, 3) ** 2 * b
    outer = Jet.variable(float(inner.d[0]), 3).exp()
    direct = inner.exp()
    composed = outer.compose(inner)
    for k in range(4):
        assert composed.d[k] == pytest.approx(direct.d[k], rel=1e-10, abs=1e-12)


def test_identity_jet():
    j = identity_jet(0.25, 3)
    assert [float(v) for v in j.d] == [0.25, 1.0, 0.0, 0.0]


def test_eval_jet_examples():
    assert [float(v) for v in eval_jet(AnalyticMap.from_source("x/8"), 0.0, 2).d] == [0.0, 0.125, 0.0]
    j = eval_jet(AnalyticMap.from_source("x/8 + x^2/32"), 1.0, 2)
    assert [float(v) for v in j.d] == [5 / 32, 3 / 16, 1 / 16]


@pytest.mark.parametrize("batched", [True, False])
def test_enclosure_bracket(batched):
    f = AnalyticMap.from_source("x/8 + x^2/32")
    e = enclose_fn(f.range_fn(1), UNIT, 1e-12, batched=batched)
    assert e.converged
    assert e.inf.contains(1 / 8) and e.sup.contains(3 / 16)
    assert e.sup.width <= 1e-11
    g = AnalyticMap.from_source("x/16 + x^2/32 + 29/32")
    r = enclose_fn(g.log_deriv_fn(1), UNIT, 1e-12, batched=batched)
    assert r.sup.contains(1.0) and r.inf.contains(0.5)


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_enclosure_brackets_grid_extremes(a, b, c):
    f = AnalyticMap.from_source(f"{abs(a)}*x - {abs(b)}*x^2 + {abs(c)}*exp(-3*x)")
    xs = np.linspace(0, 1, 201)
    vals = f.vec(xs)
    e = enclose_fn(f.range_fn(0), UNIT, 1e-9)
    assert e.converged
    assert e.sup.hi >= vals.max() and e.inf.lo <= vals.min()
    assert e.sup.width <= 2e-9 and e.inf.width <= 2e-9


def test_exp_past_overflow_is_unbounded():
    r = Interval(700.0, 800.0).exp()
    assert r.hi == math.inf and 0 < r.lo <= math.exp(700.0)
    r = Interval(1000.0, 1001.0).exp()
    assert r.hi == math.inf and r.lo > 1e307
