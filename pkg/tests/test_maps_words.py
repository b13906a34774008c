import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualifs.errors import InvalidMap, LetterOutOfRange
from dualifs.interval import Interval
from dualifs.maps import IFS, AnalyticMap, enclose, enclose_ratio, fixed_point, validate_map
from dualifs.words import (Orientation, PeriodicWord, Word, common_prefix, compose_eval, compose_value,
                           enumerate_words, natural_projection)


def test_validate_linear():
    r = validate_map(AnalyticMap.from_source("x/8"))
    assert r.passed
    d = r.check("contracting").enclosure
    assert d.lo <= 0.125 <= d.hi and d.width < 1e-15
    assert r.check("analytic").status == "assumed"


def test_validate_expanding():
    r = validate_map(AnalyticMap.from_source("2*x"))
    c = r.check("contracting")
    assert not r.passed and c.status == "fail" and c.enclosure.contains(2.0)


def test_third_map_image():
    r = validate_map(AnalyticMap.from_source("x/16 + x^2/32 + 29/32"))
    img = r.check("maps_unit_into_itself").enclosure
    assert r.passed
    # increasing, so the image is [f(0), f(1)] = [29/32, 1]; 1 is the fixed point
    assert img.lo == pytest.approx(29 / 32, abs=1e-12) and img.hi == pytest.approx(1.0, abs=1e-12)


def test_ifs_rejects_invalid():
    with pytest.raises(InvalidMap):
        IFS.from_sources(["x/2", "2*x"])


def test_constants(three):
    assert three.c_max.contains(3 / 16) and three.c_max.width <= 1e-9
    assert three.beta.hi <= 1 + 1e-9
    assert three.D(1) <= 1 + 1e-9
    assert three.C0 <= 16 / 13 + 1e-9


def test_enclosure_helpers(three):
    assert enclose(three[2], Interval(0, 1), 1).contains(Interval(1 / 8, 3 / 16))
    r = enclose_ratio(three[3])
    assert r.lo == pytest.approx(0.5, abs=1e-9) and r.hi == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("src,p", [("x/8", 0.0), ("x/16 + x^2/32 + 29/32", 1.0), ("(x+1)/3", 0.5)])
def test_fixed_points(src, p):
    assert fixed_point(AnalyticMap.from_source(src)) == pytest.approx(p, abs=1e-14)


def test_compose_examples(three):
    cj = compose_eval(three, Word(), Orientation.FORWARD, 0.3, 2)
    assert [float(v) for v in cj.jet.d] == [0.3, 1.0, 0.0]
    cj = compose_eval(three, Word([1, 1]), Orientation.FORWARD, 1.0, 1)
    assert cj.value == pytest.approx(1 / 64) and cj.derivative == pytest.approx(1 / 64)
    cj = compose_eval(three, Word([2, 3]), Orientation.REVERSED, 0.0, 1)
    assert cj.value == pytest.approx(29 / 32) and cj.derivative == pytest.approx(1 / 128)


def test_orientation_is_reversal(three):
    w = Word([1, 3, 2])
    a = compose_value(three, w, Orientation.REVERSED, 0.4)
    b = compose_value(three, w.reverse(), Orientation.FORWARD, 0.4)
    assert a == b


def test_letters_checked(three):
    with pytest.raises(LetterOutOfRange):
        compose_value(three, Word([4]), Orientation.FORWARD, 0.1)


def test_common_prefix():
    assert common_prefix(Word([1, 2, 3]), Word([1, 2, 1])) == Word([1, 2])
    assert common_prefix(Word([1, 2]), Word([2, 2])) == Word()
    assert common_prefix(Word([3, 1]), Word([3, 1])) == Word([3, 1])


def test_enumeration():
    assert list(enumerate_words(2, 2)) == [Word(w) for w in ([1, 1], [1, 2], [2, 1], [2, 2])]
    assert list(enumerate_words(3, 0)) == [Word()]
    assert sum(1 for _ in enumerate_words(3, 6)) == 729


def test_natural_projection(three):
    assert natural_projection(three, PeriodicWord(Word(), Word([1])), 5).value == 0.0
    p = natural_projection(three, PeriodicWord(Word(), Word([3])), 40)
    assert abs(p.value - 1.0) <= p.error_bound + 1e-15
    e1 = natural_projection(three, PeriodicWord(Word(), Word([3])), 10).error_bound
    assert natural_projection(three, PeriodicWord(Word(), Word([3])), 11).error_bound <= e1 / 2


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 3), max_size=6), st.lists(st.integers(1, 3), max_size=6), st.floats(0, 1))
def test_composition_splits(u, v, x):
    """f_{uv} = f_u o f_v in the forward orientation."""
    from conftest import THREE_MAPS

    ifs = _cached(tuple(THREE_MAPS))
    a = compose_value(ifs, Word(u) + Word(v), Orientation.FORWARD, x)
    b = compose_value(ifs, Word(u), Orientation.FORWARD, compose_value(ifs, Word(v), Orientation.FORWARD, x))
    assert a == pytest.approx(b, rel=1e-14, abs=1e-16)


_ifs_cache: dict = {}


def _cached(srcs):
    if srcs not in _ifs_cache:
        _ifs_cache[srcs] = IFS.from_sources(list(srcs))
    return _ifs_cache[srcs]


def test_vectorized_jets_agree(three):
    xs = np.linspace(0, 1, 7)
    cj = compose_eval(three, Word([2, 3, 1]), Orientation.FORWARD, xs, 2)
    for i, x in enumerate(xs):
        one = compose_eval(three, Word([2, 3, 1]), Orientation.FORWARD, float(x), 2)
        for k in range(3):
            assert cj.jet.d[k][i] == pytest.approx(one.jet.d[k], rel=1e-14, abs=1e-18)
