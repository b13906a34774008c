import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualifs.errors import ArityMismatch
from dualifs.maps import IFS
from dualifs.separation import CertVerdict, d2_distance, separation_scan, sesc_certify, stability_constant


def test_certificate(three):
    cert = sesc_certify(three)
    assert cert.verdict == CertVerdict.ACCEPT
    assert cert.c_max.contains(3 / 16) and cert.c_max.width <= 1e-9
    assert cert.beta.hi <= 1 + 1e-9
    assert cert.alpha >= 0.5 - 1e-9
    assert cert.margin >= 1 / 26 - 1e-6


def test_identical_maps_rejected():
    cert = sesc_certify(IFS.from_sources(["x/4 + x^2/16", "x/4 + x^2/16", "x/3 + 1/2"]))
    assert cert.verdict == CertVerdict.REJECT_CRITERION and cert.alpha == 0.0
    assert "alpha_zero" in cert.reasons


def test_similarities_rejected(thirds):
    cert = sesc_certify(thirds)
    assert cert.verdict == CertVerdict.REJECT_CRITERION and "beta_zero" in cert.reasons


def test_scan(three):
    s = separation_scan(three, 4, 129)
    assert all(r.delta > 0 for r in s.rows)
    assert s.overlap_depth is None
    assert 0 < s.empirical_rate < 1
    assert all(r.delta <= r.delta_upper for r in s.rows)
    lines = s.to_csv().splitlines()
    assert lines[0] == "depth,delta,log_delta_over_n,pairs_scanned,witness_i,witness_j" and len(lines) == 5


def test_exact_overlap_detected():
    f2 = "x/8 + x^2/32"
    f22 = "(x/8 + x^2/32)/8 + (x/8 + x^2/32)^2/32"
    ifs = IFS.from_sources(["x/8", f2, "x/16 + x^2/32 + 29/32", f22])
    s = separation_scan(ifs, 3, 65)
    assert s.overlap_depth == 2
    assert s.rows[0].delta > 0 and s.rows[1].delta == 0.0


def test_first_level_gap():
    ifs = IFS.from_sources(["x/4", "x/4 + 1/2"])
    assert separation_scan(ifs, 1, 257).rows[0].delta == pytest.approx(0.5)


def test_d2(three):
    assert d2_distance(three, three).value == 0.0
    shifted = IFS.from_sources(["x/8 + 1/1000", "x/8 + x^2/32", "x/16 + x^2/32 + 29/32"])
    r = d2_distance(three, shifted)
    assert r.grid_value == pytest.approx(1e-3, rel=1e-12)
    assert 1e-3 <= r.value <= 1e-3 + 2e-9
    with pytest.raises(ArityMismatch):
        d2_distance(three, IFS.from_sources(["x/2", "x/2 + 1/2"]))


coef = st.floats(-0.02, 0.02)


@settings(max_examples=8, deadline=None)
@given(st.lists(coef, min_size=4, max_size=4), st.lists(coef, min_size=4, max_size=4),
       st.lists(coef, min_size=4, max_size=4))
def test_d2_metric_properties(p, q, r):
    def system(c):
        return IFS.from_sources([f"x/4 + x^2/16 + {c[0]!r}*x + {abs(c[1])!r}",
                                 f"x/3 + 1/2 + {c[2]!r}*x^2 + {c[3]!r}*x^3"])

    a, b, c = system(p), system(q), system(r)
    ab, ba = d2_distance(a, b), d2_distance(b, a)
    assert ab.value == pytest.approx(ba.value, rel=1e-6, abs=1e-9)
    assert ab.grid_value <= ab.value
    # the certified upper bounds obey the inequality the true distance does
    assert ab.grid_value <= d2_distance(a, c).value + d2_distance(c, b).value


def test_stability_constant(three, thirds):
    sc = stability_constant(three)
    assert sc.C >= 1.0 and sc.C_prime > sc.per_term > 0
    assert math.isfinite(sc.C_prime)
