import math

import pytest

from bil.construction import desk_scale, envelope_products
from bil.errors import ConfigurationError
from bil.inflation import frame_j_terms, torus_j_terms

from test_construction import manual_schedule

# envelope-frame values at res 32, mu = 17/24, width = 1/4
FRAME = {
    (3, 0.4): (9.179203377685037e-09, 3.823927060262473e-11),
    (3, 0.2): (7.282055018195111e-09, 7.617789379225195e-12),
    (3, 0.1): (5.779040405253893e-09, 1.5130384361801324e-12),
    (4, 0.4): (2.593280177114488e-11, 1.0450118080632685e-13),
    (4, 0.2): (1.8327943000621624e-11, 1.8544637435719774e-14),
    (4, 0.1): (1.2958080252437383e-11, 3.2813743072887923e-15),
}


@pytest.mark.parametrize("key", sorted(FRAME))
def test_frame_values_frozen(key):
    d, eps = key
    f = frame_j_terms(d, eps, 17 / 24, 0.25, res=32)
    assert (f.j1, f.j2) == pytest.approx(FRAME[key], rel=1e-9)


@pytest.mark.parametrize("d", [3, 4])
def test_frame_ratio_scales_like_eps_squared(d):
    eps = (0.4, 0.2, 0.1)
    r = [frame_j_terms(d, e, 17 / 24, 0.25).ratio for e in eps]
    for (ea, ra), (eb, rb) in zip(zip(eps, r), zip(eps[1:], r[1:])):
        assert 0.5 <= (ra / rb) / (ea / eb) ** 2 <= 2.0


def test_frame_rejects_bad_eps():
    with pytest.raises(ConfigurationError):
        frame_j_terms(3, 1.5, 0.5, 0.25)


def test_torus_matches_frame_when_resolved():
    # a transversally resolved single scale at l = 3 on N = 128
    s = manual_schedule(3, 128, M=56, n_star=5, K=(3,), eps=0.5, mu=17 / 24, width=0.5)
    jt = torus_j_terms(s)
    fr = frame_j_terms(3, 0.5, 17 / 24, 0.5, res=64)
    scale = 2.0 ** (-2 * 3)
    assert scale * jt.per_block[3]["J1"] == pytest.approx(fr.j1, rel=0.05)
    assert scale * jt.per_block[3]["J2"] == pytest.approx(fr.j2, rel=0.05)
    # single scale: no cross-scale terms
    assert jt.totals["J3"] == 0.0 and jt.totals["J4"] == 0.0
    assert jt.totals["J1"] == pytest.approx(scale * jt.per_block[3]["J1"])


def test_torus_degenerate_desk():
    s = desk_scale(3, 1.0, n_effective=1, res=64, min_scales=1)
    jt = torus_j_terms(s, s.grid(), envelope_products(s, s.grid()))
    assert all(v == 0.0 for v in jt.totals.values())
    assert math.isnan(jt.ratio("J2", "J1"))


def test_two_scale_torus_terms():
    s = manual_schedule(2, 1024, M=360, n_star=8, K=(2, 6), eps=0.9)
    jt = torus_j_terms(s)
    assert set(jt.per_block) == {2, 6}
    assert all(jt.per_block[l]["J1"] > 0 for l in (2, 6))
