import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfrobust import channel as ch
from cfrobust.rng import substream


def _attenuation_hp(f, h_ap, h_u):
    mpmath.mp.dps = 40
    lf = mpmath.log10(f)
    return (46.3 + 33.9 * lf - 13.82 * mpmath.log10(h_ap)
            - (mpmath.mpf("1.1") * lf - mpmath.mpf("0.7")) * h_u
            + (mpmath.mpf("1.56") * lf - mpmath.mpf("0.8")))


def test_attenuation_matches_high_precision():
    p = ch.PropagationParams()
    assert ch.attenuation_constant(p) == pytest.approx(float(_attenuation_hp(1900, 15, 1.65)),
                                                       abs=1e-12)
    assert ch.attenuation_constant(p) == pytest.approx(140.715, abs=1e-3)


@given(f=st.floats(150, 2000), h_ap=st.floats(1, 200), h_u=st.floats(1, 10))
@settings(max_examples=50, deadline=None)
def test_attenuation_property(f, h_ap, h_u):
    p = ch.PropagationParams(carrier_freq=f, h_ap=h_ap, h_user=h_u)
    assert ch.attenuation_constant(p) == pytest.approx(float(_attenuation_hp(f, h_ap, h_u)),
                                                       rel=1e-12)


def test_attenuation_rejects_nonpositive():
    p = ch.PropagationParams()
    object.__setattr__(p, "h_ap", 0.0)
    with pytest.raises(ValueError):
        ch.attenuation_constant(p)


@pytest.mark.parametrize("d, expected", [
    (1.0, -186.1996), (10.0, -186.1996), (30.0, -195.7421), (50.0, -200.1790),
    (100.0, -210.7151),
])
def test_path_loss_regions(d, expected):
    assert ch.path_loss(d, ch.PropagationParams()) == pytest.approx(expected, abs=1e-3)


def test_path_loss_continuous_at_breakpoints():
    p = ch.PropagationParams()
    for b in (p.d0, p.d1):
        lo, hi = ch.path_loss([b * (1 - 1e-12), b * (1 + 1e-12)], p)
        assert abs(lo - hi) < 1e-8


def test_path_loss_monotone_and_vectorised():
    d = np.linspace(0, 1500, 2001)
    pl = ch.path_loss(d, ch.PropagationParams())
    assert pl.shape == d.shape
    assert np.all(np.diff(pl) <= 1e-12)
    with pytest.raises(ValueError):
        ch.path_loss(-1.0, ch.PropagationParams())


def test_noise_variance():
    assert ch.noise_variance(ch.PropagationParams()) == pytest.approx(290 * 1.381e-23 * 50e6 * 10,
                                                                       rel=1e-14)
    assert ch.noise_variance(ch.PropagationParams()) == pytest.approx(2.0024e-12, rel=1e-4)


def test_power_for_snr_example():
    zeta = np.full((4, 2), 0.5)
    # snr * N * K * sigma^2 / sum(zeta) = 2 * 8 * 2 / 4
    assert ch.power_for_snr(zeta, 2.0, 2.0) == pytest.approx(8.0)
    with pytest.raises(ValueError):
        ch.power_for_snr(zeta, 0.0, 1.0)


def test_geometry_and_zeta_shapes():
    rng = substream(3, "t")
    geom = ch.place_network(6, 3, 100.0, rng)
    d = geom.distances()
    assert d.shape == (6, 3)
    assert np.all((geom.ap_positions >= 0) & (geom.ap_positions <= 100))
    i, k = 2, 1
    assert d[i, k] == pytest.approx(np.hypot(*(geom.ap_positions[i] - geom.user_positions[k])))
    zeta = ch.large_scale_coefficients(geom, ch.PropagationParams(), rng)
    assert zeta.shape == (6, 3) and np.all(zeta > 0)


def test_shadowing_statistics():
    p = ch.PropagationParams()
    rng = substream(0, "shadow")
    geom = ch.Geometry(np.zeros((200000, 2)), np.array([[100.0, 0.0]]), 1000.0)
    z_db = ch.linear_to_db(ch.large_scale_coefficients(geom, p, rng))
    assert np.mean(z_db) == pytest.approx(ch.path_loss(100.0, p), abs=0.05)
    assert np.std(z_db) == pytest.approx(8.0, rel=0.01)


def test_channel_triple_consistency():
    zeta = np.array([[1.0, 2.0], [0.5, 4.0], [3.0, 0.25]])
    cs = ch.draw_channel_triple(zeta, 0.4, substream(1, "c"))
    assert cs.tau == pytest.approx(math.sqrt(1.16))
    np.testing.assert_allclose(cs.g_hat + cs.g_err, cs.tau * cs.g_true, atol=1e-14)


def test_perfect_csit_triple():
    cs = ch.draw_channel_triple(np.ones((4, 2)), 0.0, substream(1, "c"))
    np.testing.assert_array_equal(cs.g_hat, cs.g_true)
    assert not np.any(cs.g_err)


def test_redraw_error_keeps_estimate():
    zeta = np.ones((3, 2))
    cs = ch.draw_channel_triple(zeta, 0.3, substream(2, "c"))
    g_err, g_true = ch.redraw_error(cs.g_hat, zeta, 0.3, substream(2, "e"))
    np.testing.assert_allclose(cs.g_hat + g_err, cs.tau * g_true, atol=1e-14)
    with pytest.raises(ValueError):
        ch.redraw_error(cs.g_hat, zeta, -0.1, substream(2, "e"))


def test_propagation_validation():
    with pytest.raises(ValueError):
        ch.PropagationParams(d0=60.0, d1=50.0)
    with pytest.raises(ValueError):
        ch.PropagationParams(bandwidth=0.0)


def test_db_roundtrip():
    x = np.array([1e-20, 1e-3, 1.0, 42.0])
    np.testing.assert_allclose(ch.db_to_linear(ch.linear_to_db(x)), x, rtol=1e-12)
