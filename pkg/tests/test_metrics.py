import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfrobust import metrics as mt
from cfrobust.rng import complex_normal, substream


def _setup(n=4, k=2, sigma_e=0.3, seed=0):
    rng = substream(seed, "metrics-test")
    g_hat = complex_normal(rng, (n, k))
    g_err = sigma_e * complex_normal(rng, (n, k))
    p = complex_normal(rng, (n, k))
    return g_hat, g_err, p, math.sqrt(1 + sigma_e ** 2)


def symbol_level_powers(g_hat, g_err, p, tau, sigma_n2, n_sym, rng):
    """Sample powers of the scaled received signal ``tau * y``, split by origin."""
    k = p.shape[1]
    s = complex_normal(rng, (k, n_sym))
    noise = math.sqrt(sigma_n2) * complex_normal(rng, (k, n_sym))
    h = (g_hat - g_err).T  # scaled true channel as seen by the receivers
    desired, interf, total = np.empty(k), np.empty(k), np.empty(k)
    hp = h @ p  # hp[k, i]
    for u in range(k):
        own = hp[u, u] * s[u]
        other = hp[u] @ s - own
        y = own + other + tau * noise[u]
        desired[u] = np.mean(np.abs(own) ** 2)
        interf[u] = np.mean(np.abs(other) ** 2)
        total[u] = np.mean(np.abs(y) ** 2)
    return desired, interf, tau ** 2 * np.mean(np.abs(noise) ** 2, axis=1), total


def test_sinr_terms_match_symbol_simulation():
    g_hat, g_err, p, tau = _setup()
    sigma_n2 = 0.7
    sig, d_g, interf, noise = mt.sinr_terms(g_hat, g_err, p, tau, sigma_n2)
    des, itf, nz, tot = symbol_level_powers(g_hat, g_err, p, tau, sigma_n2, 10 ** 6,
                                            substream(5, "symbols"))
    np.testing.assert_allclose(des, sig + d_g, rtol=0.01)
    np.testing.assert_allclose(itf, interf, rtol=0.01)
    np.testing.assert_allclose(nz, noise, rtol=0.01)
    np.testing.assert_allclose(tot, sig + d_g + interf + noise, rtol=0.01)


def test_sinr_scalar_example():
    # one user, one AP: signal |3|^2 = 9, d_g = 1 - 2*3*1 = -5, noise = 2 * 5
    g_hat = np.array([[3.0 + 0j]])
    g_err = np.array([[1.0 + 0j]])
    p = np.array([[1.0 + 0j]])
    br = mt.sinr(0, g_hat, g_err, p, math.sqrt(2.0), 5.0)
    assert (br.signal, br.d_g, br.interference, br.noise) == pytest.approx((9, -5, 0, 10))
    assert br.gamma == pytest.approx(9 / 5)
    # the literal denominator goes negative once the noise is small
    with pytest.raises(FloatingPointError):
        mt.sinr(0, g_hat, g_err, p, math.sqrt(2.0), 0.5)


def test_sinr_perfect_csit_is_textbook():
    g_hat, _, p, _ = _setup(sigma_e=0.0)
    br = mt.sinr(1, g_hat, np.zeros_like(g_hat), p, 1.0, 0.3)
    hp = g_hat.T @ p
    ref = abs(hp[1, 1]) ** 2 / (abs(hp[1, 0]) ** 2 + 0.3)
    assert br.gamma == pytest.approx(ref, rel=1e-12)
    with pytest.raises(ValueError):
        mt.sinr(0, g_hat, np.zeros_like(g_hat), p, 0.5, 0.3)


def test_sinr_terms_batched():
    g_hat, g_err, p, tau = _setup(n=5, k=3)
    stack = np.stack([g_err, 2 * g_err, 0 * g_err])
    batched = mt.sinr_terms(g_hat, stack, p, tau, 0.1)
    for b in range(3):
        single = mt.sinr_terms(g_hat, stack[b], p, tau, 0.1)
        for x, y in zip(batched[:3], single[:3]):
            np.testing.assert_allclose(x[b], y, rtol=1e-13)


def test_rates():
    assert mt.instantaneous_rate(3.0) == pytest.approx(2.0)
    np.testing.assert_allclose(mt.instantaneous_rate([0.0, 1.0, 7.0]), [0, 1, 3])
    with pytest.raises(ValueError):
        mt.instantaneous_rate(-0.1)
    assert mt.average_rate([1.0, 2.0, 3.0]) == pytest.approx(2.0)
    np.testing.assert_allclose(mt.average_rate([[1.0, 4.0], [3.0, 0.0]]), [2.0, 2.0])
    with pytest.raises(ValueError):
        mt.average_rate([])


def test_ergodic_sum_rate_example():
    rep = mt.ergodic_sum_rate([[1.0, 2.0], [2.0, 3.0], [3.0, 4.0]], n_error_draws=10)
    assert rep.esr == pytest.approx(5.0)
    # sums 3, 5, 7: std 2, half-width 1.96 * 2 / sqrt(3)
    assert rep.ci_halfwidth == pytest.approx(mt.Z95 * 2 / math.sqrt(3))
    np.testing.assert_allclose(rep.per_user_avg_rate, [2.0, 3.0])
    assert rep.n_samples == 30
    one = mt.ergodic_sum_rate([[1.0, 1.0]])
    assert one.esr == 2.0 and one.ci_halfwidth == 0.0
    assert set(one.to_dict()) >= {"esr", "ci95_halfwidth", "n_dropped"}
    with pytest.raises(ValueError):
        mt.ergodic_sum_rate(np.zeros((0, 2)))


def test_realized_snr_example():
    g = np.ones((2, 2))
    assert mt.realized_snr(g, 2.0, 1.0) == pytest.approx(10 * math.log10(2.0))
    assert mt.realized_snr(g, 2.0, 1.0) == pytest.approx(3.0103, abs=1e-4)


@given(seed=st.integers(0, 10_000), se=st.floats(0.0, 1.0), s2=st.floats(1e-3, 10.0))
@settings(max_examples=50, deadline=None)
def test_received_power_decomposition(seed, se, s2):
    # signal + d_g + interference = sum_i |(g_hat - g_err)^T p_i|^2 for every user
    g_hat, g_err, p, tau = _setup(n=3, k=3, sigma_e=se, seed=seed)
    sig, d_g, interf, noise = mt.sinr_terms(g_hat, g_err, p, tau, s2)
    ref = np.sum(np.abs((g_hat - g_err).T @ p) ** 2, axis=1)
    np.testing.assert_allclose(sig + d_g + interf, ref, rtol=1e-10)
    assert np.all(sig + d_g >= -1e-12)
    assert noise == pytest.approx(tau ** 2 * s2)
