"""SINR under imperfect CSIT, rates and ergodic sum-rate."""

from dataclasses import dataclass

import numpy as np

Z95 = 1.959963984540054


@dataclass(frozen=True)
class SinrBreakdown:
    signal: float
    d_g: float
    interference: float
    noise: float
    gamma: float

    @property
    def denominator(self):
        return self.d_g + self.interference + self.noise


@dataclass(frozen=True)
class RateReport:
    per_user_avg_rate: np.ndarray
    esr: float
    ci_halfwidth: float
    n_channel_draws: int
    n_error_draws: int
    n_dropped: int = 0

    @property
    def n_samples(self):
        return self.n_channel_draws * self.n_error_draws

    def to_dict(self):
        return {
            "esr": self.esr,
            "ci95_halfwidth": self.ci_halfwidth,
            "per_user_avg_rate": [float(r) for r in self.per_user_avg_rate],
            "n_channel_draws": self.n_channel_draws,
            "n_error_draws": self.n_error_draws,
            "n_dropped": self.n_dropped,
        }


def sinr_terms(g_hat, g_err, p, tau, sigma_n2):
    """Vectorised SINR terms for every user.

    ``g_err`` may carry leading batch axes (``(..., N, K)``).  Returns the
    arrays ``(signal, d_g, interference, noise)`` each shaped ``(..., K)``.
    """
    p = getattr(p, "p", p)
    a = g_hat.T @ p                             # a[k, i] = g_hat_k^T p_i
    b = np.swapaxes(g_err, -1, -2) @ p          # b[..., k, i] = g_err_k^T p_i
    a_kk = np.diagonal(a)
    b_kk = np.diagonal(b, axis1=-2, axis2=-1)
    signal = np.abs(a_kk) ** 2
    d_g = np.abs(b_kk) ** 2 - 2.0 * np.real(np.conj(a_kk) * b_kk)
    cross = np.abs(a - b) ** 2
    interference = cross.sum(axis=-1) - np.diagonal(cross, axis1=-2, axis2=-1)
    noise = tau ** 2 * sigma_n2
    signal = np.broadcast_to(signal, d_g.shape)
    return signal, d_g, interference, noise


def sinr(k, g_hat, g_err, p, tau, sigma_n2):
    """SINR of user ``k`` and its constituent powers."""
    if tau < 1:
        raise ValueError("tau must be at least 1")
    signal, d_g, interf, noise = sinr_terms(g_hat, g_err, p, tau, sigma_n2)
    den = d_g[k] + interf[k] + noise
    if not den > 0:
        raise FloatingPointError(f"nonpositive SINR denominator for user {k}: {den!r}")
    return SinrBreakdown(float(signal[k]), float(d_g[k]), float(interf[k]), float(noise),
                         float(signal[k] / den))


def instantaneous_rate(gamma):
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("SINR must be nonnegative")
    out = np.log2(1.0 + gamma)
    return out if out.ndim else float(out)


def average_rate(samples):
    """Mean rate over error-matrix draws for one channel estimate."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("no rate samples")
    return float(np.mean(samples, axis=0)) if samples.ndim == 1 else np.mean(samples, axis=0)


def ergodic_sum_rate(per_draw_user_rates, n_error_draws=1, n_dropped=0):
    """Aggregate a ``(draws, K)`` matrix of per-user average rates.

    The 95% half-width uses the normal approximation on per-draw sum rates
    and is 0 for a single draw.
    """
    r = np.atleast_2d(np.asarray(per_draw_user_rates, dtype=float))
    if r.shape[0] == 0:
        raise ValueError("need at least one channel draw")
    sums = r.sum(axis=1)
    esr = float(np.mean(sums))
    ci = float(Z95 * np.std(sums, ddof=1) / np.sqrt(len(sums))) if len(sums) > 1 else 0.0
    return RateReport(r.mean(axis=0), esr, ci, r.shape[0], int(n_error_draws), int(n_dropped))


def realized_snr(g_true, P_t, sigma_n2):
    """Average SNR in dB: ``P_t tr(G^T G^*) / (N K sigma_n^2)``."""
    n, k = g_true.shape
    tr = float(np.sum(np.abs(g_true) ** 2))
    return float(10.0 * np.log10(P_t * tr / (n * k * sigma_n2)))
