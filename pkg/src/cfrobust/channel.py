"""Network geometry, large-scale fading and imperfect-CSIT channel draws.

Channel matrices are stored AP-major, i.e. with shape ``(N, K)`` where entry
``(n, k)`` couples AP ``n`` to user ``k``.  The estimate and its error obey

    g_hat = sqrt(zeta) * (tau * h - sigma_e * h_err)
    g_err = sigma_e * sqrt(zeta) * h_err

so that ``g_hat + g_err == tau * g_true`` with ``tau = sqrt(1 + sigma_e**2)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import complex_normal


def db_to_linear(x_db):
    """Power ratio from decibels (10*log10 convention)."""
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    """Decibels from a power ratio (10*log10 convention)."""
    return 10.0 * np.log10(x)


@dataclass(frozen=True)
class PropagationParams:
    """Three-slope path-loss, shadowing and thermal-noise parameters.

    Frequencies are in MHz, heights and distances in meters.
    """

    carrier_freq: float = 1900.0
    h_ap: float = 15.0
    h_user: float = 1.65
    d0: float = 10.0
    d1: float = 50.0
    shadow_std_db: float = 8.0
    noise_temp: float = 290.0
    boltzmann: float = 1.381e-23
    bandwidth: float = 50e6
    noise_figure_db: float = 10.0

    def __post_init__(self):
        for name in ("carrier_freq", "h_ap", "h_user", "d0", "d1",
                     "noise_temp", "boltzmann", "bandwidth"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.shadow_std_db < 0:
            raise ValueError("shadow_std_db must be nonnegative")
        if not self.d0 < self.d1:
            raise ValueError(f"need d0 < d1, got d0={self.d0}, d1={self.d1}")


@dataclass(frozen=True)
class Geometry:
    ap_positions: np.ndarray
    user_positions: np.ndarray
    area_side: float

    @property
    def n_aps(self):
        return self.ap_positions.shape[0]

    @property
    def n_users(self):
        return self.user_positions.shape[0]

    def distances(self):
        """``(N, K)`` matrix of horizontal AP-user distances in meters."""
        diff = self.ap_positions[:, None, :] - self.user_positions[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    def to_dict(self):
        return {
            "area_side": self.area_side,
            "ap_positions": self.ap_positions.tolist(),
            "user_positions": self.user_positions.tolist(),
        }


@dataclass
class ChannelSet:
    g_true: np.ndarray
    g_hat: np.ndarray
    g_err: np.ndarray
    zeta: np.ndarray
    sigma_e: float
    tau: float = field(init=False)

    def __post_init__(self):
        self.tau = math.sqrt(1.0 + self.sigma_e ** 2)


def attenuation_constant(p):
    """Frequency/antenna-height dependent attenuation ``L`` in dB."""
    f, h_ap, h_u = p.carrier_freq, p.h_ap, p.h_user
    if f <= 0 or h_ap <= 0 or h_u <= 0:
        raise ValueError("carrier frequency and antenna heights must be positive")
    lf = math.log10(f)
    return (46.3 + 33.9 * lf - 13.82 * math.log10(h_ap)
            - (1.1 * lf - 0.7) * h_u + (1.56 * lf - 0.8))


def path_loss(d, p):
    """Three-slope path loss in dB (a negative number) at distance ``d``.

    Accepts scalars or arrays of distances in meters.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distances must be nonnegative")
    L = attenuation_constant(p)
    floor = -L - 15.0 * math.log10(p.d1) - 20.0 * math.log10(p.d0)
    with np.errstate(divide="ignore"):
        logd = np.log10(np.maximum(d, p.d0))
    mid = -L - 15.0 * math.log10(p.d1) - 20.0 * logd
    far = -L - 35.0 * logd
    out = np.where(d > p.d1, far, np.where(d > p.d0, mid, floor))
    return out if out.ndim else float(out)


def place_network(n_aps, n_users, area_side, rng):
    """Uniform i.i.d. placement of APs and users in ``[0, area_side]^2``."""
    if n_aps < 1 or n_users < 1:
        raise ValueError("need at least one AP and one user")
    if not area_side > 0:
        raise ValueError(f"area_side must be positive, got {area_side!r}")
    aps = rng.uniform(0.0, area_side, size=(n_aps, 2))
    users = rng.uniform(0.0, area_side, size=(n_users, 2))
    return Geometry(aps, users, float(area_side))


def large_scale_coefficients(geom, p, rng):
    """Linear-scale ``zeta`` with log-normal shadowing, shape ``(N, K)``."""
    pl_db = path_loss(geom.distances(), p)
    z = rng.standard_normal(pl_db.shape)
    return db_to_linear(pl_db + p.shadow_std_db * z)


def _check_sigma_e(sigma_e):
    if sigma_e < 0:
        raise ValueError(f"sigma_e must be nonnegative, got {sigma_e!r}")


def draw_channel_triple(zeta, sigma_e, rng):
    """Draw a consistent (true, estimate, error) channel triple."""
    _check_sigma_e(sigma_e)
    zeta = np.asarray(zeta, dtype=float)
    tau = math.sqrt(1.0 + sigma_e ** 2)
    amp = np.sqrt(zeta)
    h = complex_normal(rng, zeta.shape)
    h_err = complex_normal(rng, zeta.shape)
    g_true = amp * h
    g_err = sigma_e * amp * h_err
    g_hat = amp * (tau * h - sigma_e * h_err)
    return ChannelSet(g_true, g_hat, g_err, zeta, float(sigma_e))


def redraw_error(g_hat, zeta, sigma_e, rng):
    """Fresh error matrix for a fixed estimate.

    Returns ``(g_err, g_true)`` with ``g_true = (g_hat + g_err) / tau``.
    """
    _check_sigma_e(sigma_e)
    tau = math.sqrt(1.0 + sigma_e ** 2)
    g_err = sigma_e * np.sqrt(zeta) * complex_normal(rng, np.shape(g_hat))
    return g_err, (g_hat + g_err) / tau


def noise_variance(p):
    """Thermal noise power ``T0 * kB * B * NF`` in watts."""
    return p.noise_temp * p.boltzmann * p.bandwidth * float(db_to_linear(p.noise_figure_db))


def power_for_snr(zeta, snr_linear, sigma_n2):
    """Total transmit power that yields ``snr_linear`` on average.

    Inverts ``SNR = P_t tr(G^T G^*) / (N K sigma_n^2)`` with the channel trace
    replaced by its expectation ``sum(zeta)``.
    """
    if not snr_linear > 0:
        raise ValueError("snr must be positive")
    zeta = np.asarray(zeta, dtype=float)
    total = zeta.sum()
    if not total > 0:
        raise ValueError("large-scale coefficients sum to zero")
    n, k = zeta.shape
    return snr_linear * n * k * sigma_n2 / total
