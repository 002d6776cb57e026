"""Conventional and robust MMSE precoders.

The robust precoder minimises the receive MSE plus the average power of the
interference caused by CSIT errors, subject to ``tr(P P^H) = P_t``.  For a
gain factor ``f`` and loading ``lam`` the solution is

    P = f * tau * (G^* G^T + (1 + f^2) Theta + lam * f^2 * tau^2 I)^{-1} G^*

with ``Theta = E[G_err^* G_err^T]``.  ``f`` and ``lam`` depend on ``P``, so the
three are updated alternately, starting from the conventional MMSE precoder.

Channels are ``(N, K)`` arrays (AP-major); precoders are ``(N, K)`` as well.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

log = logging.getLogger(__name__)

IDENTITY_SCALED = "identity_scaled"
EXACT_DIAGONAL = "exact_diagonal"
THETA_MODES = (IDENTITY_SCALED, EXACT_DIAGONAL)


class NumericalFailure(RuntimeError):
    """The regularised system could not be solved, even with jitter."""


@dataclass(frozen=True)
class RobustSolveSettings:
    max_iterations: int = 10
    convergence_tol: float = 1e-8
    jitter: float = 1e-10

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not (self.convergence_tol > 0 and self.jitter > 0):
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class ErrorCovariance:
    """``E[G_err^* G_err^T]`` as an ``N x N`` matrix.

    ``zeta`` is kept so that the covariance restricted to a user cluster can be
    rebuilt in the exact mode.
    """

    theta: np.ndarray
    mode: str
    sigma_e: float
    zeta: np.ndarray = field(repr=False, default=None)

    def restrict(self, users):
        """Covariance of the error of the columns ``users`` only."""
        if self.mode == IDENTITY_SCALED or self.zeta is None:
            return self
        return error_covariance(self.zeta[:, list(users)], self.sigma_e, self.mode)


@dataclass
class PrecoderMatrix:
    p: np.ndarray
    f: float
    lam: float
    total_power: float
    iterations_run: int = 0
    residual: float = 0.0
    scheme: str = ""
    f_trace: list = field(default_factory=list)
    lam_trace: list = field(default_factory=list)
    residual_trace: list = field(default_factory=list)
    jittered: bool = False
    rescale_gain: float = 1.0
    clusters: list = field(default_factory=list, repr=False)

    def diagnostics(self, traces=False):
        out = {
            "scheme": self.scheme,
            "f": self.f,
            "lambda": self.lam,
            "total_power": self.total_power,
            "iterations_run": self.iterations_run,
            "residual": self.residual,
            "jittered": self.jittered,
            "rescale_gain": self.rescale_gain,
        }
        if traces:
            out["f_trace"] = list(self.f_trace)
            out["lambda_trace"] = list(self.lam_trace)
            out["residual_trace"] = list(self.residual_trace)
        if self.clusters:
            out["cluster_f"] = [c.f for c in self.clusters]
            out["cluster_lambda"] = [c.lam for c in self.clusters]
        return out


def error_covariance(zeta, sigma_e, mode=IDENTITY_SCALED):
    zeta = np.asarray(zeta, dtype=float)
    if sigma_e < 0:
        raise ValueError("sigma_e must be nonnegative")
    n = zeta.shape[0]
    s2 = sigma_e ** 2
    if mode == IDENTITY_SCALED:
        theta = s2 * np.eye(n)
    elif mode == EXACT_DIAGONAL:
        theta = np.diag(s2 * zeta.sum(axis=1))
    else:
        raise ValueError(f"unknown error-covariance mode {mode!r}; expected one of {THETA_MODES}")
    return ErrorCovariance(theta, mode, float(sigma_e), zeta)


def _gram(g):
    # G^* G^T, N x N Hermitian
    return g.conj() @ g.T


def _solve_hermitian(a, b, jitter_scale):
    """Solve ``a x = b`` for Hermitian ``a``; returns ``(x, jittered)``."""
    try:
        return sla.cho_solve(sla.cho_factor(a, check_finite=False), b), False
    except (np.linalg.LinAlgError, sla.LinAlgError):
        pass
    n = a.shape[0]
    a_j = a + jitter_scale * np.eye(n)
    try:
        return sla.cho_solve(sla.cho_factor(a_j, check_finite=False), b), True
    except (np.linalg.LinAlgError, sla.LinAlgError):
        pass
    # loading may legitimately be negative; fall back to an indefinite solver
    if not np.all(np.isfinite(a_j)):
        raise NumericalFailure("regularised system has non-finite entries")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", sla.LinAlgWarning)
            x = sla.solve(a_j, b, assume_a="her", check_finite=False)
    except (np.linalg.LinAlgError, sla.LinAlgError, sla.LinAlgWarning) as exc:
        raise NumericalFailure(f"regularised system is singular: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise NumericalFailure("regularised system produced non-finite values")
    return x, True


def _power(p):
    return float(np.real(np.vdot(p, p)))


def scale_factor(p_bar, P_t, tau=1.0):
    """Gain factor ``f`` that puts ``f * tau * p_bar`` on the power budget."""
    pw = _power(p_bar)
    if not pw > 0:
        raise ValueError("p_bar is identically zero")
    return float(np.sqrt(P_t / pw) / tau)


def update_lambda(p, f, noise_trace, theta, tau, P_t):
    """Loading term implied by the gain stationarity condition.

    ``noise_trace`` is ``tr(R_n)``; ``theta`` an :class:`ErrorCovariance` or a
    plain matrix.
    """
    if not (P_t > 0 and f > 0):
        raise ValueError("P_t and f must be positive")
    th = getattr(theta, "theta", theta)
    p = getattr(p, "p", p)
    err_power = float(np.real(np.trace(p.conj().T @ th @ p)))
    return noise_trace / (f ** 2 * P_t) - err_power / (tau ** 2 * P_t)


def stationarity_residual(g_hat, theta, p, f, lam, tau):
    """Relative residual of ``(G^*G^T + (1+f^2)Theta + lam f^2 tau^2 I) P = f tau G^*``."""
    th = getattr(theta, "theta", theta)
    n = g_hat.shape[0]
    ft = f * tau
    m = _gram(g_hat) + (1.0 + f ** 2) * th + lam * ft ** 2 * np.eye(n)
    rhs = ft * g_hat.conj()
    return float(np.linalg.norm(m @ p - rhs) / np.linalg.norm(rhs))


def _check_power(P_t):
    if not P_t > 0:
        raise ValueError(f"P_t must be positive, got {P_t!r}")


def mmse_conventional(g_hat, P_t, sigma_n2):
    """Regularised (MMSE) precoder normalised to total power ``P_t``."""
    _check_power(P_t)
    g_hat = np.asarray(g_hat)
    n, k = g_hat.shape
    gram = _gram(g_hat)
    a = gram + (k * sigma_n2 / P_t) * np.eye(n)
    p_bar, jit = _solve_hermitian(a, g_hat.conj(), 1e-10 * np.real(np.trace(gram)) / n)
    f = scale_factor(p_bar, P_t)
    p = f * p_bar
    lam = k * sigma_n2 / (f ** 2 * P_t)
    return PrecoderMatrix(p, f, lam, _power(p), scheme="MMSE", jittered=jit)


def _loading(th, p_bar, f, tau, noise_trace, P_t):
    """``(1 + f^2) Theta + lam f^2 tau^2 I`` with ``lam`` from :func:`update_lambda`.

    Substituting ``lam`` gives ``Theta + f^2 (Theta - rho I) + tau^2 tr(R_n) / P_t I``
    with ``rho = tr(P^H Theta P) / P_t``.  For diagonal ``Theta`` the bracket is
    formed as a weighted sum of differences of the diagonal, so that it is exactly
    zero for ``Theta = theta I`` however large ``f`` gets.
    """
    n = th.shape[0]
    w = np.sum(np.abs(p_bar) ** 2, axis=1)
    w = w / w.sum()
    if np.count_nonzero(th - np.diag(np.diag(th))) == 0:
        d = np.real(np.diag(th))
        spread = np.diag((d[:, None] - d[None, :]) @ w)
    else:
        rho = float(np.real(np.trace(p_bar.conj().T @ th @ p_bar)) / np.vdot(p_bar, p_bar).real)
        spread = th - rho * np.eye(n)
    return th + f ** 2 * spread + (tau ** 2 * noise_trace / P_t) * np.eye(n)


def _alternate(g, theta, P_t, noise_trace, tau, settings, scheme):
    """Alternating updates of (P, f, lambda) for one channel matrix ``g``."""
    _check_power(P_t)
    n, k = g.shape
    th = theta.theta
    gram = _gram(g)
    rhs = g.conj()
    eye = np.eye(n)
    jitter_scale = settings.jitter * max(np.real(np.trace(gram)), np.finfo(float).tiny) / n

    # initial point: conventional MMSE with the same per-user noise level
    p_bar, jittered = _solve_hermitian(gram + (noise_trace / P_t) * eye, rhs, jitter_scale)
    f = scale_factor(p_bar, P_t, tau)
    p = f * tau * p_bar
    lam = update_lambda(p, f, noise_trace, th, tau, P_t)
    f_trace, lam_trace, res_trace = [f], [lam], []

    it = 0
    for it in range(1, settings.max_iterations + 1):
        a = gram + _loading(th, p_bar, f, tau, noise_trace, P_t)
        p_bar, jit = _solve_hermitian(a, rhs, jitter_scale)
        jittered |= jit
        if not (np.any(p_bar) and np.all(np.isfinite(p_bar))):
            raise NumericalFailure(f"{scheme}: alternating updates diverged")
        f = scale_factor(p_bar, P_t, tau)
        p_new = f * tau * p_bar
        lam = update_lambda(p_new, f, noise_trace, th, tau, P_t)
        change = np.linalg.norm(p_new - p) / np.linalg.norm(p)
        p = p_new
        f_trace.append(f)
        lam_trace.append(lam)
        res_trace.append(float(change))
        if change < settings.convergence_tol:
            break

    residual = stationarity_residual(g, th, p, f, lam, tau)
    if jittered:
        log.debug("%s: diagonal jitter applied", scheme)
    return PrecoderMatrix(p, f, lam, _power(p), iterations_run=it, residual=residual,
                          scheme=scheme, f_trace=f_trace, lam_trace=lam_trace,
                          residual_trace=res_trace, jittered=jittered)


def robust_mmse(g_hat, theta, P_t, sigma_n2, tau, settings=None):
    """Network-wide robust MMSE precoder (MMSE-RB)."""
    settings = settings or RobustSolveSettings()
    g_hat = np.asarray(g_hat)
    return _alternate(g_hat, theta, P_t, g_hat.shape[1] * sigma_n2, tau, settings, "MMSE-RB")


def robust_mmse_sparse(g_bar, theta, P_t, sigma_n2, tau, settings=None):
    """Robust MMSE on the AP-selected sparse channel (MMSE-RB-SP)."""
    settings = settings or RobustSolveSettings()
    g = np.asarray(getattr(g_bar, "g_bar", g_bar))
    return _alternate(g, theta, P_t, g.shape[1] * sigma_n2, tau, settings, "MMSE-RB-SP")


def robust_mmse_clustered(g_hat, plan, theta, P_t, sigma_n2, tau, settings=None):
    """Cluster-based reduced-dimension robust MMSE precoder (MMSE-RB-RD).

    Column ``k`` comes from a robust problem over the users of cluster ``k``
    with power budget ``|cluster| * P_t / K``.  The assembled matrix is
    rescaled to the total budget ``P_t``.
    """
    settings = settings or RobustSolveSettings()
    g_hat = np.asarray(g_hat)
    n, k_users = g_hat.shape
    p = np.empty((n, k_users), dtype=complex)
    per_cluster = []
    for k, members in enumerate(plan.user_sets):
        g_k = (plan.selection_matrices[k] @ g_hat.T).T  # N x |U_k|
        size = len(members)
        budget = size * P_t / k_users
        sol = _alternate(g_k, theta.restrict(members), budget, size * sigma_n2, tau,
                         settings, f"MMSE-RB-RD[{k}]")
        p[:, k] = sol.p[:, plan.index_map[k]]
        per_cluster.append(sol)
    pw = _power(p)
    if not pw > 0:
        raise NumericalFailure("assembled clustered precoder is identically zero")
    gain = np.sqrt(P_t / pw)
    p *= gain
    out = PrecoderMatrix(p, float(np.mean([c.f for c in per_cluster])),
                         float(np.mean([c.lam for c in per_cluster])), _power(p),
                         iterations_run=max(c.iterations_run for c in per_cluster),
                         residual=max(c.residual for c in per_cluster),
                         scheme="MMSE-RB-RD", jittered=any(c.jittered for c in per_cluster),
                         rescale_gain=float(gain), clusters=per_cluster)
    return out


def mse_objective(g_hat, theta, p, f, sigma_n2, tau):
    """Receive MSE plus CSIT-error interference power for unit-power symbols."""
    th = getattr(theta, "theta", theta)
    k = g_hat.shape[1]
    ft = f * tau
    cross = 2.0 * np.real(np.trace(g_hat.T @ p))
    quad = np.real(np.trace(p.conj().T @ (_gram(g_hat) + th) @ p))
    err = np.real(np.trace(th @ p @ p.conj().T))
    return float(k - cross / ft + quad / ft ** 2 + k * sigma_n2 / f ** 2 + err / tau ** 2)


def optimal_gain(g_hat, theta, p, sigma_n2, tau):
    """Gain ``f`` minimising :func:`mse_objective` for a fixed precoder.

    The objective is quadratic in ``1/f``; returns ``inf`` when the precoder
    is anti-aligned with the channel and the infimum sits at ``f -> inf``.
    """
    th = getattr(theta, "theta", theta)
    k = g_hat.shape[1]
    b = np.real(np.trace(g_hat.T @ p)) / tau
    a = np.real(np.trace(p.conj().T @ (_gram(g_hat) + th) @ p)) / tau ** 2 + k * sigma_n2
    if b <= 0:
        return np.inf
    return float(a / b)
