"""Monte Carlo experiments: trials, sweeps and persisted results.

A trial is one channel estimate of one geometry.  All schemes see the same
channel estimate and the same error redraws, and every random stream is keyed
by ``(seed, purpose, geometry, draw)`` only, so that sweep points share their
draws as well and results do not depend on the worker count.
"""

import csv
import io
import json
import logging
import math
import os
import platform
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import channel as ch
from . import metrics, precoders, selection
from .precoders import NumericalFailure
from .rng import substream

log = logging.getLogger(__name__)

CSV_FIELDS = ("axis_name", "axis_value", "scheme", "esr_bits_per_hz", "ci95_halfwidth",
              "n_samples", "n_dropped")
MAX_FAILED_TRIALS = 0.01
MAX_DROPPED_SAMPLES = 0.001


class RunFailure(RuntimeError):
    """Too many failed trials or dropped samples for the results to stand."""


@dataclass
class Scenario:
    """Per-geometry quantities shared by every trial of that geometry."""

    geometry: ch.Geometry
    zeta: np.ndarray
    sigma_n2: float
    P_t: float
    scale: float
    ap_selection: selection.APSelection
    plan: selection.ClusterPlan


@dataclass
class PointResult:
    reports: dict
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {"reports": {s: r.to_dict() for s, r in self.reports.items()},
                "diagnostics": self.diagnostics}


def build_scenario(cfg, geometry_index, snr_db):
    """Place the network, draw large-scale fading and calibrate ``P_t``.

    With ``normalize_channels`` and an ``identity_scaled`` error covariance,
    the large-scale coefficients and the noise power are divided by
    ``sum(zeta) / N`` and powers are measured in units of the noise power.
    Every SINR, SNR and the precoder directions are unchanged by this; it fixes
    the units of ``sigma_e**2 * I`` so that it has the trace of the true error
    covariance.  The exact-diagonal covariance
    already carries channel units and is used in physical units.
    """
    p = cfg.propagation
    geom = ch.place_network(cfg.N, cfg.K, cfg.area_side, substream(cfg.seed, "geometry", geometry_index))
    zeta = ch.large_scale_coefficients(geom, p, substream(cfg.seed, "shadowing", geometry_index))
    sigma_n2 = ch.noise_variance(p)
    normalize = cfg.normalize_channels and cfg.theta_mode == precoders.IDENTITY_SCALED
    scale = float(zeta.sum() / cfg.N) if normalize else 1.0
    zeta = zeta / scale
    # powers in units of the noise power keep f moderate
    sigma_n2 = 1.0 if normalize else sigma_n2
    P_t = ch.power_for_snr(zeta, float(ch.db_to_linear(snr_db)), sigma_n2)
    sel = selection.select_aps(zeta, cfg.L)
    plan = selection.build_clusters(sel, cfg.N_a)
    return Scenario(geom, zeta, sigma_n2, P_t, scale, sel, plan)


def compute_precoders(cfg, scen, g_hat, sigma_e):
    """Precoders of every configured scheme for one channel estimate.

    Returns ``(precoders, failures)``: scheme -> PrecoderMatrix and
    scheme -> error message.
    """
    tau = math.sqrt(1.0 + sigma_e ** 2)
    theta = precoders.error_covariance(scen.zeta, sigma_e, cfg.theta_mode)
    out, failures = {}, {}
    for scheme in cfg.schemes:
        try:
            if scheme == "MMSE":
                out[scheme] = precoders.mmse_conventional(g_hat, scen.P_t, scen.sigma_n2)
            elif scheme == "MMSE-RB":
                out[scheme] = precoders.robust_mmse(g_hat, theta, scen.P_t, scen.sigma_n2, tau,
                                                    cfg.solver)
            elif scheme == "MMSE-RB-SP":
                g_bar = selection.sparse_channel(g_hat, scen.ap_selection)
                out[scheme] = precoders.robust_mmse_sparse(g_bar, theta, scen.P_t, scen.sigma_n2,
                                                           tau, cfg.solver)
            elif scheme == "MMSE-RB-RD":
                # AP selection applies to the cluster-based precoder as well
                g_bar = selection.sparse_channel(g_hat, scen.ap_selection).g_bar
                out[scheme] = precoders.robust_mmse_clustered(g_bar, scen.plan, theta, scen.P_t,
                                                              scen.sigma_n2, tau, cfg.solver)
        except (NumericalFailure, ValueError, np.linalg.LinAlgError) as exc:
            failures[scheme] = str(exc)
    return out, failures


def _user_rates(cfg, g_hat, g_err, p, tau, sigma_n2):
    """Per-user average rate over error draws and the number of dropped samples."""
    signal, d_g, interf, noise = metrics.sinr_terms(g_hat, g_err, p, tau, sigma_n2)
    if cfg.sinr_model == "received":
        gamma = (signal + d_g) / (interf + noise)
        valid = np.isfinite(gamma) & (gamma >= 0)
    else:
        den = d_g + interf + noise
        valid = den > 0
        gamma = np.where(valid, signal / np.where(valid, den, 1.0), 0.0)
    rates = np.where(valid, metrics.instantaneous_rate(np.where(valid, gamma, 0.0)), 0.0)
    counts = valid.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        avg = rates.sum(axis=0) / counts
    return avg, int((~valid).sum())


def run_trial(cfg, scen, geometry_index, draw_index, sigma_e):
    """One channel estimate, all schemes, ``n_error_draws`` error redraws."""
    cset = ch.draw_channel_triple(scen.zeta, sigma_e,
                                  substream(cfg.seed, "channel", geometry_index, draw_index))
    pcs, failures = compute_precoders(cfg, scen, cset.g_hat, sigma_e)
    rng = substream(cfg.seed, "error", geometry_index, draw_index)
    errs = np.stack([ch.redraw_error(cset.g_hat, scen.zeta, sigma_e, rng)[0]
                     for _ in range(cfg.n_error_draws)])
    rates, dropped, diags = {}, {}, {}
    for scheme, pc in pcs.items():
        avg, n_drop = _user_rates(cfg, cset.g_hat, errs, pc.p, cset.tau, scen.sigma_n2)
        rates[scheme] = avg
        dropped[scheme] = n_drop
        diags[scheme] = (pc.iterations_run, pc.residual, pc.jittered)
    return {"rates": rates, "dropped": dropped, "failures": failures, "diag": diags}


def _trial_job(args):
    cfg, scen, g, c, sigma_e = args
    return run_trial(cfg, scen, g, c, sigma_e)


def _map(jobs, workers):
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map preserves submission order, so aggregation is order-fixed
            return list(pool.map(_trial_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [_trial_job(j) for j in jobs]


def run_point(cfg, workers=1):
    """ESR of every scheme at one (sigma_e, snr_db) point."""
    if cfg.sweep_axis is not None:
        raise ValueError("run_point needs scalar sigma_e and snr_db")
    sigma_e, snr_db = float(cfg.sigma_e), float(cfg.snr_db)
    scenarios = [build_scenario(cfg, g, snr_db) for g in range(cfg.n_geometries)]
    jobs = [(cfg, scenarios[g], g, c, sigma_e)
            for g in range(cfg.n_geometries) for c in range(cfg.n_channel_draws)]
    results = _map(jobs, workers)

    n_trials = len(jobs)
    reports, diag = {}, {}
    for scheme in cfg.schemes:
        rows = [r["rates"][scheme] for r in results if scheme in r["rates"]]
        n_failed = n_trials - len(rows)
        n_dropped = sum(r["dropped"].get(scheme, 0) for r in results)
        n_samples = len(rows) * cfg.n_error_draws * cfg.K
        if n_failed > MAX_FAILED_TRIALS * n_trials:
            msgs = sorted({r["failures"][scheme] for r in results if scheme in r["failures"]})
            raise RunFailure(f"{scheme}: {n_failed}/{n_trials} trials failed: {msgs[:3]}")
        if n_samples and n_dropped > MAX_DROPPED_SAMPLES * n_samples:
            raise RunFailure(f"{scheme}: {n_dropped}/{n_samples} SINR samples had a "
                             f"nonpositive denominator")
        rows = np.array(rows)
        if np.isnan(rows).any():
            raise RunFailure(f"{scheme}: a user lost every error-draw sample")
        reports[scheme] = metrics.ergodic_sum_rate(rows, cfg.n_error_draws, n_dropped)
        its = [r["diag"][scheme][0] for r in results if scheme in r["diag"]]
        res = [r["diag"][scheme][1] for r in results if scheme in r["diag"]]
        diag[scheme] = {
            "failed_trials": n_failed,
            "dropped_samples": n_dropped,
            "max_iterations_run": int(max(its)),
            "max_stationarity_residual": float(max(res)),
            "jittered_trials": int(sum(r["diag"][scheme][2] for r in results if scheme in r["diag"])),
        }
    diag["scenarios"] = [{
        "P_t": s.P_t, "sigma_n2": s.sigma_n2, "zeta_scale": s.scale,
        "mean_cluster_size": s.plan.to_dict()["mean_cluster_size"],
    } for s in scenarios]
    return PointResult(reports, diag)


@dataclass
class SweepTable:
    axis_name: str
    rows: list
    seed: int
    config_hash: str

    def series(self, scheme):
        """Rows of one scheme as ``(axis_value, esr, ci)`` sorted by axis."""
        pts = [(r["axis_value"], r["esr_bits_per_hz"], r["ci95_halfwidth"])
               for r in self.rows if r["scheme"] == scheme]
        return sorted(pts)

    @property
    def schemes(self):
        seen = []
        for r in self.rows:
            if r["scheme"] not in seen:
                seen.append(r["scheme"])
        return seen

    def esr(self, scheme, axis_value):
        for r in self.rows:
            if r["scheme"] == scheme and r["axis_value"] == axis_value:
                return r["esr_bits_per_hz"], r["ci95_halfwidth"]
        raise KeyError((scheme, axis_value))


def _rows_for(axis_name, value, point, cfg):
    rows = []
    for scheme, rep in point.reports.items():
        rows.append({
            "axis_name": axis_name,
            "axis_value": float(value),
            "scheme": scheme,
            "esr_bits_per_hz": rep.esr,
            "ci95_halfwidth": rep.ci_halfwidth,
            "n_samples": rep.n_channel_draws * rep.n_error_draws,
            "n_dropped": rep.n_dropped,
        })
    return rows


def run_sweep(cfg, workers=1):
    """Run every point of the swept axis; returns ``(SweepTable, manifest)``."""
    t0 = time.perf_counter()
    axis = cfg.sweep_axis or "snr_db"
    values = getattr(cfg, axis)
    values = sorted(values) if isinstance(values, (list, tuple)) else [values]
    rows, points = [], []
    for v in values:
        point_cfg = cfg.at(**{axis: float(v)})
        log.info("point %s=%g", axis, v)
        res = run_point(point_cfg, workers=workers)
        rows.extend(_rows_for(axis, v, res, cfg))
        points.append({"axis_value": float(v), **res.to_dict()})
    table = SweepTable(axis, rows, cfg.seed, cfg.digest())
    manifest = make_manifest(cfg, points, time.perf_counter() - t0)
    return table, manifest


def make_manifest(cfg, points, wall_clock):
    return {
        "library": "cfrobust",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "seed": cfg.seed,
        "config_hash": cfg.digest(),
        "config": cfg.to_dict(),
        "model_notes": {
            "P_t_calibration": "per geometry from expected channel trace sum(zeta)",
            "clustered_rescale": "assembled MMSE-RB-RD precoder rescaled to total power P_t",
            "channel_normalization": ("zeta divided by sum(zeta)/N, unit noise power"
                                      if cfg.normalize_channels
                                      and cfg.theta_mode == precoders.IDENTITY_SCALED
                                      else "none"),
            "sinr_model": cfg.sinr_model,
        },
        "wall_clock_s": wall_clock,
        "points": points,
    }


# --- persistence -----------------------------------------------------------

def table_to_csv(table):
    buf = io.StringIO()
    buf.write(f"# seed={table.seed} config_hash={table.config_hash}\n")
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in table.rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise FileNotFoundError(f"output directory does not exist: {directory}")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def persist(table, manifest, path):
    """Write ``<path>.csv`` and ``<path>.json``; returns both paths."""
    csv_path, json_path = f"{path}.csv", f"{path}.json"
    _atomic_write(csv_path, table_to_csv(table))
    _atomic_write(json_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def read_table(csv_path):
    """Load a table written by :func:`persist`."""
    with open(csv_path, newline="") as fh:
        first = fh.readline()
        meta = dict(kv.split("=", 1) for kv in first.lstrip("# ").split())
        rows = []
        for r in csv.DictReader(fh):
            rows.append({
                "axis_name": r["axis_name"],
                "axis_value": float(r["axis_value"]),
                "scheme": r["scheme"],
                "esr_bits_per_hz": float(r["esr_bits_per_hz"]),
                "ci95_halfwidth": float(r["ci95_halfwidth"]),
                "n_samples": int(r["n_samples"]),
                "n_dropped": int(r["n_dropped"]),
            })
    axis = rows[0]["axis_name"] if rows else ""
    return SweepTable(axis, rows, int(meta["seed"]), meta["config_hash"])
