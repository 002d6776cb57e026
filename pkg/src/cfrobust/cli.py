"""Command-line front end.

    cfrobust run         one (sigma_e, SNR) point
    cfrobust sweep-snr   sum-rate versus SNR
    cfrobust sweep-sigma sum-rate versus CSIT quality
    cfrobust check       built-in invariant checks

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

import argparse
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from . import channel as ch
from . import precoders, selection
from .config import (ConfigError, apply_settings, desk_config, dump_config, load_config,
                     paper_config, parse_overrides, recipe_path)
from .harness import RunFailure, build_scenario, persist, run_sweep
from .precoders import NumericalFailure
from .rng import substream

EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 2, 3, 4
SNR_GRID = (0.0, 5.0, 10.0, 15.0, 20.0)
SIGMA_GRID = (0.0, 0.2, 0.4, 0.6)

log = logging.getLogger("cfrobust")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="cfrobust", description=__doc__.splitlines()[0] if __doc__ else None,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"cfrobust {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (("run", "evaluate one (sigma_e, SNR) point"),
                        ("sweep-snr", "sum-rate versus SNR"),
                        ("sweep-sigma", "sum-rate versus sigma_e"),
                        ("check", "run the built-in invariant checks")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="INI recipe (path, or a shipped name: fig1, fig2)")
        p.add_argument("--seed", type=int)
        p.add_argument("--output-dir", default="results")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--scale", choices=("desk", "paper"), default="desk")
        p.add_argument("--no-plot", action="store_true", help="skip figure rendering")
        p.add_argument("-v", "--verbose", action="store_true")
        p.add_argument("overrides", nargs="*", metavar="SECTION.KEY=VALUE")
    return parser


def resolve_config(args):
    base = paper_config() if args.scale == "paper" else desk_config()
    cfg = base
    if args.config:
        path = args.config
        if not os.path.exists(path) and os.path.exists(recipe_path(path)):
            path = recipe_path(path)
        cfg = load_config(path, base=base)
    cfg = apply_settings(cfg, parse_overrides(args.overrides))
    if args.seed is not None:
        cfg = cfg.at(seed=args.seed)
    return cfg


def emit_plot_data(table, path):
    """One whitespace-delimited ``axis esr ci`` file per scheme.

    ``path`` is a prefix; files are named ``<path>_<scheme>.dat``.
    """
    if not table.rows:
        raise ValueError("empty sweep table")
    files = []
    for scheme in table.schemes:
        fname = f"{path}_{scheme}.dat"
        lines = [f"# scheme={scheme} axis={table.axis_name} seed={table.seed} "
                 f"config_hash={table.config_hash}",
                 f"# {table.axis_name} esr_bits_per_hz ci95_halfwidth"]
        lines += [f"{x!r} {y!r} {c!r}" for x, y, c in table.series(scheme)]
        with open(fname, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        files.append(fname)
    return files


def _sweep_cfg(cfg, command):
    if command == "run":
        if cfg.sweep_axis is not None:
            raise ConfigError("`run` needs scalar sigma_e and snr_db; use a sweep command")
        return cfg, "point"
    axis, grid, other = (("snr_db", SNR_GRID, "sigma_e") if command == "sweep-snr"
                         else ("sigma_e", SIGMA_GRID, "snr_db"))
    if isinstance(getattr(cfg, other), (list, tuple)):
        raise ConfigError(f"`{command}` sweeps {axis}; {other} must be a single value")
    if not isinstance(getattr(cfg, axis), (list, tuple)):
        cfg = cfg.at(**{axis: grid})
    return cfg, command.replace("-", "_")


def _do_experiment(args, cfg):
    cfg, name = _sweep_cfg(cfg, args.command)
    print("# effective configuration", file=sys.stderr)
    print(dump_config(cfg), file=sys.stderr)
    table, manifest = run_sweep(cfg, workers=args.workers)
    manifest["workers"] = args.workers
    manifest["scale"] = args.scale
    if not os.path.isdir(args.output_dir):
        os.makedirs(args.output_dir, exist_ok=True)
    prefix = os.path.join(args.output_dir, name)
    csv_path, json_path = persist(table, manifest, prefix)
    outputs = [csv_path, json_path]
    if args.command != "run":
        outputs += emit_plot_data(table, prefix)
        if not args.no_plot:
            from .plotting import plot_sweep
            title = f"N={cfg.N}, K={cfg.K}, L={cfg.L}, seed={cfg.seed}"
            outputs.append(plot_sweep(table, prefix + ".png", title))
    for r in table.rows:
        print(f"{r['axis_name']}={r['axis_value']:g}\t{r['scheme']:<11}\t"
              f"ESR={r['esr_bits_per_hz']:.3f} +/- {r['ci95_halfwidth']:.3f}")
    for path in outputs:
        print(f"wrote {path}")
    return 0


def run_checks(cfg, n_instances=5):
    """Invariant checks on random instances of ``cfg``; returns ``[(name, ok, value)]``."""
    results = []
    scen = build_scenario(cfg, 0, 15.0 if isinstance(cfg.snr_db, (list, tuple)) else cfg.snr_db)
    settings = precoders.RobustSolveSettings(max_iterations=20,
                                             convergence_tol=cfg.solver.convergence_tol)
    red, power, resid, lam = 0.0, 0.0, 0.0, 0.0
    for i in range(n_instances):
        rng = substream(cfg.seed, "check", i)
        perfect = ch.draw_channel_triple(scen.zeta, 0.0, rng)
        th0 = precoders.error_covariance(scen.zeta, 0.0, cfg.theta_mode)
        conv = precoders.mmse_conventional(perfect.g_hat, scen.P_t, scen.sigma_n2)
        rb0 = precoders.robust_mmse(perfect.g_hat, th0, scen.P_t, scen.sigma_n2, 1.0, settings)
        red = max(red, float(np.max(np.abs(rb0.p - conv.p))) / float(np.max(np.abs(conv.p))))

        se = math.sqrt(0.1)
        cs = ch.draw_channel_triple(scen.zeta, se, rng)
        th = precoders.error_covariance(scen.zeta, se, cfg.theta_mode)
        g_bar = selection.sparse_channel(cs.g_hat, scen.ap_selection)
        pcs = [
            conv,
            precoders.robust_mmse(cs.g_hat, th, scen.P_t, scen.sigma_n2, cs.tau, settings),
            precoders.robust_mmse_sparse(g_bar, th, scen.P_t, scen.sigma_n2, cs.tau, settings),
            precoders.robust_mmse_clustered(g_bar.g_bar, scen.plan, th, scen.P_t, scen.sigma_n2,
                                            cs.tau, settings),
        ]
        for pc in pcs:
            power = max(power, abs(np.vdot(pc.p, pc.p).real - scen.P_t) / scen.P_t)
        rb = pcs[1]
        resid = max(resid, precoders.stationarity_residual(cs.g_hat, th, rb.p, rb.f, rb.lam, cs.tau))
        lam_re = precoders.update_lambda(rb.p, rb.f, cfg.K * scen.sigma_n2, th, cs.tau, scen.P_t)
        lam = max(lam, abs(lam_re - rb.lam) / abs(rb.lam))
    results.append(("sigma_e=0 reduction to conventional MMSE (rel. max-abs)", red < 1e-8, red))
    results.append(("power constraint, all schemes (rel.)", power < 1e-8, power))
    results.append(("stationarity residual of MMSE-RB", resid < 1e-6, resid))
    results.append(("lambda consistency (rel.)", lam < 1e-8, lam))
    return results


def _do_check(args, cfg):
    results = run_checks(cfg)
    for name, ok, value in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {value:.3e}")
    return 0 if all(ok for _, ok, _ in results) else EXIT_NUMERICAL


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        if args.command == "check":
            return _do_check(args, cfg)
        return _do_experiment(args, cfg)
    except ConfigError as exc:
        print(f"cfrobust: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, RunFailure, FloatingPointError) as exc:
        print(f"cfrobust: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"cfrobust: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
