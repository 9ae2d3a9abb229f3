"""Command-line interface: ``mgate {simulate,perturbative,sweep,validate}``.

Exit codes: 0 ok, 1 validation failure, 2 config error, 3 integration
failure, 4 singular parameters.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import csvio, dynamics, metrics, model, oracle, svg
from .config import RunConfig, load_config
from .errors import ConfigError, IntegrationError, InvalidParamsError, SingularParametersError, UndefinedPhaseError

log = logging.getLogger("mgate")

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_INTEGRATION, EXIT_SINGULAR = 0, 1, 2, 3, 4


def _setup_logging():
    level = os.environ.get("MGATE_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if level not in levels:
        log.error("MGATE_LOG=%s not understood; using 'error'", level)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_svgs(out: Path, series, gamma_ref):
    gt = [m.t * gamma_ref for m in series]
    (out / "cps.svg").write_text(svg.line_plot(
        [("CPS / pi", gt, [m.cps_unwrapped / math.pi for m in series])],
        xlabel="gamma t", ylabel="conditional phase shift / pi", title="Conditional phase shift"))
    (out / "fidelity.svg").write_text(svg.line_plot(
        [("deterministic", gt, [m.fid_det for m in series]),
         ("conditional", gt, [m.fid_cond for m in series]),
         ("success probability", gt, [m.p_success for m in series])],
        xlabel="gamma t", ylabel="fidelity", title="Gate fidelity"))


def cmd_simulate(cfg: RunConfig, args) -> int:
    out = _out_dir(args)
    csv_path = out / cfg.output["csv"]
    try:
        series = metrics.compute_metrics(cfg.params, cfg.times, cfg.solver, cfg.mc)
    except IntegrationError as exc:
        partial = exc.partial or []
        csvio.write_rows(csv_path, metrics.CSV_HEADER, [metrics.metrics_row(m) for m in partial])
        print(f"error: integration failed at t={exc.last_time:.6g} us: {exc}; "
              f"{len(partial)} rows written to {csv_path}", file=sys.stderr)
        return EXIT_INTEGRATION
    csvio.write_rows(csv_path, metrics.CSV_HEADER, [metrics.metrics_row(m) for m in series])
    log.info("wrote %d rows to %s", len(series), csv_path)
    if cfg.output["trajectory"]:
        psi = model.reference_state()
        traj = dynamics.sample_trajectory(cfg.params, np.outer(psi, psi.conj()), cfg.times, cfg.solver)
        csvio.write_trajectory(out / "trajectory.csv", traj, cfg.output["trajectory_indices"])
    if args.svg or cfg.output["svg"]:
        _write_svgs(out, series, cfg.gamma_ref)
    op = metrics.operating_point(series)
    if op is not None:
        print(f"CPS within 0.02 pi of pi: best fid_det={op.fid_det:.4f} at t={op.t:.6g} us "
              f"(gamma t={op.t * cfg.gamma_ref:.4f}), fid_cond={op.fid_cond:.4f}, p_success={op.p_success:.4f}")
    return EXIT_OK


def cmd_perturbative(cfg: RunConfig, args) -> int:
    t = float(cfg.times[-1])
    phi = metrics.perturbative_cps(cfg.params, t)
    p = cfg.params
    print(f"phi={phi:.10e} rad t={t:.6g} us delta1={p.delta1:.6g} delta3={p.delta3:.6g} "
          f"eps12={p.eps12:.6g} eps34={p.eps34:.6g} omega1={p.omega1:.6g} omega4={p.omega4:.6g} "
          f"G_p={p.G_p:.6g} G_t={p.G_t:.6g} (rad/us)")
    return EXIT_OK


def _sweep_point(job):
    """Evaluate one grid point; returns ``(flag, t, values)``."""
    cfg, value = job
    spec = cfg.sweep
    try:
        params = cfg.params_with(**{p: value for p in spec.parameters})
        if spec.record_at == "cps-crossing-pi":
            series = metrics.compute_metrics(params, cfg.times, cfg.solver, cfg.mc)
            crossings = metrics.cps_pi_crossings(series)
            if not crossings:
                return "no-crossing", math.nan, [math.nan] * len(spec.metrics)
            k, t_cross = crossings[0]
            # nearer of the two samples bracketing the crossing
            if abs(series[k - 1].t - t_cross) < abs(series[k].t - t_cross):
                k -= 1
            m = series[k]
        else:
            n = max(2, int(round(len(cfg.times) * min(1.0, spec.record_at / cfg.times[-1]))))
            m = metrics.compute_metrics(params, np.linspace(0.0, spec.record_at, n), cfg.solver, cfg.mc)[-1]
    except (IntegrationError, UndefinedPhaseError, ConfigError, InvalidParamsError) as exc:
        return f"failed: {type(exc).__name__}", math.nan, [math.nan] * len(spec.metrics)
    row = dict(zip(metrics.CSV_HEADER, metrics.metrics_row(m)))
    return "ok", m.t, [row[name] for name in spec.metrics]


def cmd_sweep(cfg: RunConfig, args) -> int:
    if cfg.sweep is None:
        raise ConfigError("sweep needs a [sweep] section")
    spec = cfg.sweep
    jobs = [(cfg, float(v)) for v in spec.values]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    rows = [[v, flag, t, *vals] for (_, v), (flag, t, vals) in zip(jobs, results)]
    out = _out_dir(args)
    path = out / "sweep.csv"
    csvio.write_rows(path, ["param_value", "flag", "t", *spec.metrics], rows)
    n_fail = sum(r[1].startswith("failed") for r in rows)
    log.info("sweep over %s: %d points, %d failed", spec.name, len(rows), n_fail)
    if n_fail:
        print(f"warning: {n_fail} of {len(rows)} sweep points failed", file=sys.stderr)
    return EXIT_INTEGRATION if n_fail == len(rows) else EXIT_OK


def _corrupted_hamiltonian(params):
    H = model.build_hamiltonian(params)
    H[0, 1] += 1e-3
    return H


def cmd_validate(cfg: RunConfig | None, args) -> int:
    params_list = oracle.validation_parameter_sets()
    if cfg is not None:
        params_list = [("config", cfg.params)] + params_list
    builder = _corrupted_hamiltonian if args.fault_inject == "hamiltonian" else None
    results = oracle.run_validation(params_list, hamiltonian_builder=builder)
    print(oracle.format_report(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file path or bundled config name")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    common.add_argument("--svg", action="store_true", help="also write SVG plots")
    common.add_argument("--seed", type=int, default=None, help="override the [mc] seed")
    common.add_argument("--fault-inject", choices=["hamiltonian"], default=None, help=argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="mgate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="metrics time series to CSV")
    sub.add_parser("perturbative", parents=[common], help="closed-form dispersive CPS")
    sub.add_parser("sweep", parents=[common], help="metrics over a parameter grid")
    sub.add_parser("validate", parents=[common], help="run the oracle check suite")
    return parser


COMMANDS = {"simulate": cmd_simulate, "perturbative": cmd_perturbative, "sweep": cmd_sweep,
            "validate": cmd_validate}


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.config is None:
            if args.command != "validate":
                raise ConfigError(f"{args.command} needs --config")
            cfg = None
        else:
            cfg = load_config(args.config, seed=args.seed)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularParametersError as exc:
        print(f"error: singular parameters: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (IntegrationError, UndefinedPhaseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION


if __name__ == "__main__":
    sys.exit(main())
