"""``cacwb`` command-line front end.

Exit codes: 0 success, 2 invalid configuration, 3 solver failure,
4 handover fixed point did not converge.
"""
from __future__ import annotations

import argparse
import io
import sys
from typing import Optional

import numpy as np

from . import __version__
from .config import FORMATS, MODES, ExperimentConfig, load_config
from .des import SimConfig, simulate, write_trace_csv
from .errors import CacError, NonConvergenceError, ValidationError, DegenerateInputError
from .io import dumps_json, rows_to_csv
from .markov import state_blocking_terms
from .optimizer import ResultCache, SearchSpec, search_acceptance_factors
from .policies import UFB, build_profile, evaluate_policy, policy_to_dict
from .traffic import estimate_handover_rate

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_NONCONVERGED = 0, 2, 3, 4


def _columns(cfg: ExperimentConfig) -> list[str]:
    m = cfg.policy.num_classes
    cols = [cfg.axis] + (["lambda_h"] if cfg.two_class else [])
    cols += [f"PB_{k}" for k in range(1, m + 1)] + ["P_D", "utilization", "overall_blocking"]
    if isinstance(cfg.policy, UFB):
        cols += ["PB_2_fractional_band", "PB_2_guard_band"]
    return cols


def _rates_at(cfg: ExperimentConfig, x: Optional[float]):
    """Per-class rates at axis value ``x`` plus the fixed-point report, if any."""
    if not cfg.two_class:
        return cfg.multiclass_rates(x), None
    if cfg.handover_mode == "fixed_ratio":
        return (cfg.ratio * x, x), None
    fp = cfg.fixed_point
    rep = estimate_handover_rate(cfg.policy, x, cfg.P_h, cfg.mu, tolerance=fp.tolerance,
                                 max_iterations=fp.max_iterations, damping=fp.damping)
    return (rep.lambda_h, x), rep


def _point(cfg: ExperimentConfig, x: Optional[float]):
    """Output row, rates and metrics at one axis value."""
    rates, _ = _rates_at(cfg, x)
    ev = evaluate_policy(cfg.policy, rates, cfg.mu)
    met = ev.metrics
    row = {cfg.axis: x if x is not None else float(sum(rates) / cfg.mu)}
    if cfg.two_class:
        row["lambda_h"] = rates[0]
    for k, b in enumerate(met.blocking, start=1):
        row[f"PB_{k}"] = b
    row.update(P_D=met.dropping, utilization=met.utilization,
               overall_blocking=met.overall_blocking)
    if isinstance(cfg.policy, UFB):
        terms = state_blocking_terms(ev.distribution, build_profile(cfg.policy), 2)
        row["PB_2_fractional_band"] = float(np.sum(terms[cfg.policy.M:cfg.policy.N]))
        row["PB_2_guard_band"] = float(np.sum(terms[cfg.policy.N:]))
    return row, rates, met


def run_solve(cfg: ExperimentConfig) -> str:
    row, rates, met = _point(cfg, cfg.point)
    if cfg.format == "csv":
        return rows_to_csv(_columns(cfg), [row])
    return dumps_json({"policy": policy_to_dict(cfg.policy), "rates": list(rates), "mu": cfg.mu,
                       "point": row, "metrics": met.to_dict()})


def run_sweep(cfg: ExperimentConfig) -> str:
    rows = [_point(cfg, x)[0] for x in cfg.sweep_points()]
    if cfg.format == "csv":
        return rows_to_csv(_columns(cfg), rows)
    return dumps_json({"policy": policy_to_dict(cfg.policy), "mu": cfg.mu, "rows": rows})


def run_simulate(cfg: ExperimentConfig):
    rates, _ = _rates_at(cfg, cfg.point)
    sim = cfg.simulation
    hold = {"mu": cfg.mu} if sim.holding == "direct" else {"mu_a": cfg.mu_a, "eta": cfg.eta}
    sc = SimConfig(cfg.policy, rates, total_arrivals=sim.total_arrivals,
                   warmup_fraction=sim.warmup_fraction, batches=sim.batches, seed=cfg.seed, **hold)
    rep = simulate(sc, record_trace=sim.trace is not None)
    analytic = evaluate_policy(cfg.policy, rates, cfg.mu).metrics
    trace_text = None
    if sim.trace is not None:
        buf = io.StringIO()
        write_trace_csv(rep.trace, buf)
        trace_text = buf.getvalue()
    if cfg.format == "csv":
        m = cfg.policy.num_classes
        row = {"seed": rep.seed}
        cols = ["seed"]
        for k in range(1, m + 1):
            row[f"PB_{k}"] = rep.blocking[k - 1]
            row[f"PB_{k}_halfwidth"] = rep.blocking_halfwidth[k - 1]
            row[f"PB_{k}_analytic"] = analytic.blocking[k - 1]
            cols += [f"PB_{k}", f"PB_{k}_halfwidth", f"PB_{k}_analytic"]
        row.update(P_D=rep.dropping, P_D_halfwidth=rep.dropping_halfwidth,
                   P_D_analytic=analytic.dropping, utilization=rep.utilization,
                   utilization_halfwidth=rep.utilization_halfwidth,
                   utilization_analytic=analytic.utilization)
        cols += ["P_D", "P_D_halfwidth", "P_D_analytic", "utilization", "utilization_halfwidth",
                 "utilization_analytic"]
        for k in range(1, m + 1):
            row[f"arrivals_{k}"] = rep.arrivals[k - 1]
            row[f"accepted_{k}"] = rep.accepted[k - 1]
            cols += [f"arrivals_{k}", f"accepted_{k}"]
        return rows_to_csv(cols, [row]), trace_text
    doc = {"policy": policy_to_dict(cfg.policy), "rates": list(rates), "mu": cfg.mu,
           "simulation": rep.to_dict(), "analytic": analytic.to_dict()}
    return dumps_json(doc), trace_text


def run_optimize(cfg: ExperimentConfig) -> str:
    rates, _ = _rates_at(cfg, cfg.point)
    se = cfg.search
    spec = SearchSpec(cfg.policy, rates, cfg.mu, grid_step=se.grid_step, protected=se.protected,
                      epsilon=se.epsilon, objective=se.objective, N=se.N)
    res = search_acceptance_factors(spec, cache=ResultCache(se.cache))
    if res.from_cache:
        # kept off stdout so reruns stay byte-identical
        print("cacwb: optimizer result served from cache", file=sys.stderr)
    if cfg.format == "csv":
        dim = spec.dimension
        cols = [f"alpha_{j}" for j in range(1, dim + 1)] + ["overall_blocking", "utilization", "best"]
        rows = []
        for alpha, ob, u in res.feasible_set:
            row = {f"alpha_{j}": a for j, a in enumerate(alpha, start=1)}
            row.update(overall_blocking=ob, utilization=u, best=tuple(alpha) == res.best_alpha)
            rows.append(row)
        return rows_to_csv(cols, rows)
    return dumps_json({"policy": policy_to_dict(cfg.policy), "rates": list(rates), "mu": cfg.mu,
                       "protected": sorted(spec.protected), "epsilon": spec.epsilon,
                       "objective": spec.objective, "grid_step": spec.grid_step,
                       "result": {k: v for k, v in res.to_dict().items() if k != "from_cache"}})


def run_estimate_handover(cfg: ExperimentConfig):
    xs = cfg.sweep_points() if cfg.sweep is not None else [cfg.point]
    fp = cfg.fixed_point
    reports, failed = [], False
    for x in xs:
        try:
            rep = estimate_handover_rate(cfg.policy, x, cfg.P_h, cfg.mu, tolerance=fp.tolerance,
                                         max_iterations=fp.max_iterations, damping=fp.damping)
        except NonConvergenceError as exc:
            rep, failed = exc.report, True
        reports.append(rep)
    if cfg.format == "csv":
        cols = ["lambda_n", "lambda_h", "iterations", "residual", "converged",
                "PB_1", "PB_2", "P_D", "utilization", "overall_blocking"]
        rows = []
        for r in reports:
            m = r.metrics_at_solution
            rows.append({"lambda_n": r.lambda_n, "lambda_h": r.lambda_h,
                         "iterations": r.iterations, "residual": r.residual,
                         "converged": r.converged, "PB_1": m.blocking[0], "PB_2": m.blocking[1],
                         "P_D": m.dropping, "utilization": m.utilization,
                         "overall_blocking": m.overall_blocking})
        text = rows_to_csv(cols, rows)
    else:
        text = dumps_json({"policy": policy_to_dict(cfg.policy), "P_h": cfg.P_h, "mu": cfg.mu,
                           "points": [r.to_dict() for r in reports]})
    return text, failed


def _write(path: Optional[str], text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cacwb",
        description="Call admission control workbench for cellular loss systems.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--format", choices=FORMATS, help="override run.format")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.mode, seed=args.seed, output=args.out, fmt=args.format)
        if args.mode == "optimize":
            # surfaces invalid search settings before the grid runs
            SearchSpec(cfg.policy, _probe_rates(cfg), cfg.mu, grid_step=cfg.search.grid_step,
                       protected=cfg.search.protected, epsilon=cfg.search.epsilon,
                       objective=cfg.search.objective, N=cfg.search.N)
    except (ValidationError, DegenerateInputError) as exc:
        print(f"cacwb: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID

    status = EXIT_OK
    trace_text = None
    try:
        if args.mode == "solve":
            text = run_solve(cfg)
        elif args.mode == "sweep":
            text = run_sweep(cfg)
        elif args.mode == "simulate":
            text, trace_text = run_simulate(cfg)
        elif args.mode == "optimize":
            text = run_optimize(cfg)
        else:
            text, failed = run_estimate_handover(cfg)
            if failed:
                status = EXIT_NONCONVERGED
    except NonConvergenceError as exc:
        print(f"cacwb: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (ValidationError, DegenerateInputError) as exc:
        print(f"cacwb: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (CacError, ArithmeticError, RuntimeError) as exc:
        print(f"cacwb: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    if trace_text is not None:
        _write(cfg.simulation.trace, trace_text)
    _write(cfg.output, text)
    return status


def _probe_rates(cfg: ExperimentConfig):
    if cfg.two_class:
        return (cfg.ratio * cfg.point, cfg.point)
    return cfg.multiclass_rates(cfg.point)


if __name__ == "__main__":
    sys.exit(main())
