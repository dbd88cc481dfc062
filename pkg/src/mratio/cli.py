"""Command-line interface.

Subcommands: estimate (fit estimators on a CSV and write a report),
simulate (draw a benchmark dataset), diagnose (balance and overlap exports),
and bench (Monte Carlo sweep). Configuration beyond the basic flags is read
from a TOML file with sections propensity, outcome, weights, sim, and bench.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys

try:
    import tomllib
except ModuleNotFoundError:       # Python < 3.11
    import tomli as tomllib

import numpy as np

from .bench import DEFAULT_METHODS, ExperimentConfig, export_results, \
    run_monte_carlo
from .dataset import load_observations, write_observations
from .diagnostics import imbalance_profile, propensity_histogram, \
    weight_summary
from .estimators import EstimatorConfig, estimate_att_atc, estimator_suite
from .inference import conservative_interval, efficient_interval, \
    influence_variance
from .nuisance import OutcomeConfig, PropensityConfig, fit_propensity
from .synthlab import SimulationConfig, generate_synthetic
from .weightfit import CrossValidationPlan


def _load_toml(path) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _subconfig(cls, section: dict, tuple_fields=()):
    kwargs = {}
    for name in cls.__dataclass_fields__:
        if name in section:
            value = section[name]
            if name in tuple_fields and isinstance(value, list):
                value = tuple(value)
            kwargs[name] = value
    return cls(**kwargs)


def estimator_config_from_toml(raw: dict, folds: int | None = None,
                               seed: int | None = None) -> EstimatorConfig:
    """Assemble an EstimatorConfig from parsed TOML sections; explicit CLI
    flags override the file."""
    outcome_raw = dict(raw.get("outcome", {}))
    ffnn = outcome_raw.pop("ffnn", {})
    for key, target in (("widths", "ffnn_widths"), ("epochs", "ffnn_epochs"),
                        ("batch", "ffnn_batch"), ("step", "ffnn_step"),
                        ("seed", "ffnn_seed")):
        if key in ffnn:
            outcome_raw[target] = ffnn[key]
    cfg = EstimatorConfig(
        folds=folds if folds is not None else int(raw.get("folds", 5)),
        seed=seed if seed is not None else int(raw.get("seed", 0)),
        propensity=_subconfig(PropensityConfig, raw.get("propensity", {})),
        outcome=_subconfig(OutcomeConfig, outcome_raw,
                           tuple_fields=("ffnn_widths",)),
        weights=_subconfig(CrossValidationPlan, raw.get("weights", {}),
                           tuple_fields=("lambda_grid", "gamma_multipliers")),
        weight_method=raw.get("weights", {}).get("method", "kernel-ridge"),
    )
    return cfg


REPORT_HEADER = ("method", "theta_hat", "n", "K", "var_hat", "ci_low",
                 "ci_high", "fingerprint", "var_efficient",
                 "var_conservative", "ci_eff_low", "ci_eff_high",
                 "ci_cons_low", "ci_cons_high", "delta_hat")


def _report_row(report, alpha: float) -> list:
    """One CSV row per estimator: the conservative interval is the headline
    (ci_low/ci_high) when available, the efficient one otherwise."""
    eff = efficient_interval(report, alpha)
    var_eff = influence_variance(report.contributions, report.theta_hat)
    if report.aipw_contributions is not None:
        cons = conservative_interval(report, alpha)
        var_cons = var_eff + cons.delta_hat
        headline, var_hat = cons, var_cons
        cons_lo, cons_hi, delta = cons.lower, cons.upper, cons.delta_hat
    else:
        headline, var_hat = eff, var_eff
        var_cons = cons_lo = cons_hi = delta = math.nan
    return [report.method, report.theta_hat, report.n, report.K, var_hat,
            headline.lower, headline.upper, report.fingerprint, var_eff,
            var_cons, eff.lower, eff.upper, cons_lo, cons_hi, delta]


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.17g}" if isinstance(v, float) else str(v)
                             for v in row])


def _schema(args) -> tuple[str, str, str]:
    return args.y_col, args.a_col, args.x_cols


def cmd_estimate(args) -> int:
    data = load_observations(args.input, _schema(args))
    raw = _load_toml(args.config)
    cfg = estimator_config_from_toml(raw, folds=args.folds, seed=args.seed)
    alpha = float(raw.get("alpha", 0.05))
    method = args.method.lower()
    if method == "suite":
        reports = estimator_suite(data, cfg)
    elif method in ("att", "atc"):
        reports = [estimate_att_atc(data, method.upper(), cfg)]
    else:
        reports = estimator_suite(data, cfg, methods=(method.upper(),))
    _write_csv(args.out, REPORT_HEADER,
               [_report_row(r, alpha) for r in reports])
    return 0


def cmd_simulate(args) -> int:
    cfg = SimulationConfig(n=args.n, p_i=args.p_i, effect=args.effect,
                           mu0_form=args.mu0, seed=args.seed)
    data, _ = generate_synthetic(cfg)
    write_observations(data, args.out)
    return 0


def cmd_diagnose(args) -> int:
    data = load_observations(args.input, _schema(args))
    raw = _load_toml(args.config)
    cfg = estimator_config_from_toml(raw, seed=args.seed)
    convention = raw.get("diagnostics", {}).get("convention", "corrected")
    bins = int(raw.get("diagnostics", {}).get("bins", 50))

    prop = fit_propensity(data.X, data.A, cfg.propensity)
    pi_hat = prop.predict(data.X)
    edges, counts = propensity_histogram(pi_hat, bins=bins)
    _write_csv(f"{args.out_prefix}_propensity_hist.csv",
               ("bin_low", "bin_high", "count"),
               [(float(edges[i]), float(edges[i + 1]), int(counts[i]))
                for i in range(counts.size)])

    reports = estimator_suite(data, cfg)
    summaries = [weight_summary(r) for r in reports]
    keys = [k for k in summaries[0] if k != "method"]
    _write_csv(f"{args.out_prefix}_weights.csv", ["method", *keys],
               [[s["method"], *(s[k] for k in keys)] for s in summaries])

    names = data.covariate_names or tuple(
        f"x{j+1}" for j in range(data.p))
    rows = []
    for r in reports:
        prof = imbalance_profile(data.X, r.weights, convention=convention,
                                 method=r.method)
        for name, value in zip(names, prof.values):
            rows.append([r.method, name, float(value)])
    _write_csv(f"{args.out_prefix}_imbalance.csv",
               ("method", "covariate", "imbalance"), rows)
    return 0


def cmd_bench(args) -> int:
    raw = _load_toml(args.config)
    bench_raw = raw.get("bench", raw)
    grid_ns = bench_raw.get("grid", {}).get("n", [400])
    grid_pis = bench_raw.get("grid", {}).get("p_i", [5])
    grid = tuple((int(n), int(p)) for n in grid_ns for p in grid_pis)
    sim_raw = {k: v for k, v in raw.get("sim", {}).items()
               if k in SimulationConfig.__dataclass_fields__}
    template = SimulationConfig(n=grid[0][0], p_i=grid[0][1], **sim_raw)
    cfg = ExperimentConfig(
        reps=int(bench_raw.get("reps", 200)),
        grid=grid,
        template=template,
        estimator=estimator_config_from_toml(raw),
        estimators=tuple(bench_raw.get("estimators", DEFAULT_METHODS)),
        alpha=float(bench_raw.get("alpha", 0.05)),
        master_seed=int(bench_raw.get("master_seed", 0)),
        workers=args.workers,
    )
    table = run_monte_carlo(cfg, record_timing=not args.no_timing)
    export_results(table, args.out)
    flagged = table.flagged_cells
    for row in flagged:
        print(f"flagged: n={row.n} p_i={row.p_i} method={row.method} "
              f"(failures={row.failures}, coverage={row.coverage})",
              file=sys.stderr)
    return 0 if not flagged else 1


def _add_schema_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--y-col", default="y")
    p.add_argument("--a-col", default="a")
    p.add_argument("--x-cols", default="*",
                   help="comma list or glob of covariate columns")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mratio",
        description="Outcome-weighted treatment effect estimation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate effects from a CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--method", default="suite",
                   choices=["ipw", "aipw", "mr", "amr", "att", "atc",
                            "suite"])
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    _add_schema_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="draw a benchmark dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p-i", type=int, default=5)
    p.add_argument("--effect", type=float, default=5.0)
    p.add_argument("--mu0", default="paper",
                   choices=["paper", "linear", "zero"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("diagnose", help="balance and overlap exports")
    p.add_argument("--input", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-prefix", required=True)
    _add_schema_flags(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("bench", help="Monte Carlo sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-timing", action="store_true",
                   help="zero the seconds column for byte-reproducible output")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
