"""Monte Carlo experiment orchestration.

Sweeps a grid of (n, p_i) cells, replicating the benchmark DGP and the
estimator suite in each cell with seeds derived from (master seed, cell
index, replication index), so results do not depend on worker scheduling.
Aggregates bias, MAE, RMSE, CI coverage and length per (cell, method), and
exports a plot-ready CSV.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .estimators import EstimatorConfig, estimator_suite
from .inference import conservative_interval, efficient_interval
from .synthlab import SimulationConfig, generate_synthetic

DEFAULT_METHODS = ("IPW", "AIPW", "MR", "AMR")
FAILURE_FLAG_RATE = 0.01


@dataclass(frozen=True)
class ExperimentConfig:
    """Replication sweep over (n, p_i) cells of the benchmark DGP."""

    reps: int = 200
    grid: tuple[tuple[int, int], ...] = ((400, 5),)
    template: SimulationConfig = field(
        default_factory=lambda: SimulationConfig(n=400))
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    estimators: tuple[str, ...] = DEFAULT_METHODS
    alpha: float = 0.05
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not self.grid:
            raise ValueError("grid must be non-empty")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0,1)")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class RepOutcome:
    """One estimator's result on one replication; CI fields are NaN when the
    method reports no interval."""

    method: str
    theta_hat: float
    ci_low: float = math.nan
    ci_high: float = math.nan
    ci_kind: str = ""


@dataclass(frozen=True)
class CellMetrics:
    n: int
    p_i: int
    method: str
    bias: float
    mae: float
    rmse: float
    coverage: float
    ci_length: float
    reps: int
    failures: int
    seconds: float
    flagged: bool


@dataclass(frozen=True)
class MetricsTable:
    """Aggregated metrics plus per-replication records for finer analyses."""

    rows: tuple[CellMetrics, ...]
    records: tuple[tuple, ...]      # (n, p_i, rep, RepOutcome)
    failures: tuple[tuple, ...]     # (n, p_i, rep, message)

    @property
    def flagged_cells(self) -> tuple[CellMetrics, ...]:
        return tuple(r for r in self.rows if r.flagged)


def default_suite(data, true_theta: float, alpha: float,
                  est_cfg: EstimatorConfig) -> list[RepOutcome]:
    """Run the shared-nuisance estimator suite and attach intervals.

    The AMR row carries the conservative interval (the default for reports);
    its efficient interval is emitted as a separate AMR-efficient row.
    """
    methods = tuple(m for m in DEFAULT_METHODS)
    reports = estimator_suite(data, est_cfg, methods=methods)
    out = []
    for rep in reports:
        eff = efficient_interval(rep, alpha)
        if rep.method == "AMR":
            cons = conservative_interval(rep, alpha)
            out.append(RepOutcome("AMR", rep.theta_hat, cons.lower,
                                  cons.upper, "conservative"))
            out.append(RepOutcome("AMR-efficient", rep.theta_hat, eff.lower,
                                  eff.upper, "efficient"))
        else:
            out.append(RepOutcome(rep.method, rep.theta_hat, eff.lower,
                                  eff.upper, "efficient"))
    return out


def _rep_seeds(master_seed: int, cell: int, rep: int) -> tuple[int, int]:
    state = np.random.SeedSequence((master_seed, cell, rep)).generate_state(2)
    return int(state[0]), int(state[1])


def _run_one(cfg: ExperimentConfig, cell: int, rep: int, suite_fn):
    n, p_i = cfg.grid[cell]
    data_seed, est_seed = _rep_seeds(cfg.master_seed, cell, rep)
    sim = replace(cfg.template, n=n, p_i=p_i, seed=data_seed)
    data, theta = generate_synthetic(sim)
    est_cfg = replace(cfg.estimator, seed=est_seed)
    t0 = time.perf_counter()
    try:
        outcomes = suite_fn(data, theta, cfg.alpha, est_cfg)
        return cell, rep, outcomes, None, time.perf_counter() - t0
    except Exception as exc:  # failures are recorded per cell, never retried
        return cell, rep, None, f"{type(exc).__name__}: {exc}", \
            time.perf_counter() - t0


def _aggregate_cell(n, p_i, method, errs, hits, lengths, total_reps,
                    n_fail, seconds) -> CellMetrics:
    errs = np.asarray(errs, dtype=float)
    bias = float(errs.mean())
    mae = float(np.abs(errs).mean())
    rmse = float(np.sqrt(np.mean(errs * errs)))
    coverage = float(np.mean(hits)) if hits else math.nan
    ci_length = float(np.mean(lengths)) if lengths else math.nan
    flagged = (n_fail > FAILURE_FLAG_RATE * total_reps
               or math.isnan(coverage)
               or not math.isfinite(ci_length))
    return CellMetrics(n=n, p_i=p_i, method=method, bias=bias, mae=mae,
                       rmse=rmse, coverage=coverage, ci_length=ci_length,
                       reps=errs.size, failures=n_fail, seconds=seconds,
                       flagged=flagged)


def run_monte_carlo(cfg: ExperimentConfig, suite_fn=None,
                    record_timing: bool = True) -> MetricsTable:
    """Run the sweep; deterministic given the master seed for any worker count.

    suite_fn(data, true_theta, alpha, est_cfg) -> list[RepOutcome] can be
    injected for testing; the default runs IPW/AIPW/MR/AMR on shared
    cross-fitted nuisances. With record_timing=False the seconds column is
    zeroed, making exports byte-reproducible across runs.
    """
    if suite_fn is None:
        suite_fn = default_suite
    tasks = [(c, r) for c in range(len(cfg.grid)) for r in range(cfg.reps)]
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            raw = list(pool.map(lambda t: _run_one(cfg, *t, suite_fn), tasks))
    else:
        raw = [_run_one(cfg, c, r, suite_fn) for c, r in tasks]
    # keyed aggregation in (cell, rep) order: scheduling cannot change results
    by_key = {(c, r): (o, e, dt) for c, r, o, e, dt in raw}

    records, failures = [], []
    rows = []
    for cell, (n, p_i) in enumerate(cfg.grid):
        per_method: dict[str, dict[str, list]] = {}
        n_fail = 0
        seconds = 0.0
        theta = float(cfg.template.effect)
        for rep in range(cfg.reps):
            outcomes, err, dt = by_key[(cell, rep)]
            seconds += dt if record_timing else 0.0
            if err is not None:
                n_fail += 1
                failures.append((n, p_i, rep, err))
                continue
            for o in outcomes:
                records.append((n, p_i, rep, o))
                slot = per_method.setdefault(
                    o.method, {"err": [], "hit": [], "len": []})
                slot["err"].append(o.theta_hat - theta)
                has_ci = not (math.isnan(o.ci_low) and math.isnan(o.ci_high))
                if has_ci:
                    slot["hit"].append(o.ci_low <= theta <= o.ci_high)
                    slot["len"].append(o.ci_high - o.ci_low)
        for method in sorted(per_method):
            slot = per_method[method]
            rows.append(_aggregate_cell(n, p_i, method, slot["err"],
                                        slot["hit"], slot["len"], cfg.reps,
                                        n_fail, seconds))
        if not per_method:
            raise RuntimeError(
                f"cell (n={n}, p_i={p_i}): all {cfg.reps} replications failed")
    return MetricsTable(rows=tuple(rows), records=tuple(records),
                        failures=tuple(failures))


def coverage_experiment(cfg: ExperimentConfig, alpha: float,
                        suite_fn=None) -> MetricsTable:
    """Coverage sweep at a given level; requires AMR and AIPW in the suite."""
    if not {"AMR", "AIPW"} <= set(cfg.estimators):
        raise ValueError("coverage experiment requires AMR and AIPW")
    return run_monte_carlo(replace(cfg, alpha=alpha), suite_fn=suite_fn)


EXPORT_HEADER = ("n", "p_i", "method", "bias", "mae", "rmse", "coverage",
                 "ci_length", "reps", "failures", "seconds")


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def export_results(table: MetricsTable, path) -> None:
    """Write the metrics table as CSV, sorted by (n, p_i, method).

    Floats use 17 significant digits so a generic reader round-trips them
    exactly; the same table exports to byte-identical files.
    """
    if not table.rows:
        raise ValueError("cannot export an empty table")
    rows = sorted(table.rows, key=lambda r: (r.n, r.p_i, r.method))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EXPORT_HEADER)
        for r in rows:
            writer.writerow([_fmt(v) for v in
                             (r.n, r.p_i, r.method, r.bias, r.mae, r.rmse,
                              r.coverage, r.ci_length, r.reps, r.failures,
                              r.seconds)])
