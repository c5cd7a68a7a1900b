"""
Experiment harness: per-method estimation, the two RMSE metrics and the
(h, sigma) x method x seed grid.

Full-interval scenario: one batch fit (splines) or one causal replay
(baselines) over all samples, scored on knots with t >= T/3.
Online scenario: the estimate at each t_k uses only samples 1..k (recursive
solver for splines, the same causal replay for baselines), scored the same way.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

import baselines
import solver_batch
import solver_recursive
import spline_quadratic
import spline_zero
from exceptions import ConfigurationError, DataError, InsufficientDataError, SplineDiffError
from models import SampleSeries, QuadraticSplineModel
from schemas import (
    BenchConfig, BenchRow, EstimatorConfig, ExperimentResult, HgoParams, LevantParams,
    METHOD_MIN_KNOTS, ScenarioSpec,
)
from settings import LARGE_ONLINE_KNOTS
from signal_lab import scenario_series, truth
from utils import steady_state_mask

logger = logging.getLogger(__name__)


# ============== Metrics ==============

def rmse_full(estimates, z_true, times) -> float:
    """
    RMSE over the knots with t_k >= T/3.

    Raises:
        DataError: lengths differ or no knot falls in the window.
    """
    estimates = np.asarray(estimates, dtype=float)
    z_true = np.asarray(z_true, dtype=float)
    times = np.asarray(times, dtype=float)
    if not (estimates.shape == z_true.shape == times.shape):
        raise DataError(
            f"Estimate, truth and time vectors must align: {estimates.shape}, {z_true.shape}, {times.shape}"
        )
    mask = steady_state_mask(times)
    if not np.any(mask):
        raise DataError("No knots in the steady-state window t >= T/3")
    err = estimates[mask] - z_true[mask]
    return float(np.sqrt(np.mean(err * err)))


def rmse_online(series: SampleSeries, config: EstimatorConfig, z_true=None) -> float:
    """
    Endpoint RMSE: the estimate at each t_k from samples 1..k, compared with
    the true derivative over t_k >= T/3.
    """
    minimum = METHOD_MIN_KNOTS[config.method]
    if series.grid.size < minimum:
        raise InsufficientDataError(
            f"{config.method} needs at least {minimum} samples for online estimation, got {series.grid.size}"
        )
    if z_true is None:
        _, z_true = truth(series)
    estimates = online_estimates(series, config)
    times = series.times
    valid = np.arange(series.grid.size) >= minimum - 1
    mask = steady_state_mask(times) & valid
    if not np.any(mask):
        raise DataError("No endpoint estimates in the steady-state window t >= T/3")
    err = estimates[mask] - np.asarray(z_true)[mask]
    return float(np.sqrt(np.mean(err * err)))


# ============== Estimation ==============

def _baseline_estimates(series: SampleSeries, config: EstimatorConfig) -> np.ndarray:
    if config.method == "levant":
        return baselines.levant_stream(series, LevantParams(L=config.levant_L))
    if config.hgo_eps is None:
        raise ConfigurationError("The hgo method needs an epsilon (--hgo-eps)")
    return baselines.hgo_stream(series, HgoParams(eps=config.hgo_eps, sat=config.hgo_sat))


def knot_derivatives(model) -> np.ndarray:
    """Derivative estimate of a fitted model at each of its knots."""
    if isinstance(model, QuadraticSplineModel):
        return spline_quadratic.p_to_z(model.p, model.grid)
    return np.append(model.z, model.z[-1])


def fit(series: SampleSeries, config: EstimatorConfig):
    """Batch spline fit for a spline method."""
    return solver_batch.solve_batch(series, config.order, config.lam).model


def full_estimates(series: SampleSeries, config: EstimatorConfig) -> np.ndarray:
    """Full-interval derivative estimates at the knots."""
    if config.is_spline:
        return knot_derivatives(fit(series, config))
    return _baseline_estimates(series, config)


def online_estimates(series: SampleSeries, config: EstimatorConfig) -> np.ndarray:
    """Endpoint estimates for every prefix (NaN before the method's minimum)."""
    if config.is_spline:
        return solver_recursive.run_stream(series, config.order, config.lam, config.refactor_every)
    return _baseline_estimates(series, config)


def dense_evaluation(model, per_interval: int = 10) -> Tuple[np.ndarray, np.ndarray]:
    """(t, z(t)) at `per_interval` evenly spaced points per piece plus the last knot."""
    knots = model.grid.knots
    fractions = np.arange(per_interval) / per_interval
    t = (knots[:-1, None] + model.grid.intervals[:, None] * fractions[None, :]).reshape(-1)
    t = np.append(t, knots[-1])
    evaluate = spline_quadratic.eval_derivative if model.order == 1 else spline_zero.eval_derivative
    return t, evaluate(model, t)


# ============== Grid ==============

@dataclass(frozen=True)
class CellJob:
    row_index: int
    spec: ScenarioSpec
    estimator: EstimatorConfig
    scenarios: Tuple[str, ...]


@dataclass
class CellOutcome:
    row_index: int
    method: str
    seed: int
    rmse_full: float = float("nan")
    rmse_online: float = float("nan")
    error: Optional[str] = None


def _score(job: CellJob, scenario: str, series: SampleSeries, z_true) -> float:
    if scenario == "full":
        return rmse_full(full_estimates(series, job.estimator), z_true, series.times)
    return rmse_online(series, job.estimator, z_true)


def run_cell(job: CellJob) -> CellOutcome:
    """
    One (row, method, seed) cell. Each scenario is scored on its own: a
    failure is recorded against that scenario and the other one still runs.
    """
    method, seed = job.estimator.method, job.spec.seed
    outcome = CellOutcome(job.row_index, method, seed)
    errors = []
    try:
        series = scenario_series(job.spec)
        _, z_true = truth(series, job.spec.signal_id)
    except Exception as exc:
        errors.append(f"{type(exc).__name__}: {exc}")
    else:
        for scenario in ("full", "online"):
            if scenario not in job.scenarios:
                continue
            try:
                setattr(outcome, f"rmse_{scenario}", _score(job, scenario, series, z_true))
            except Exception as exc:
                errors.append(f"{scenario}: {type(exc).__name__}: {exc}")
    if errors:
        outcome.error = "; ".join(errors)
        logger.warning(
            f"Cell h={job.spec.h:g}, sigma={job.spec.sigma:g}, method={method}, seed={seed} failed: {outcome.error}"
        )
    return outcome


def row_hgo_eps(config: BenchConfig, row: BenchRow) -> Optional[float]:
    """Row override, global override, or a tuned value on the reserved tuning seed."""
    if row.hgo_eps is not None:
        return row.hgo_eps
    if config.hgo_eps is not None:
        return config.hgo_eps
    if "hgo" not in config.methods:
        return None
    spec = ScenarioSpec(h=row.h, sigma=row.sigma, horizon=config.horizon, seed=config.tuning_seed)
    return baselines.tune_hgo(spec, sat=config.hgo_sat)


def tune_rows(config: BenchConfig) -> Tuple[Dict[int, Optional[float]], Dict[int, str]]:
    """
    HGO epsilon per row. A row whose tuning fails gets None (its hgo cells are
    then recorded as failed) and an entry in the returned error map.
    """
    eps_by_row, tuning_errors = {}, {}
    for i, row in enumerate(config.rows):
        try:
            eps_by_row[i] = row_hgo_eps(config, row)
        except SplineDiffError as exc:
            eps_by_row[i] = None
            tuning_errors[i] = f"HGO tuning: {type(exc).__name__}: {exc}"
            logger.warning(f"Row {row.label}: {tuning_errors[i]}")
    return eps_by_row, tuning_errors


def large_online_rows(config: BenchConfig) -> List[BenchRow]:
    """Rows whose online spline cells would exceed LARGE_ONLINE_KNOTS knots."""
    if "online" not in config.scenarios or not any(m in ("spline2", "spline0") for m in config.methods):
        return []
    return [row for row in config.rows if config.horizon / row.h > LARGE_ONLINE_KNOTS]


def build_jobs(config: BenchConfig, eps_by_row: Dict[int, Optional[float]]) -> List[CellJob]:
    jobs = []
    for i, row in enumerate(config.rows):
        for method in config.methods:
            estimator = config.estimator_for(row, method, hgo_eps=eps_by_row.get(i))
            for seed in config.seed_list:
                spec = ScenarioSpec(h=row.h, sigma=row.sigma, horizon=config.horizon, seed=seed)
                jobs.append(CellJob(i, spec, estimator, tuple(config.scenarios)))
    return jobs


def run_grid(config: BenchConfig) -> List[ExperimentResult]:
    """
    Run every method on every row and seed.

    Cells are independent and may run in a process pool (config.workers);
    results come back in row, method, seed order regardless.
    """
    for row in large_online_rows(config):
        knots = int(config.horizon / row.h)
        logger.warning(
            f"Row {row.label}: online spline cells keep a dense ~{knots}x{knots} inverse "
            f"(~{knots * knots * 8 / 1e6:.0f} MB) and will run for a long time"
        )
    eps_by_row, tuning_errors = tune_rows(config)
    jobs = build_jobs(config, eps_by_row)
    logger.info(
        f"Running {len(config.rows)} rows x {len(config.methods)} methods x {config.seeds} seeds "
        f"({len(jobs)} cells, {config.workers} worker(s))"
    )

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(run_cell, jobs))
    else:
        outcomes = [run_cell(job) for job in jobs]

    grouped: Dict[Tuple[int, str], List[CellOutcome]] = {}
    for outcome in outcomes:
        grouped.setdefault((outcome.row_index, outcome.method), []).append(outcome)

    results = []
    for i, row in enumerate(config.rows):
        for method in config.methods:
            cells = sorted(grouped.get((i, method), []), key=lambda c: c.seed)
            errors = [f"seed {c.seed}: {c.error}" for c in cells if c.error]
            if method == "hgo" and i in tuning_errors:
                errors.insert(0, tuning_errors[i])
            results.append(ExperimentResult(
                label=row.label,
                scenario=ScenarioSpec(h=row.h, sigma=row.sigma, horizon=config.horizon, seed=config.base_seed),
                method=method,
                seeds=[c.seed for c in cells],
                per_seed_full=[c.rmse_full for c in cells],
                per_seed_online=[c.rmse_online for c in cells],
                hgo_eps=eps_by_row.get(i) if method == "hgo" else None,
                error="; ".join(errors) or None,
            ))
        logger.info(f"Finished row {row.label}")
    return results


def row_traces(config: BenchConfig, row: BenchRow, hgo_eps: Optional[float], seed: Optional[int] = None):
    """
    Estimates of every method on one realization of a row, for plot files.

    Returns:
        {scenario: (t, z_true, {method: estimates})}. Methods that fail are
        left out with a warning.
    """
    seed = config.base_seed if seed is None else seed
    spec = ScenarioSpec(h=row.h, sigma=row.sigma, horizon=config.horizon, seed=seed)
    series = scenario_series(spec)
    _, z_true = truth(series, spec.signal_id)
    traces = {}
    for scenario in config.scenarios:
        estimate = full_estimates if scenario == "full" else online_estimates
        columns = {}
        for method in config.methods:
            try:
                columns[method] = estimate(series, config.estimator_for(row, method, hgo_eps=hgo_eps))
            except Exception as exc:
                logger.warning(f"Trace {row.label}/{scenario}/{method} skipped: {exc}")
        traces[scenario] = (series.times, z_true, columns)
    return traces
