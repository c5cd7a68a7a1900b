"""
Test signals, non-uniform sampling grids, measurement noise and CSV I/O.

Randomness comes from numpy's PCG64 generator. A scenario seed is expanded
with SeedSequence into two independent child streams: one draws the sampling
intervals, the other the Gaussian noise (numpy's standard-normal transform of
uniform draws). Equal seeds reproduce grids and series bit for bit within
this code base.
"""
import csv
import io
import logging
import math
import os
from typing import Tuple

import numpy as np

from exceptions import CsvFormatError, InsufficientDataError, DataError
from models import TimeGrid, SampleSeries
from schemas import ScenarioSpec
from utils import format_float

logger = logging.getLogger(__name__)

_GRID_STREAM = 0
_NOISE_STREAM = 1

_TWO_PI = 2.0 * math.pi
_3_1_PI = 3.1 * math.pi


# ============== Test signal ==============

def benchmark_signal(t) -> Tuple[np.ndarray, np.ndarray]:
    """
    The benchmark test signal and its exact derivative.

    x(t) = t - 1 + (sin(2πt)/(2π) + sin(3.1πt)/(3.1π)) / 2
    z(t) = 1 + (cos(2πt) + cos(3.1πt)) / 2

    Args:
        t: scalar or array of times (s).

    Returns:
        Tuple (x, z) with the same shape as t.
    """
    t = np.asarray(t, dtype=float)
    x = t - 1.0 + 0.5 * (np.sin(_TWO_PI * t) / _TWO_PI + np.sin(_3_1_PI * t) / _3_1_PI)
    z = 1.0 + 0.5 * (np.cos(_TWO_PI * t) + np.cos(_3_1_PI * t))
    return x, z


def signal_second_derivative(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return -0.5 * (_TWO_PI * np.sin(_TWO_PI * t) + _3_1_PI * np.sin(_3_1_PI * t))


def second_derivative_bound(horizon: float = 1.95, points: int = 200_001) -> float:
    """Maximum of |x''| over [0, horizon] on a dense scan."""
    t = np.linspace(0.0, horizon, points)
    return float(np.max(np.abs(signal_second_derivative(t))))


SIGNALS = {"benchmark": benchmark_signal}


def truth(series_or_grid, signal_id: str = "benchmark") -> Tuple[np.ndarray, np.ndarray]:
    """True (x, z) at the knots of a grid or series."""
    grid = getattr(series_or_grid, "grid", series_or_grid)
    return SIGNALS[signal_id](grid.knots)


# ============== Sampling ==============

def _streams(seed: int):
    children = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.PCG64(children[_GRID_STREAM])), \
        np.random.Generator(np.random.PCG64(children[_NOISE_STREAM]))


def generate_grid(spec: ScenarioSpec) -> TimeGrid:
    """
    Draw a non-uniform sampling grid on [0, T].

    Intervals are i.i.d. Uniform([0.5h, 1.5h]); drawing stops once the next
    knot would reach or pass T, and the final knot is clamped to exactly T.
    The last interval can therefore be shorter than 0.5h.

    Args:
        spec: scenario with nominal step h, horizon T and seed.

    Returns:
        TimeGrid with t_1 = 0 and t_K = T.
    """
    if spec.h >= spec.horizon:
        raise InsufficientDataError(
            f"Nominal step h={spec.h} must be smaller than the horizon T={spec.horizon}"
        )
    grid_rng, _ = _streams(spec.seed)
    # Enough draws to cover T even if every interval is 0.5h
    n_draws = int(math.ceil(spec.horizon / (0.5 * spec.h))) + 1
    steps = grid_rng.uniform(0.5 * spec.h, 1.5 * spec.h, size=n_draws)
    cumulative = np.cumsum(steps)
    interior = cumulative[cumulative < spec.horizon]
    knots = np.concatenate(([0.0], interior, [spec.horizon]))
    return TimeGrid(knots)


def sample_signal(grid: TimeGrid, spec: ScenarioSpec) -> SampleSeries:
    """
    Sample the scenario's signal on a grid with additive N(0, σ²) noise.

    σ = 0 returns exact samples.
    """
    x, _ = SIGNALS[spec.signal_id](grid.knots)
    if spec.sigma == 0:
        return SampleSeries(grid, x)
    _, noise_rng = _streams(spec.seed)
    noise = noise_rng.normal(0.0, spec.sigma, size=grid.size)
    return SampleSeries(grid, x + noise)


def scenario_series(spec: ScenarioSpec) -> SampleSeries:
    return sample_signal(generate_grid(spec), spec)


# ============== CSV ==============

def _is_header(record) -> bool:
    return [field.strip().lower() for field in record] == ["t", "y"]


def load_csv(path: str) -> SampleSeries:
    """
    Read a two-column (t, y) CSV file.

    An optional "t,y" header is accepted on the first line. Blank lines are
    skipped. Row numbers in errors are 1-based line numbers of the file.

    Raises:
        DataError: file missing.
        CsvFormatError: undecodable bytes, wrong column count, non-numeric or non-finite fields,
            non-increasing times, fewer than 2 records.
    """
    if not os.path.exists(path):
        raise DataError(f"Input file not found: {path}")

    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        row = raw.count(b"\n", 0, exc.start) + 1
        raise CsvFormatError(f"not UTF-8 text (byte {exc.start}: {exc.reason})", row, path) from None

    times, values = [], []
    for row_number, record in enumerate(csv.reader(io.StringIO(text, newline="")), start=1):
        if not record or all(not field.strip() for field in record):
            continue
        if row_number == 1 and _is_header(record):
            continue
        if len(record) != 2:
            raise CsvFormatError(f"expected 2 columns, found {len(record)}", row_number, path)
        try:
            t, y = float(record[0]), float(record[1])
        except ValueError:
            raise CsvFormatError(f"non-numeric field in {record!r}", row_number, path)
        if not (math.isfinite(t) and math.isfinite(y)):
            raise CsvFormatError(f"non-finite value in {record!r}", row_number, path)
        if times and t <= times[-1][0]:
            raise CsvFormatError(
                f"time {t!r} does not exceed previous time {times[-1][0]!r} (times must be strictly increasing)",
                row_number, path,
            )
        times.append((t, row_number))
        values.append(y)

    if len(times) < 2:
        raise CsvFormatError(f"need at least 2 samples, found {len(times)}", path=path)
    return SampleSeries(TimeGrid([t for t, _ in times]), values)


def save_csv(series: SampleSeries, path: str, header: bool = True) -> None:
    """Write a series as "t,y" CSV with LF line endings and 17 significant digits."""
    write_columns(path, ["t", "y"], [series.times, series.values], header=header)


def write_columns(path: str, names, columns, header: bool = True) -> None:
    """Write equally long numeric columns as CSV (shared by every result file)."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header:
            writer.writerow(names)
        for row in zip(*columns):
            writer.writerow([format_float(v) for v in row])
    logger.debug(f"Wrote {path}")
