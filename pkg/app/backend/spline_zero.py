"""
Zero-order (piecewise-constant) derivative estimate, m = 0.

z(t) = z_i on [t_i, t_{i+1}) with the last piece closed at t_K. The parameter
vector is Z = [x0, z_0..z_{K-2}]; no continuity or boundary conditions apply.
"""
import numpy as np

from exceptions import InsufficientDataError
from models import TimeGrid, ZeroOrderSplineModel
from utils import locate_intervals

MIN_KNOTS = 2


def _require_knots(grid: TimeGrid) -> None:
    if grid.size < MIN_KNOTS:
        raise InsufficientDataError(f"Zero-order splines need K >= {MIN_KNOTS} knots, got {grid.size}")


def eval_derivative(model: ZeroOrderSplineModel, t):
    idx = locate_intervals(model.grid.knots, t, closed="right")
    out = model.z[idx]
    return float(out) if np.ndim(out) == 0 else out


def eval_signal(model: ZeroOrderSplineModel, t):
    """Piecewise-linear signal estimate x0 + integral of z."""
    knots = model.grid.knots
    idx = locate_intervals(knots, t, closed="right")
    cumulative = np.concatenate(([0.0], np.cumsum(model.grid.intervals * model.z)))
    out = model.x0 + cumulative[idx] + model.z[idx] * (np.asarray(t, dtype=float) - knots[idx])
    return float(out) if np.ndim(out) == 0 else out


def assemble_c(grid: TimeGrid) -> np.ndarray:
    """
    Lower-triangular design matrix: unit first column, row k holds h_1..h_{k-1}.

    grid [0, 0.5, 1.5] -> [[1, 0, 0], [1, 0.5, 0], [1, 0.5, 1.0]]
    """
    _require_knots(grid)
    k = grid.size
    design = np.zeros((k, k))
    design[:, 0] = 1.0
    design[1:, 1:] = np.tril(np.broadcast_to(grid.intervals, (k - 1, k - 1)))
    return design


def assemble_q(grid: TimeGrid) -> np.ndarray:
    """diag(0, h_1, ..., h_{K-1})."""
    _require_knots(grid)
    return np.diag(np.concatenate(([0.0], grid.intervals)))


def design_row(grid: TimeGrid) -> np.ndarray:
    """
    Row of C appended for the last knot of `grid`: H = [1, h_1, ..., h_{K-1}].

    grid [0, 0.5, 1.5, 2.0] -> [1, 0.5, 1.0, 0.5]
    """
    return np.concatenate(([1.0], grid.intervals))
