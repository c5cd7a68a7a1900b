"""
Quadratic-spline parameterization of the derivative estimate (m = 1).

On piece i (0-based, t in [t_i, t_{i+1}], u = t - t_i, h = h_i) the derivative
estimate is

    z(t) = (u/h)^2 z_{i+1} + u(u - h)/h^2 p_i + ((u - h)/h)^2 z_i

Knot values z_i are not free: derivative continuity at interior knots and the
natural boundary conditions (zero second derivative at both ends) make them a
banded linear function of p. The parameter vector is Z = [x0, p_0..p_{K-2}].

All arrays use 0-based indices; h has length K-1.
"""
import logging
from typing import Tuple

import numpy as np

from exceptions import InsufficientDataError, ShapeMismatchError
from models import TimeGrid, QuadraticSplineModel
from utils import locate_intervals

logger = logging.getLogger(__name__)

MIN_KNOTS = 4


def _require_knots(grid: TimeGrid) -> None:
    if grid.size < MIN_KNOTS:
        raise InsufficientDataError(
            f"Quadratic splines need K >= {MIN_KNOTS} knots, got {grid.size}"
        )


# ============== p -> z map ==============

def _z_stencil(h: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Two-term stencil of the p -> z map.

    Returns (col, lo, hi) such that z[j] = lo[j] * p[col[j]] + hi[j] * p[col[j] + 1].
    """
    k = h.size + 1
    col = np.clip(np.arange(k) - 1, 0, k - 3)
    lo = np.empty(k)
    hi = np.empty(k)

    # Interior knots: derivative continuity
    left, right = h[:-1], h[1:]
    denom = 2.0 * (left + right)
    lo[1:-1] = -right / denom
    hi[1:-1] = -left / denom

    # Natural boundary conditions
    s0 = 2.0 * (h[0] + h[1])
    lo[0] = -(2.0 * h[0] + h[1]) / s0
    hi[0] = h[0] / s0
    s1 = 2.0 * (h[-2] + h[-1])
    lo[-1] = h[-1] / s1
    hi[-1] = -(2.0 * h[-1] + h[-2]) / s1
    return col, lo, hi


def p_to_z(p, grid: TimeGrid) -> np.ndarray:
    """
    Knot derivative values z_0..z_{K-1} implied by the piece parameters p.

    Args:
        p: vector of length K-1.
        grid: the knots.

    Returns:
        Vector of length K.
    """
    _require_knots(grid)
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size != grid.size - 1:
        raise ShapeMismatchError(f"Expected {grid.size - 1} p values, got {p.size}")
    col, lo, hi = _z_stencil(grid.intervals)
    return lo * p[col] + hi * p[col + 1]


def p_to_z_matrix(grid: TimeGrid) -> np.ndarray:
    """The K x (K-1) matrix M with z = M p."""
    _require_knots(grid)
    k = grid.size
    col, lo, hi = _z_stencil(grid.intervals)
    matrix = np.zeros((k, k - 1))
    rows = np.arange(k)
    matrix[rows, col] += lo
    matrix[rows, col + 1] += hi
    return matrix


# ============== Evaluation ==============

def _piece_terms(model: QuadraticSplineModel, t):
    knots = model.grid.knots
    idx = locate_intervals(knots, t, closed="left")
    z = p_to_z(model.p, model.grid)
    h = model.grid.intervals[idx]
    u = np.asarray(t, dtype=float) - knots[idx]
    return idx, z, h, u


def eval_derivative(model: QuadraticSplineModel, t):
    """
    Evaluate the derivative estimate z(t).

    Interior knots are evaluated on the piece that ends there; both pieces
    agree by construction. Raises OutOfDomainError outside [t_1, t_K].
    """
    idx, z, h, u = _piece_terms(model, t)
    v = u - h
    out = (u * u * z[idx + 1] + u * v * model.p[idx] + v * v * z[idx]) / (h * h)
    return float(out) if np.ndim(out) == 0 else out


def eval_signal(model: QuadraticSplineModel, t):
    """Signal estimate x(t) = x0 + integral of z from t_1 to t."""
    idx, z, h, u = _piece_terms(model, t)
    knots_h = model.grid.intervals
    full = knots_h / 3.0 * (z[:-1] + z[1:]) - knots_h / 6.0 * model.p
    cumulative = np.concatenate(([0.0], np.cumsum(full)))
    v = u - h
    partial = (
        z[idx + 1] * u ** 3 / 3.0
        + model.p[idx] * (u ** 3 / 3.0 - h * u * u / 2.0)
        + z[idx] * (v ** 3 + h ** 3) / 3.0
    ) / (h * h)
    out = model.x0 + cumulative[idx] + partial
    return float(out) if np.ndim(out) == 0 else out


def second_derivative_at_ends(model: QuadraticSplineModel) -> Tuple[float, float]:
    """z' slope of the first piece at t_1 and of the last piece at t_K (should be 0)."""
    z = p_to_z(model.p, model.grid)
    h = model.grid.intervals
    first = 2.0 * (z[1] + z[0] + model.p[0]) / h[0] ** 2
    last = 2.0 * (z[-1] + z[-2] + model.p[-1]) / h[-1] ** 2
    return float(first), float(last)


# ============== Design and penalty matrices ==============

def assemble_c(grid: TimeGrid) -> np.ndarray:
    """
    Design matrix C_K mapping Z = [x0, p] to predicted samples at the knots.

    Row k is x0 plus the integral of z over [t_1, t_k]; each piece contributes
    h_i/3 (z_i + z_{i+1}) - h_i/6 p_i.
    """
    _require_knots(grid)
    h = grid.intervals
    n = h.size
    col, lo, hi = _z_stencil(h)
    third = h / 3.0
    rows = np.arange(n)

    increments = np.zeros((n, n))
    # z_i and z_{i+1} each expand into two p columns; p_i enters directly
    np.add.at(increments, (rows, col[:-1]), third * lo[:-1])
    np.add.at(increments, (rows, col[:-1] + 1), third * hi[:-1])
    np.add.at(increments, (rows, col[1:]), third * lo[1:])
    np.add.at(increments, (rows, col[1:] + 1), third * hi[1:])
    np.add.at(increments, (rows, rows), -h / 6.0)

    design = np.zeros((n + 1, n + 1))
    design[:, 0] = 1.0
    design[1:, 1:] = np.cumsum(increments, axis=0)
    return design


def _interval_penalty(h) -> np.ndarray:
    """
    Integral of z'(t)^2 over one piece as a 3x3 form in (z_i, z_{i+1}, p_i).

    On the piece z'(t) = a.v u + b.v with a = [2, 2, 2]/h^2 and b = [-2, 0, -1]/h.
    Accepts a scalar or an array of interval lengths.
    """
    h = np.asarray(h, dtype=float)
    a = np.multiply.outer(2.0 / h ** 2, np.ones(3))
    b = np.multiply.outer(1.0 / h, np.array([-2.0, 0.0, -1.0]))
    aa = a[..., :, None] * a[..., None, :]
    ab = a[..., :, None] * b[..., None, :]
    bb = b[..., :, None] * b[..., None, :]
    h = h[..., None, None]
    return h ** 3 / 3.0 * aa + h ** 2 / 2.0 * (ab + np.swapaxes(ab, -1, -2)) + h * bb


def assemble_q(grid: TimeGrid) -> np.ndarray:
    """
    Penalty matrix Q_K with Z^T Q_K Z equal to the integral of z'(t)^2.

    The first row and column are zero. Each piece touches at most three
    consecutive p columns, so the per-piece forms are reduced to 3x3 blocks
    and scatter-added.
    """
    _require_knots(grid)
    h = grid.intervals
    n = h.size
    col, lo, hi = _z_stencil(h)
    pieces = np.arange(n)
    start = np.clip(pieces - 1, 0, n - 3)

    # Local maps from the three p columns start..start+2 to (z_i, z_{i+1}, p_i)
    local = np.zeros((n, 3, 3))
    np.add.at(local, (pieces, 0, col[:-1] - start), lo[:-1])
    np.add.at(local, (pieces, 0, col[:-1] + 1 - start), hi[:-1])
    np.add.at(local, (pieces, 1, col[1:] - start), lo[1:])
    np.add.at(local, (pieces, 1, col[1:] + 1 - start), hi[1:])
    np.add.at(local, (pieces, 2, pieces - start), 1.0)

    blocks = np.einsum("nai,nab,nbj->nij", local, _interval_penalty(h), local)
    cols = start[:, None] + np.arange(3)[None, :]
    penalty_p = np.zeros((n, n))
    np.add.at(penalty_p, (cols[:, :, None], cols[:, None, :]), blocks)

    penalty = np.zeros((n + 1, n + 1))
    penalty[1:, 1:] = penalty_p
    return penalty


# ============== Appending a knot ==============

def _tail_coefficients(h_a: float, h_b: float, h_c: float) -> dict:
    """
    Coefficients, over the last three p columns of the extended grid, of the
    knot values touched when a knot is appended.

    h_a, h_b, h_c are the last three intervals of the extended grid. Before
    the append the knot between h_b and h_c was the boundary knot; afterwards
    it is interior and a new boundary knot follows.
    """
    ab = 2.0 * (h_a + h_b)
    bc = 2.0 * (h_b + h_c)
    return {
        "z_third_last": np.array([-h_b / ab, -h_a / ab, 0.0]),
        "z_old_boundary": np.array([h_b / ab, -(2.0 * h_b + h_a) / ab, 0.0]),
        "z_second_last": np.array([0.0, -h_c / bc, -h_b / bc]),
        "z_last": np.array([0.0, h_c / bc, -(2.0 * h_c + h_b) / bc]),
        "p_middle": np.array([0.0, 1.0, 0.0]),
        "p_last": np.array([0.0, 0.0, 1.0]),
    }


def extend_design_rows(last_row, h_a: float, h_b: float, h_c: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    The last two rows of C_{K+1} from the last row of C_K, in O(K).

    Args:
        last_row: last row of C_K (length K).
        h_a, h_b, h_c: last three intervals of the extended grid.

    Returns:
        (row for the old last knot, row for the new knot), each of length K+1.
    """
    last_row = np.asarray(last_row, dtype=float)
    tail = _tail_coefficients(h_a, h_b, h_c)

    old_knot_row = np.append(last_row, 0.0)
    old_knot_row[-3:] += h_b / 3.0 * (tail["z_second_last"] - tail["z_old_boundary"])

    new_knot_row = old_knot_row.copy()
    new_knot_row[-3:] += (
        h_c / 3.0 * (tail["z_second_last"] + tail["z_last"]) - h_c / 6.0 * tail["p_last"]
    )
    return old_knot_row, new_knot_row


def delta_q(h_a: float, h_b: float, h_c: float) -> np.ndarray:
    """
    Change of the penalty matrix when a knot is appended.

    Only the lower-right 3x3 block of Q_{K+1} differs from Q_K padded with a
    zero row and column: the piece of length h_b sees its end knot value
    change from the boundary rule to the interior rule, and the new piece of
    length h_c is added.
    """
    tail = _tail_coefficients(h_a, h_b, h_c)
    before = np.vstack([tail["z_third_last"], tail["z_old_boundary"], tail["p_middle"]])
    after = np.vstack([tail["z_third_last"], tail["z_second_last"], tail["p_middle"]])
    added = np.vstack([tail["z_second_last"], tail["z_last"], tail["p_last"]])
    form_b = _interval_penalty(h_b)
    form_c = _interval_penalty(h_c)
    return after.T @ form_b @ after - before.T @ form_b @ before + added.T @ form_c @ added
