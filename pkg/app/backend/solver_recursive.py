"""
Online (recursive) solver: keeps A_K^-1 and the current solution and absorbs
each new sample in O(K^2) without refactorizing.

Zero-order: A_{K+1} = blockdiag(A_K, lam h_K) + H H^T, a rank-one
Sherman-Morrison update of a block-diagonal matrix.

Quadratic: appending a knot changes only the last row of C, adds one row,
and touches the lower-right 3x3 block of Q. The leading K x K block A_s of
A_{K+1} is A_K plus three low-rank corrections, applied with the
Sherman-Morrison-Woodbury formula; A_{K+1}^-1 then follows from the block
inversion formula with the Schur complement 1 / d_s = a_s - U_s^T A_s^-1 U_s.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import block_diag

import spline_quadratic
import spline_zero
from exceptions import (
    ConfigurationError, InsufficientDataError, NumericalBreakdownError, OrderingError,
)
from models import TimeGrid, SampleSeries
from schemas import StateSnapshot
from settings import BREAKDOWN_RATIO, INNER_CONDITION_LIMIT
from solver_batch import build_model, factorize, normal_equations

logger = logging.getLogger(__name__)

MIN_KNOTS = {0: 2, 1: 5}


@dataclass
class RecursiveState:
    """
    Working set of one online estimation stream.

    Single-writer: update functions mutate the state in place and return it.
    """
    order: int
    grid: TimeGrid
    values: np.ndarray
    lam: float
    a_inv: np.ndarray
    z_hat: np.ndarray
    b_vec: Optional[np.ndarray] = None
    last_row: Optional[np.ndarray] = None
    update_count: int = 0
    refactor_every: int = 0

    @property
    def size(self) -> int:
        return self.grid.size

    @property
    def series(self) -> SampleSeries:
        return SampleSeries(self.grid, self.values)

    @property
    def model(self):
        return build_model(self.grid, self.order, self.z_hat, self.lam)


# ============== Initialization / refactorization ==============

def _factor_state(state: RecursiveState) -> RecursiveState:
    matrix, rhs, design, _ = normal_equations(state.series, state.order, state.lam)
    factor = factorize(matrix, state.lam)
    state.z_hat = factor.solve(rhs)
    state.a_inv = factor.inverse()
    state.b_vec = rhs if state.order == 0 else None
    state.last_row = design[-1].copy() if state.order == 1 else None
    state.update_count = 0
    return state


def init(series: SampleSeries, order: int, lam: float, refactor_every: int = 0) -> RecursiveState:
    """
    Start a stream from a sample prefix with one batch solve and explicit inversion.

    Raises:
        InsufficientDataError: prefix shorter than 5 knots (order 1) or 2 (order 0).
        SingularSystemError: passed through from the batch factorization.
    """
    if order not in MIN_KNOTS:
        raise ConfigurationError(f"Unsupported spline order {order!r} (expected 0 or 1)")
    if series.grid.size < MIN_KNOTS[order]:
        raise InsufficientDataError(
            f"Recursive order-{order} estimation needs at least {MIN_KNOTS[order]} samples, "
            f"got {series.grid.size}"
        )
    state = RecursiveState(
        order=order,
        grid=series.grid,
        values=np.array(series.values, dtype=float),
        lam=float(lam),
        a_inv=np.empty((0, 0)),
        z_hat=np.empty(0),
        refactor_every=refactor_every,
    )
    return _factor_state(state)


def refactorize(state: RecursiveState) -> RecursiveState:
    """Recompute A_K^-1 and the solution from scratch and reset the update count."""
    logger.info(f"Refactorizing order-{state.order} state at K={state.size} after {state.update_count} updates")
    return _factor_state(state)


def _check_new_time(state: RecursiveState, t_new: float) -> float:
    t_new = float(t_new)
    last = state.grid.horizon
    if not np.isfinite(t_new) or t_new <= last:
        raise OrderingError(f"New sample time {t_new!r} must exceed the last knot {last!r}")
    return t_new


def _append_sample(state: RecursiveState, t_new: float, y_new: float) -> None:
    state.grid = state.grid.extended(t_new)
    state.values = np.append(state.values, float(y_new))
    state.update_count += 1


# ============== Zero-order update ==============

def update_zero(state: RecursiveState, t_new: float, y_new: float) -> RecursiveState:
    """
    Absorb (t_new, y_new) into a zero-order state.

    Raises:
        ConfigurationError: lam = 0 (the new diagonal block 1/(lam h) is undefined).
        OrderingError: t_new not after the last knot.
    """
    if state.lam <= 0:
        raise ConfigurationError("Recursive zero-order updates require lam > 0")
    t_new = _check_new_time(state, t_new)
    k = state.size
    h_new = t_new - state.grid.horizon
    row = spline_zero.design_row(state.grid.extended(t_new))

    w = np.empty(k + 1)
    w[:k] = state.a_inv @ row[:k]
    w[k] = row[k] / (state.lam * h_new)
    denom = 1.0 + row @ w

    a_inv = np.zeros((k + 1, k + 1))
    a_inv[:k, :k] = state.a_inv
    a_inv[k, k] = 1.0 / (state.lam * h_new)
    a_inv -= np.outer(w, w) / denom

    b_vec = np.append(state.b_vec, 0.0) + row * y_new

    state.a_inv = a_inv
    state.b_vec = b_vec
    state.z_hat = a_inv @ b_vec
    _append_sample(state, t_new, y_new)
    return state


# ============== Quadratic update ==============

@dataclass
class QuadraticIncrement:
    """Quantities of one quadratic update, for inspection."""
    delta_c: np.ndarray
    delta_q: np.ndarray
    delta_a: np.ndarray
    a_s: np.ndarray
    u_s: np.ndarray
    corner: float
    b_vector: np.ndarray


@dataclass
class _QuadraticTerms:
    old_knot_row: np.ndarray
    new_knot_row: np.ndarray
    dq: np.ndarray
    b_vector: np.ndarray
    low_rank: List[Tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    u_s: np.ndarray = None
    corner: float = 0.0


def _quadratic_terms(state: RecursiveState, t_new: float, y_new: float) -> _QuadraticTerms:
    k = state.size
    if k < MIN_KNOTS[1]:
        raise InsufficientDataError(f"Recursive quadratic updates need K >= {MIN_KNOTS[1]}, got {k}")
    knots = state.grid.knots
    h_a = knots[-2] - knots[-3]
    h_b = knots[-1] - knots[-2]
    h_c = t_new - knots[-1]

    old_row = state.last_row
    old_knot_row, new_knot_row = spline_quadratic.extend_design_rows(old_row, h_a, h_b, h_c)
    dq = spline_quadratic.delta_q(h_a, h_b, h_c)
    lam = state.lam

    # b = dC^T [y_K, y_{K+1}] - dA [Z_K; 0]
    padded_z = np.append(state.z_hat, 0.0)
    padded_old = np.append(old_row, 0.0)
    b_vector = (old_knot_row - padded_old) * state.values[-1] + new_knot_row * y_new
    b_vector -= (
        old_knot_row * (old_knot_row @ padded_z)
        + new_knot_row * (new_knot_row @ padded_z)
        - padded_old * (padded_old @ padded_z)
    )
    b_vector[-3:] -= lam * (dq @ padded_z[-3:])

    # A_s = A_K + r1 r1^T - r0 r0^T + r2 r2^T + lam E dQ_s E^T
    r1, r2 = old_knot_row[:k], new_knot_row[:k]
    unit = np.zeros((k, 2))
    unit[k - 2, 0] = unit[k - 1, 1] = 1.0
    low_rank = [
        (np.column_stack([r1, old_row]), np.diag([1.0, -1.0])),
        (r2[:, None], np.ones((1, 1))),
    ]
    if lam != 0:
        low_rank.append((unit, lam * dq[:2, :2]))

    u_s = old_knot_row[k] * r1 + new_knot_row[k] * r2
    u_s[k - 2:] += lam * dq[:2, 2]
    corner = old_knot_row[k] ** 2 + new_knot_row[k] ** 2 + lam * dq[2, 2]
    return _QuadraticTerms(old_knot_row, new_knot_row, dq, b_vector, low_rank, u_s, corner)


def _corrected(base: np.ndarray, x: np.ndarray, corrections) -> np.ndarray:
    """Apply A_cur^-1 = A^-1 - sum W M W^T to x given base = A^-1 x."""
    out = base.copy()
    for w, m in corrections:
        out -= w @ (m @ (w.T @ x))
    return out


def update_quadratic(state: RecursiveState, t_new: float, y_new: float) -> RecursiveState:
    """
    Absorb (t_new, y_new) into a quadratic state in O(K^2).

    Raises:
        NumericalBreakdownError: an inner SMW system or the Schur complement
            lost accuracy; refactorize and retry.
        OrderingError: t_new not after the last knot.
    """
    t_new = _check_new_time(state, t_new)
    terms = _quadratic_terms(state, t_new, y_new)
    k = state.size
    a_inv = state.a_inv
    b_head, b_tail = terms.b_vector[:k], terms.b_vector[k]

    # All products with the old inverse in one pass
    raw = [u for u, _ in terms.low_rank]
    stacked = np.column_stack(raw + [terms.u_s, b_head])
    base = a_inv @ stacked
    offsets = np.cumsum([0] + [u.shape[1] for u in raw])

    corrections = []
    for j, (u, coupling) in enumerate(terms.low_rank):
        w = _corrected(base[:, offsets[j]:offsets[j + 1]], u, corrections)
        inner = np.eye(u.shape[1]) + coupling @ (u.T @ w)
        cond = np.linalg.cond(inner)
        if not np.isfinite(cond) or cond > INNER_CONDITION_LIMIT:
            raise NumericalBreakdownError(
                f"Low-rank update {j + 1} at K={k} is ill-conditioned (cond {cond:.3e}); refactorize the state"
            )
        corrections.append((w, np.linalg.solve(inner, coupling)))

    v = _corrected(base[:, -2], terms.u_s, corrections)
    solved_head = _corrected(base[:, -1], b_head, corrections)

    schur = terms.corner - terms.u_s @ v
    if not np.isfinite(schur) or abs(schur) < BREAKDOWN_RATIO * abs(terms.corner):
        raise NumericalBreakdownError(
            f"Schur complement {schur:.3e} vanished relative to a_s={terms.corner:.3e} at K={k}; "
            f"refactorize the state"
        )
    d_s = 1.0 / schur
    logger.debug(f"Quadratic update K={k}->{k + 1}: d_s={d_s:.3e}")

    new_p = d_s * (b_tail - v @ b_head)
    delta_head = solved_head - v * new_p

    all_w = np.column_stack([w for w, _ in corrections] + [v])
    all_m = block_diag(*[m for _, m in corrections], [[-d_s]])
    top = a_inv - (all_w @ all_m) @ all_w.T

    new_inv = np.empty((k + 1, k + 1))
    new_inv[:k, :k] = 0.5 * (top + top.T)
    new_inv[:k, k] = new_inv[k, :k] = -d_s * v
    new_inv[k, k] = d_s

    state.a_inv = new_inv
    state.z_hat = np.append(state.z_hat + delta_head, new_p)
    state.last_row = terms.new_knot_row
    _append_sample(state, t_new, y_new)
    return state


def quadratic_increment(state: RecursiveState, t_new: float, y_new: float) -> QuadraticIncrement:
    """
    The dense update quantities for appending (t_new, y_new), without
    changing the state: dC (2 x (K+1)), dQ (3 x 3), dA, A_s, U_s, a_s and b.
    A_s is built from a fresh A_K, so this costs O(K^3).
    """
    t_new = _check_new_time(state, t_new)
    terms = _quadratic_terms(state, t_new, y_new)
    k = state.size
    padded_old = np.append(state.last_row, 0.0)
    delta_c = np.vstack([terms.old_knot_row - padded_old, terms.new_knot_row])

    delta_a = (
        np.outer(terms.old_knot_row, terms.old_knot_row)
        + np.outer(terms.new_knot_row, terms.new_knot_row)
        - np.outer(padded_old, padded_old)
    )
    delta_a[-3:, -3:] += state.lam * terms.dq

    a_k = normal_equations(state.series, 1, state.lam)[0]
    a_s = a_k + delta_a[:k, :k]
    return QuadraticIncrement(
        delta_c=delta_c,
        delta_q=terms.dq,
        delta_a=delta_a,
        a_s=a_s,
        u_s=terms.u_s,
        corner=float(terms.corner),
        b_vector=terms.b_vector,
    )


# ============== Dispatch ==============

def update(state: RecursiveState, t_new: float, y_new: float) -> RecursiveState:
    """
    Absorb one sample, refactorizing once on breakdown and every
    `refactor_every` updates when that is set.
    """
    step = update_quadratic if state.order == 1 else update_zero
    try:
        step(state, t_new, y_new)
    except NumericalBreakdownError as exc:
        logger.warning(f"{exc}; refactorizing and retrying")
        refactorize(state)
        step(state, t_new, y_new)

    if state.refactor_every and state.update_count >= state.refactor_every:
        refactorize(state)
    return state


def endpoint_estimate(state: RecursiveState) -> float:
    """Derivative estimate at the last knot."""
    if state.order == 1:
        return float(spline_quadratic.p_to_z(state.z_hat[1:], state.grid)[-1])
    return float(state.z_hat[-1])


def run_stream(series: SampleSeries, order: int, lam: float, refactor_every: int = 0) -> np.ndarray:
    """
    Endpoint estimates for every prefix of a series.

    Entry k is the estimate at t_k using samples 1..k; prefixes shorter than
    the order's minimum are NaN.
    """
    minimum = MIN_KNOTS[order]
    k = series.grid.size
    estimates = np.full(k, np.nan)
    if k < minimum:
        return estimates
    state = init(series.prefix(minimum), order, lam, refactor_every=refactor_every)
    estimates[minimum - 1] = endpoint_estimate(state)
    times, values = series.times, series.values
    for j in range(minimum, k):
        update(state, times[j], values[j])
        estimates[j] = endpoint_estimate(state)
    return estimates


# ============== Snapshots ==============

def to_snapshot(state: RecursiveState) -> StateSnapshot:
    return StateSnapshot(
        order=state.order,
        lam=state.lam,
        knots=state.grid.knots.tolist(),
        values=state.values.tolist(),
        z_hat=state.z_hat.tolist(),
        a_inv=state.a_inv.tolist(),
        b_vec=None if state.b_vec is None else state.b_vec.tolist(),
        last_row=None if state.last_row is None else state.last_row.tolist(),
        update_count=state.update_count,
        refactor_every=state.refactor_every,
    )


def from_snapshot(snapshot: StateSnapshot) -> RecursiveState:
    return RecursiveState(
        order=snapshot.order,
        grid=TimeGrid(snapshot.knots),
        values=np.array(snapshot.values, dtype=float),
        lam=snapshot.lam,
        a_inv=np.array(snapshot.a_inv, dtype=float),
        z_hat=np.array(snapshot.z_hat, dtype=float),
        b_vec=None if snapshot.b_vec is None else np.array(snapshot.b_vec, dtype=float),
        last_row=None if snapshot.last_row is None else np.array(snapshot.last_row, dtype=float),
        update_count=snapshot.update_count,
        refactor_every=snapshot.refactor_every,
    )


def save_state(state: RecursiveState, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(to_snapshot(state).model_dump_json(indent=2))
    logger.info(f"Saved order-{state.order} state (K={state.size}) to {path}")


def load_state(path: str) -> RecursiveState:
    with open(path) as fh:
        return from_snapshot(StateSnapshot.model_validate_json(fh.read()))
