"""
Utility functions for Spline-Diff.
"""
import numpy as np

from exceptions import OutOfDomainError

# Significant digits used whenever floats are written to text files
FLOAT_DIGITS = 17


def format_float(value: float) -> str:
    """Format a float so that parsing it back reproduces the same double."""
    return f"{float(value):.{FLOAT_DIGITS}g}"


def locate_intervals(knots: np.ndarray, t, closed: str = "left") -> np.ndarray:
    """
    Find the piece index i (0-based) with t in piece [t_i, t_{i+1}] for each t.

    Args:
        knots: strictly increasing knot vector of length K.
        t: scalar or array of evaluation times, all inside [t_1, t_K].
        closed: which piece owns an interior knot. "left" gives the piece
            ending at the knot (quadratic splines), "right" the piece starting
            there (right-open zero-order pieces). t_1 always maps to the first
            piece and t_K to the last.

    Returns:
        Integer array of piece indices in [0, K-2], same shape as t.
    """
    t = np.asarray(t, dtype=float)
    lo, hi = knots[0], knots[-1]
    outside = (t < lo) | (t > hi) | ~np.isfinite(t)
    if np.any(outside):
        bad = t[outside].flat[0] if t.ndim else float(t)
        raise OutOfDomainError(f"t={bad!r} is outside the fitted range [{lo!r}, {hi!r}]")
    side = "left" if closed == "left" else "right"
    idx = np.searchsorted(knots, t, side=side) - 1
    return np.clip(idx, 0, knots.size - 2)


def relative_difference(a: np.ndarray, b: np.ndarray) -> float:
    """Norm-wise relative difference ||a - b|| / max(||b||, tiny)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(float(np.linalg.norm(b)), np.finfo(float).tiny)
    return float(np.linalg.norm(a - b) / scale)


def steady_state_mask(times: np.ndarray, start_fraction: float = 1.0 / 3.0) -> np.ndarray:
    """Knots with t >= start_fraction * T, T being the last knot."""
    times = np.asarray(times, dtype=float)
    return times >= start_fraction * times[-1]


def windowed_rmse(estimates, truth, times, start_fraction: float = 1.0 / 3.0) -> float:
    """RMSE of estimates against truth over the steady-state window; NaN if the window is empty."""
    mask = steady_state_mask(times, start_fraction)
    if not np.any(mask):
        return float("nan")
    err = np.asarray(estimates, dtype=float)[mask] - np.asarray(truth, dtype=float)[mask]
    return float(np.sqrt(np.mean(err * err)))
