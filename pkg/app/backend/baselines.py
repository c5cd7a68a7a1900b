"""
Reference online differentiators: the Euler-discretized super-twisting
(Levant) differentiator and a linear high-gain observer with output
saturation.

Both are driven by the actual non-uniform steps h_k = t_{k+1} - t_k: the
state at t_k is advanced to t_{k+1} with the measurement y_k. The estimate
reported at t_1 is the (zero) initial state.
"""
import logging
import math
from dataclasses import dataclass
from typing import Tuple, Optional

import numpy as np

from exceptions import ConfigurationError, InsufficientDataError
from models import SampleSeries
from schemas import LevantParams, HgoParams, ScenarioSpec
from signal_lab import scenario_series, truth
from utils import windowed_rmse

logger = logging.getLogger(__name__)

# ε search grid for tune_hgo
HGO_EPS_GRID = np.logspace(-3, 0, 25)


# ============== Levant (super-twisting) ==============

@dataclass(frozen=True)
class LevantState:
    x0: float = 0.0
    x1: float = 0.0
    L: float = 2.5

    def __post_init__(self):
        if not self.L > 0:
            raise ConfigurationError(f"Levant constant L must be > 0, got {self.L}")

    @property
    def gains(self) -> Tuple[float, float]:
        return 1.5 * math.sqrt(self.L), 1.1 * self.L


def levant_step(state: LevantState, h: float, y: float) -> Tuple[LevantState, float]:
    """One explicit Euler step with e = x0 - y; returns the new derivative estimate."""
    l1, l2 = state.gains
    e = state.x0 - y
    s = math.copysign(1.0, e) if e != 0 else 0.0
    x0 = state.x0 + h * (state.x1 - l1 * math.sqrt(abs(e)) * s)
    x1 = state.x1 - h * l2 * s
    return LevantState(x0=x0, x1=x1, L=state.L), x1


def levant_stream(series: SampleSeries, params: LevantParams, initial: Optional[LevantState] = None) -> np.ndarray:
    """Derivative estimate at every knot."""
    state = LevantState(initial.x0, initial.x1, params.L) if initial else LevantState(L=params.L)
    times = series.times.tolist()
    values = series.values.tolist()
    out = np.empty(len(times))
    out[0] = state.x1
    for k in range(len(times) - 1):
        state, out[k + 1] = levant_step(state, times[k + 1] - times[k], values[k])
    return out


# ============== High-gain observer ==============

@dataclass(frozen=True)
class HgoState:
    x0: float = 0.0
    x1: float = 0.0
    eps: float = 0.01
    sat: float = 2.5

    def __post_init__(self):
        if not (self.eps > 0 and self.sat > 0):
            raise ConfigurationError(f"HGO needs eps > 0 and sat > 0, got eps={self.eps}, sat={self.sat}")


def hgo_step(state: HgoState, h: float, y: float) -> Tuple[HgoState, float]:
    """
    One explicit Euler step with gains (2/eps, 1/eps^2) and e = y - x0.

    Saturation acts on the reported derivative only; the internal state is
    left unclamped so the observer stays linear.
    """
    e = y - state.x0
    x0 = state.x0 + h * (state.x1 + 2.0 * e / state.eps)
    x1 = state.x1 + h * e / state.eps ** 2
    return HgoState(x0=x0, x1=x1, eps=state.eps, sat=state.sat), min(max(x1, -state.sat), state.sat)


def hgo_stream(series: SampleSeries, params: HgoParams, initial: Optional[HgoState] = None) -> np.ndarray:
    """Saturated derivative estimate at every knot."""
    x0, x1 = (initial.x0, initial.x1) if initial else (0.0, 0.0)
    state = HgoState(x0, x1, eps=params.eps, sat=params.sat)
    times = series.times.tolist()
    values = series.values.tolist()
    out = np.empty(len(times))
    out[0] = min(max(state.x1, -state.sat), state.sat)
    for k in range(len(times) - 1):
        state, out[k + 1] = hgo_step(state, times[k + 1] - times[k], values[k])
    return out


def tune_hgo(spec: ScenarioSpec, sat: float = 2.5) -> float:
    """
    Grid search of eps over logspace(1e-3, 1, 25) minimizing the steady-state
    RMSE on the scenario (whose seed should be reserved for tuning).

    Raises:
        InsufficientDataError: fewer than 4 samples.
    """
    series = scenario_series(spec)
    if series.grid.size < 4:
        raise InsufficientDataError(f"HGO tuning needs at least 4 samples, got {series.grid.size}")
    _, z_true = truth(series, spec.signal_id)

    scores = []
    with np.errstate(over="ignore", invalid="ignore"):
        for eps in HGO_EPS_GRID:
            estimate = hgo_stream(series, HgoParams(eps=float(eps), sat=sat))
            score = windowed_rmse(estimate, z_true, series.times)
            scores.append(score if np.isfinite(score) else np.inf)
    best = float(HGO_EPS_GRID[int(np.argmin(scores))])
    logger.info(f"Tuned HGO eps={best:.4g} for h={spec.h:g}, sigma={spec.sigma:g} (seed {spec.seed})")
    return best
