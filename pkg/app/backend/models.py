"""
Numeric domain types for Spline-Diff.

Types:
- TimeGrid: strictly increasing sample instants t_1..t_K and intervals h_k
- SampleSeries: a TimeGrid paired with noisy measurements y_1..y_K
- QuadraticSplineModel: the m = 1 estimate, parameters [x(t_1), p_1..p_{K-1}]
- ZeroOrderSplineModel: the m = 0 estimate, parameters [x(t_1), z_1..z_{K-1}]
- BatchSolution: a fitted model with its residual and penalty values

These hold numpy arrays and are immutable once built. Validated configuration
and serialized contracts live in schemas.py instead.
"""
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from exceptions import OrderingError, InsufficientDataError, ShapeMismatchError


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """
    Strictly increasing sampling instants.

    The grid does not require t_1 = 0: CSV data may start anywhere. Generated
    scenario grids always start at 0 and end at the horizon.
    """
    knots: np.ndarray
    intervals: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        knots = _frozen_array(self.knots).reshape(-1)
        if knots.size < 2:
            raise InsufficientDataError(f"A time grid needs at least 2 knots, got {knots.size}")
        if not np.all(np.isfinite(knots)):
            raise OrderingError("Time grid contains non-finite instants")
        intervals = np.diff(knots)
        bad = np.flatnonzero(intervals <= 0)
        if bad.size:
            k = int(bad[0])
            raise OrderingError(
                f"Knots must be strictly increasing: t[{k + 2}]={knots[k + 1]!r} "
                f"does not exceed t[{k + 1}]={knots[k]!r}"
            )
        intervals.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "intervals", intervals)

    @property
    def size(self) -> int:
        return int(self.knots.size)

    @property
    def start(self) -> float:
        return float(self.knots[0])

    @property
    def horizon(self) -> float:
        return float(self.knots[-1])

    def extended(self, t_new: float) -> "TimeGrid":
        """Return a new grid with one more knot appended."""
        return TimeGrid(np.append(self.knots, t_new))

    def prefix(self, count: int) -> "TimeGrid":
        return TimeGrid(self.knots[:count])


@dataclass(frozen=True, eq=False)
class SampleSeries:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen_array(self.values).reshape(-1)
        if values.size != self.grid.size:
            raise ShapeMismatchError(
                f"Series has {values.size} values for {self.grid.size} knots"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def from_arrays(cls, times, values) -> "SampleSeries":
        return cls(TimeGrid(times), values)

    @property
    def times(self) -> np.ndarray:
        return self.grid.knots

    def __len__(self) -> int:
        return self.grid.size

    def prefix(self, count: int) -> "SampleSeries":
        return SampleSeries(self.grid.prefix(count), self.values[:count])


@dataclass(frozen=True, eq=False)
class QuadraticSplineModel:
    """
    Quadratic-spline derivative estimate (m = 1).

    The knot values z_1..z_K are not stored; they are derived from p through
    the continuity and natural boundary conditions (spline_quadratic.p_to_z).
    """
    grid: TimeGrid
    x0: float
    p: np.ndarray
    lam: float

    def __post_init__(self):
        p = _frozen_array(self.p).reshape(-1)
        if self.grid.size < 4:
            raise InsufficientDataError(
                f"Quadratic splines need K >= 4 knots, got {self.grid.size}"
            )
        if p.size != self.grid.size - 1:
            raise ShapeMismatchError(f"Expected {self.grid.size - 1} p values, got {p.size}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "x0", float(self.x0))

    @property
    def order(self) -> int:
        return 1

    @property
    def parameters(self) -> np.ndarray:
        return np.concatenate(([self.x0], self.p))


@dataclass(frozen=True, eq=False)
class ZeroOrderSplineModel:
    """Piecewise-constant derivative estimate (m = 0)."""
    grid: TimeGrid
    x0: float
    z: np.ndarray
    lam: float

    def __post_init__(self):
        z = _frozen_array(self.z).reshape(-1)
        if z.size != self.grid.size - 1:
            raise ShapeMismatchError(f"Expected {self.grid.size - 1} z values, got {z.size}")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "x0", float(self.x0))

    @property
    def order(self) -> int:
        return 0

    @property
    def parameters(self) -> np.ndarray:
        return np.concatenate(([self.x0], self.z))


SplineModel = Union[QuadraticSplineModel, ZeroOrderSplineModel]


@dataclass(frozen=True, eq=False)
class BatchSolution:
    model: SplineModel
    residual_norm: float
    penalty_value: float
    condition_estimate: float = float("nan")

    @property
    def parameters(self) -> np.ndarray:
        return self.model.parameters
