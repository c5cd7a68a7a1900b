"""
Batch solve of the penalized least-squares problem

    minimize ||C_K Z - Y||^2 + lam Z^T Q_K Z   <=>   (C_K^T C_K + lam Q_K) Z = C_K^T Y

for either spline order. A_K is factored with Cholesky, falling back to LU when
the symmetric factorization fails, and the reciprocal condition number is
estimated from the factor with LAPACK (pocon / gecon).
"""
import logging
import warnings
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.linalg import (
    LinAlgError, LinAlgWarning, cho_factor, cho_solve, get_lapack_funcs, lu_factor, lu_solve,
)

import spline_quadratic
import spline_zero
from exceptions import ConfigurationError, SingularSystemError
from models import TimeGrid, SampleSeries, BatchSolution, QuadraticSplineModel, ZeroOrderSplineModel
from settings import CONDITION_LIMIT

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-9


def assemble_system(grid: TimeGrid, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """(C_K, Q_K) for the requested spline order."""
    if order == 1:
        return spline_quadratic.assemble_c(grid), spline_quadratic.assemble_q(grid)
    if order == 0:
        return spline_zero.assemble_c(grid), spline_zero.assemble_q(grid)
    raise ConfigurationError(f"Unsupported spline order {order!r} (expected 0 or 1)")


@dataclass
class SystemFactor:
    """A factored normal-equation matrix with its condition estimate."""
    matrix: np.ndarray
    method: str
    factor: tuple
    rcond: float

    @property
    def condition_estimate(self) -> float:
        return float("inf") if self.rcond <= 0 else 1.0 / self.rcond

    def _raw_solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.method == "cholesky":
            return cho_solve(self.factor, rhs)
        return lu_solve(self.factor, rhs)

    def solve(self, rhs) -> np.ndarray:
        """Solve A x = rhs with one step of iterative refinement."""
        rhs = np.asarray(rhs, dtype=float)
        x = self._raw_solve(rhs)
        x = x + self._raw_solve(rhs - self.matrix @ x)

        residual = np.linalg.norm(self.matrix @ x - rhs)
        scale = max(1.0, float(np.linalg.norm(rhs)))
        if residual > RESIDUAL_TOLERANCE * scale:
            logger.warning(
                f"Normal-equation residual {residual:.3e} exceeds {RESIDUAL_TOLERANCE:g} x {scale:.3e} "
                f"(condition estimate {self.condition_estimate:.3e})"
            )
        return x

    def inverse(self) -> np.ndarray:
        inv = self._raw_solve(np.eye(self.matrix.shape[0]))
        if self.method == "cholesky":
            inv = 0.5 * (inv + inv.T)
        return inv


def factorize(matrix: np.ndarray, lam: float) -> SystemFactor:
    """
    Factor A_K and estimate its condition number.

    Raises:
        SingularSystemError: A_K singular or with condition estimate above
            CONDITION_LIMIT. The message names lam and K.
    """
    matrix = np.asarray(matrix, dtype=float)
    k = matrix.shape[0]
    anorm = float(np.linalg.norm(matrix, 1))

    try:
        factor = cho_factor(matrix, lower=True)
        pocon, = get_lapack_funcs(("pocon",), (matrix,))
        rcond, info = pocon(factor[0], anorm, uplo="L")
        method = "cholesky"
    except LinAlgError:
        logger.warning(f"Cholesky failed for K={k}, lam={lam:g}; falling back to LU")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LinAlgWarning)
            factor = lu_factor(matrix)
        gecon, = get_lapack_funcs(("gecon",), (matrix,))
        rcond, info = gecon(factor[0], anorm, norm="1")
        method = "lu"

    if info != 0 or not np.isfinite(rcond) or rcond * CONDITION_LIMIT < 1.0:
        raise SingularSystemError(
            f"Normal-equation matrix is singular or ill-conditioned for lam={lam:g}, K={k} "
            f"(reciprocal condition estimate {rcond:.3e}); increase lam or check the sample times"
        )
    return SystemFactor(matrix=matrix, method=method, factor=factor, rcond=float(rcond))


def normal_equations(series: SampleSeries, order: int, lam: float):
    """(A_K, C_K^T Y, C_K, Q_K) for a sample series."""
    if lam < 0:
        raise ConfigurationError(f"lam must be >= 0, got {lam}")
    design, penalty = assemble_system(series.grid, order)
    matrix = design.T @ design + lam * penalty
    rhs = design.T @ series.values
    return matrix, rhs, design, penalty


def build_model(grid: TimeGrid, order: int, parameters, lam: float):
    """Wrap a parameter vector [x0, ...] into the model type of the given order."""
    parameters = np.asarray(parameters, dtype=float)
    if order == 1:
        return QuadraticSplineModel(grid=grid, x0=parameters[0], p=parameters[1:], lam=lam)
    return ZeroOrderSplineModel(grid=grid, x0=parameters[0], z=parameters[1:], lam=lam)


def solve_batch(series: SampleSeries, order: int, lam: float) -> BatchSolution:
    """
    Fit a spline of the given order to a complete sample set.

    Args:
        series: samples (K >= 2 for order 0, K >= 4 for order 1).
        order: 0 (piecewise constant) or 1 (quadratic).
        lam: penalty weight, >= 0.

    Returns:
        BatchSolution with the fitted model, ||C Z - Y|| and Z^T Q Z.
    """
    matrix, rhs, design, penalty = normal_equations(series, order, lam)
    factor = factorize(matrix, lam)
    parameters = factor.solve(rhs)

    residual = float(np.linalg.norm(design @ parameters - series.values))
    penalty_value = float(parameters @ penalty @ parameters)
    logger.debug(
        f"Batch solve order={order} K={series.grid.size} lam={lam:g}: "
        f"residual={residual:.3e} penalty={penalty_value:.3e} cond~{factor.condition_estimate:.2e}"
    )
    return BatchSolution(
        model=build_model(series.grid, order, parameters, lam),
        residual_norm=residual,
        penalty_value=penalty_value,
        condition_estimate=factor.condition_estimate,
    )
