import sys
import os
import pytest
import numpy as np

# Add backend to path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "app", "backend")))

from models import TimeGrid, SampleSeries, QuadraticSplineModel
from signal_lab import benchmark_signal


def make_grid(rng, k, h=0.05, start=0.0):
    """Random grid with intervals drawn from Uniform([0.5h, 1.5h])."""
    steps = rng.uniform(0.5 * h, 1.5 * h, size=k - 1)
    return TimeGrid(start + np.concatenate(([0.0], np.cumsum(steps))))


def make_series(rng, k, h=0.05, sigma=1e-3):
    """Noisy samples of the benchmark signal on a random grid."""
    grid = make_grid(rng, k, h)
    x, _ = benchmark_signal(grid.knots)
    return SampleSeries(grid, x + rng.normal(0.0, sigma, size=k))


@pytest.fixture(scope="function")
def rng():
    """
    Seeded generator so every test sees the same draws.
    """
    return np.random.default_rng(20240611)


@pytest.fixture
def grid(rng):
    return make_grid(rng, 12)


@pytest.fixture
def series(rng):
    return make_series(rng, 40)


@pytest.fixture
def quadratic_model(rng, grid):
    """Random quadratic spline model on the random grid."""
    return QuadraticSplineModel(grid=grid, x0=rng.normal(), p=rng.normal(size=grid.size - 1), lam=1e-4)


@pytest.fixture
def out_dir(tmp_path):
    path = tmp_path / "results"
    path.mkdir()
    return str(path)
