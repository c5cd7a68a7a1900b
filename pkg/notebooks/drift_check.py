import sys
import os
sys.path.append(os.path.join(os.getcwd(), 'app', 'backend'))

from schemas import ScenarioSpec
from signal_lab import scenario_series
from solver_batch import solve_batch
from solver_recursive import init, update
from utils import relative_difference

CHECKPOINTS = [50, 100, 250, 500, 1000]


def drift(order=1, lam=1e-4, refactor_every=0):
    """Relative distance between the recursive and batch solutions along one long stream."""
    series = scenario_series(ScenarioSpec(h=0.001, sigma=1e-4, seed=3))
    start = 5 if order == 1 else 2
    state = init(series.prefix(start), order, lam, refactor_every=refactor_every)
    print(f"order={order} lam={lam:g} refactor_every={refactor_every}")
    for k in range(start, CHECKPOINTS[-1]):
        update(state, series.times[k], series.values[k])
        if k + 1 in CHECKPOINTS:
            batch = solve_batch(series.prefix(k + 1), order, lam).parameters
            print(f"  K={k + 1:>5}  drift={relative_difference(state.z_hat, batch):.3e}")


if __name__ == "__main__":
    drift(order=1)
    drift(order=1, refactor_every=200)
    drift(order=0)
