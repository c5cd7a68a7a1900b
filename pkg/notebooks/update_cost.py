import sys
import os
import time
sys.path.append(os.path.join(os.getcwd(), 'app', 'backend'))

from schemas import ScenarioSpec
from signal_lab import scenario_series
from solver_batch import solve_batch
from solver_recursive import init, update

SIZES = [100, 200, 400, 800]
UPDATES = 20


def time_sizes():
    series = scenario_series(ScenarioSpec(h=0.001, sigma=1e-4, seed=1))
    print(f"{'K':>6} | {'update (ms)':>12} | {'batch (ms)':>11} | {'ratio':>6}")
    print("-" * 46)
    for k in SIZES:
        state = init(series.prefix(k), 1, 1e-4)
        started = time.perf_counter()
        for j in range(k, k + UPDATES):
            update(state, series.times[j], series.values[j])
        per_update = (time.perf_counter() - started) / UPDATES

        started = time.perf_counter()
        solve_batch(series.prefix(k + UPDATES), 1, 1e-4)
        batch = time.perf_counter() - started
        print(f"{k:>6} | {1e3 * per_update:>12.3f} | {1e3 * batch:>11.3f} | {batch / per_update:>6.1f}")


if __name__ == "__main__":
    time_sizes()
