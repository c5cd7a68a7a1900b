import math
import os

import numpy as np
import pytest
from unittest.mock import patch

import bench
from bench import dense_evaluation, knot_derivatives, large_online_rows, rmse_full, rmse_online, run_grid
from exceptions import ConfigurationError, DataError, InsufficientDataError
from models import SampleSeries
from reporting import rank_marks, render_table, write_results_csv
from schemas import BenchConfig, BenchRow, EstimatorConfig, ExperimentResult, ScenarioSpec
from settings import default_bench_config, load_bench_config
from solver_batch import solve_batch
from spline_quadratic import eval_derivative
from tests.conftest import make_grid


def small_config(**overrides):
    data = {
        "rows": [BenchRow(h=0.05, sigma=1e-4, hgo_eps=0.05)],
        "seeds": 2,
        "methods": ["spline2", "spline0", "levant", "hgo"],
    }
    data.update(overrides)
    return BenchConfig(**data)


class TestRmseFull:
    def test_exact_estimates(self):
        t = np.linspace(0.0, 1.0, 11)
        assert rmse_full(np.cos(t), np.cos(t), t) == 0.0

    def test_constant_error(self):
        t = np.linspace(0.0, 1.0, 11)
        assert rmse_full(np.full(11, 0.3), np.zeros(11), t) == pytest.approx(0.3)

    def test_window_starts_at_one_third(self):
        """Errors [9, 9, 9, 9, 3, 4] on t = 0..5: only the last four knots count."""
        t = np.arange(6.0)
        estimates = np.array([9.0, 9.0, 9.0, 9.0, 3.0, 4.0])
        assert rmse_full(estimates, np.zeros(6), t) == pytest.approx(math.sqrt(187 / 4))

    def test_empty_window(self):
        t = np.array([-3.0, -2.0, -1.0])
        with pytest.raises(DataError):
            rmse_full(np.zeros(3), np.zeros(3), t)

    def test_misaligned(self):
        with pytest.raises(DataError):
            rmse_full(np.zeros(4), np.zeros(5), np.arange(5.0))


class TestRmseOnline:
    def test_linear_data_near_interpolation(self, rng):
        grid = make_grid(rng, 60)
        series = SampleSeries(grid, 1.0 + 2.0 * grid.knots)
        config = EstimatorConfig(method="spline0", lam=1e-8)
        assert rmse_online(series, config, z_true=np.full(60, 2.0)) <= 1e-4

    def test_series_too_short(self, series):
        with pytest.raises(InsufficientDataError):
            rmse_online(series.prefix(4), EstimatorConfig(method="spline2"))

    def test_hgo_needs_epsilon(self, series):
        with pytest.raises(ConfigurationError):
            rmse_online(series, EstimatorConfig(method="hgo"))


class TestEstimates:
    def test_knot_derivatives_match_model(self, series):
        model = solve_batch(series, 1, 1e-4).model
        np.testing.assert_allclose(knot_derivatives(model), eval_derivative(model, series.times), atol=1e-12)

    def test_dense_evaluation(self, series):
        model = solve_batch(series, 0, 1e-4).model
        t, z = dense_evaluation(model, per_interval=4)
        assert t.shape == z.shape == (4 * (len(series) - 1) + 1,)
        assert t[-1] == series.times[-1]
        np.testing.assert_array_equal(z[::4], knot_derivatives(model))


class TestGrid:
    def test_reproducible_bytes(self, tmp_path):
        config = small_config()
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        write_results_csv(run_grid(config), str(first))
        write_results_csv(run_grid(config), str(second))
        assert first.read_bytes() == second.read_bytes()
        assert len(first.read_text().splitlines()) == 1 + 4 * 2 * 2

    def test_failed_cell_does_not_abort(self):
        config = small_config(methods=["spline0", "levant"], seeds=1)
        with patch.object(bench, "full_estimates", side_effect=RuntimeError("boom")):
            results = run_grid(config)

        assert [r.method for r in results] == ["spline0", "levant"]
        for result in results:
            assert "RuntimeError: boom" in result.error
            assert math.isnan(result.rmse_full)
            assert math.isfinite(result.rmse_online)

    def test_failed_tuning_row_does_not_abort(self):
        config = BenchConfig(
            rows=[BenchRow(h=0.05, sigma=1e-4), BenchRow(h=1.9, sigma=1e-4)],
            seeds=1,
            methods=["spline0", "levant", "hgo"],
        )
        results = run_grid(config)

        assert [(r.label, r.method) for r in results] == [
            (row.label, method) for row in config.rows for method in config.methods
        ]
        healthy_hgo, coarse_hgo = results[2], results[5]
        assert healthy_hgo.hgo_eps is not None
        assert math.isfinite(healthy_hgo.rmse_full)
        assert coarse_hgo.hgo_eps is None
        assert "HGO tuning: InsufficientDataError" in coarse_hgo.error
        assert math.isnan(coarse_hgo.rmse_full)
        assert math.isfinite(results[0].rmse_full)

    def test_large_online_rows_flagged(self):
        config = default_bench_config(seeds=1)
        assert [(row.h, row.sigma) for row in large_online_rows(config)] == [(0.0002, 1e-7)]
        assert large_online_rows(default_bench_config(seeds=1, scenarios=["full"])) == []
        assert large_online_rows(default_bench_config(seeds=1, methods=["levant", "hgo"])) == []

    def test_method_order_does_not_matter(self):
        forward = {r.method: r for r in run_grid(small_config(methods=["spline2", "levant"]))}
        backward = {r.method: r for r in run_grid(small_config(methods=["levant", "spline2"]))}
        for method in ("spline2", "levant"):
            assert forward[method].per_seed_full == backward[method].per_seed_full
            assert forward[method].per_seed_online == backward[method].per_seed_online

    def test_median_over_seeds(self):
        result = ExperimentResult(
            label="row", scenario=ScenarioSpec(h=0.05, sigma=1e-4), method="spline2", seeds=[0, 1, 2],
            per_seed_full=[0.3, float("nan"), 0.1], per_seed_online=[0.2, 0.4, 0.9],
        )
        assert result.rmse_full == pytest.approx(0.2)
        assert result.rmse_online == pytest.approx(0.4)


class TestTable:
    def test_rank_marks(self):
        marks = rank_marks({"spline2": 0.3, "spline0": 0.1, "levant": float("nan"), "hgo": 0.2})
        assert marks == {"spline2": "", "spline0": "*", "levant": "", "hgo": "+"}

    def test_render(self):
        config = BenchConfig(rows=[BenchRow(h=0.05, sigma=1e-4)], seeds=1)
        values = {"spline2": 0.01, "spline0": 0.1, "levant": 0.4, "hgo": 0.3}
        results = [
            ExperimentResult(
                label=config.rows[0].label, scenario=ScenarioSpec(h=0.05, sigma=1e-4), method=method,
                seeds=[0], per_seed_full=[value], per_seed_online=[value],
            )
            for method, value in values.items()
        ]
        text = render_table(results, config)
        assert "0.0100* [0.0226]" in text
        assert "0.1000+ [0.1025]" in text
        assert "h=0.05, sigma=0.0001" in text
        assert "Failed cells" not in text


class TestBenchConfig:
    def test_load_toml(self, tmp_path):
        path = tmp_path / "grid.toml"
        path.write_text(
            "[bench]\nseeds = 3\nlam = 1e-3\n\n"
            "[[rows]]\nh = 0.01\nsigma = 1e-4\n\n"
            "[[rows]]\nh = 0.05\nsigma = 1e-4\nhgo_eps = 0.05\n"
        )
        config = load_bench_config(str(path))
        assert config.seeds == 3
        assert config.lam == 1e-3
        assert [row.h for row in config.rows] == [0.01, 0.05]
        assert config.rows[1].hgo_eps == 0.05

    def test_overrides_win(self, tmp_path):
        path = tmp_path / "grid.toml"
        path.write_text("[bench]\nseeds = 3\n")
        assert load_bench_config(str(path), seeds=5, lam=None).seeds == 5

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            load_bench_config(os.path.join(str(tmp_path), "nope.toml"))

    def test_invalid_values(self, tmp_path):
        path = tmp_path / "grid.toml"
        path.write_text("[bench]\nseeds = 0\n")
        with pytest.raises(ConfigurationError):
            load_bench_config(str(path))

    def test_invalid_toml(self, tmp_path):
        path = tmp_path / "grid.toml"
        path.write_text("[bench\n")
        with pytest.raises(ConfigurationError):
            load_bench_config(str(path))
