import numpy as np
import pytest
from unittest.mock import patch

import solver_recursive
import spline_zero
from exceptions import (
    ConfigurationError, InsufficientDataError, NumericalBreakdownError, OrderingError, SingularSystemError,
)
from models import SampleSeries
from solver_batch import normal_equations, solve_batch, assemble_system
from solver_recursive import (
    endpoint_estimate, init, load_state, quadratic_increment, refactorize, run_stream, save_state, update,
)
from spline_quadratic import eval_derivative
from tests.conftest import make_series
from utils import relative_difference

LAM = 1e-4


def stream(series, order, start, stop, lam=LAM, **kwargs):
    """Yield the state after each update from `start` knots up to `stop`."""
    state = init(series.prefix(start), order, lam, **kwargs)
    for j in range(start, stop):
        update(state, series.times[j], series.values[j])
        yield j + 1, state


class TestInit:
    def test_matches_batch(self, series):
        state = init(series.prefix(5), 1, LAM)
        expected = solve_batch(series.prefix(5), 1, LAM).parameters
        assert relative_difference(state.z_hat, expected) <= 1e-10

    def test_zero_order_two_knots(self):
        series = SampleSeries.from_arrays([0.0, 1.0], [1.0, 3.0])
        state = init(series, 0, LAM)
        matrix = normal_equations(series, 0, LAM)[0]
        np.testing.assert_allclose(state.a_inv @ matrix, np.eye(2), atol=1e-12)

    def test_quadratic_needs_five_samples(self, series):
        with pytest.raises(InsufficientDataError):
            init(series.prefix(4), 1, LAM)

    def test_unknown_order(self, series):
        with pytest.raises(ConfigurationError):
            init(series, 2, LAM)

    def test_singular_system_passes_through(self, series):
        with patch("solver_recursive.factorize", side_effect=SingularSystemError("singular for lam=0, K=5")):
            with pytest.raises(SingularSystemError, match="lam=0"):
                init(series.prefix(5), 1, 0.0)

    def test_lambda_zero_quadratic_agrees_with_batch(self, series):
        """Unpenalized order-1 start: same solution as the batch solve, or the same singular error."""
        prefix = series.prefix(8)
        try:
            expected = solve_batch(prefix, 1, 0.0).parameters
        except SingularSystemError as exc:
            with pytest.raises(SingularSystemError) as raised:
                init(prefix, 1, 0.0)
            assert str(raised.value) == str(exc)
        else:
            np.testing.assert_array_equal(init(prefix, 1, 0.0).z_hat, expected)


class TestQuadraticUpdate:
    def test_tracks_batch_solution(self, rng):
        series = make_series(rng, 60)
        for k, state in stream(series, 1, 5, 60):
            expected = solve_batch(series.prefix(k), 1, LAM).parameters
            assert relative_difference(state.z_hat, expected) <= 1e-8, f"K={k}"

    def test_inverse_tracks_matrix(self, rng):
        series = make_series(rng, 30)
        *_, (k, state) = stream(series, 1, 5, 30)
        matrix = normal_equations(series, 1, LAM)[0]
        assert k == 30
        np.testing.assert_allclose(state.a_inv @ matrix, np.eye(30), atol=1e-6)

    def test_linear_data_gives_constant_slope(self, rng):
        series = make_series(rng, 20)
        linear = SampleSeries(series.grid, 0.5 + 1.7 * series.times)
        *_, (_, state) = stream(linear, 1, 5, 20)
        assert endpoint_estimate(state) == pytest.approx(1.7, abs=1e-8)

    def test_rejects_non_increasing_time(self, series):
        state = init(series.prefix(6), 1, LAM)
        with pytest.raises(OrderingError):
            update(state, series.times[5], 0.0)
        assert state.size == 6


class TestQuadraticIncrement:
    @pytest.fixture
    def setup(self, rng):
        series = make_series(rng, 16)
        state = init(series.prefix(15), 1, LAM)
        t_new, y_new = series.times[15], series.values[15]
        return state, series, quadratic_increment(state, t_new, y_new)

    def test_state_unchanged(self, setup):
        state, _, _ = setup
        assert state.size == 15 and state.update_count == 0

    def test_design_increment(self, setup):
        state, series, inc = setup
        c_old, _ = assemble_system(series.prefix(15).grid, 1)
        c_new, _ = assemble_system(series.grid, 1)
        expected = c_new[-2:].copy()
        expected[0, :-1] -= c_old[-1]
        np.testing.assert_allclose(inc.delta_c, expected, atol=1e-13)
        np.testing.assert_array_equal(inc.delta_c[0, :-3], 0.0)

    def test_matrix_blocks(self, setup):
        state, series, inc = setup
        a_old = normal_equations(series.prefix(15), 1, LAM)[0]
        a_new = normal_equations(series, 1, LAM)[0]
        padded = np.zeros_like(a_new)
        padded[:15, :15] = a_old
        scale = np.abs(a_new).max()
        np.testing.assert_allclose(inc.delta_a, a_new - padded, atol=1e-12 * scale)
        np.testing.assert_allclose(inc.a_s, a_new[:15, :15], atol=1e-12 * scale)
        np.testing.assert_allclose(inc.u_s, a_new[:15, 15], atol=1e-12 * scale)
        assert inc.corner == pytest.approx(a_new[15, 15], rel=1e-12)

    def test_right_hand_side(self, setup):
        """b = C'^T Y' - A' [Z_K; 0]."""
        state, series, inc = setup
        a_new, rhs_new, _, _ = normal_equations(series, 1, LAM)
        expected = rhs_new - a_new @ np.append(state.z_hat, 0.0)
        np.testing.assert_allclose(inc.b_vector, expected, atol=1e-9 * max(1.0, np.linalg.norm(rhs_new)))


class TestZeroOrderUpdate:
    def test_tracks_batch_solution(self, rng):
        series = make_series(rng, 80)
        for k, state in stream(series, 0, 2, 80):
            expected = solve_batch(series.prefix(k), 0, LAM).parameters
            assert relative_difference(state.z_hat, expected) <= 1e-9, f"K={k}"

    def test_right_hand_side_accumulates_design_rows(self, rng):
        series = make_series(rng, 20)
        *_, (k, state) = stream(series, 0, 2, 20)
        expected = spline_zero.assemble_c(series.grid).T @ series.values
        np.testing.assert_allclose(state.b_vec, expected, rtol=1e-12, atol=1e-12)

    def test_near_interpolation(self):
        state = init(SampleSeries.from_arrays([0.0, 1.0], [1.0, 3.0]), 0, 1e-8)
        update(state, 2.0, 5.0)
        assert state.z_hat[0] == pytest.approx(1.0, abs=1e-4)
        np.testing.assert_allclose(state.z_hat[1:], [2.0, 2.0], atol=1e-4)
        assert endpoint_estimate(state) == state.z_hat[-1]

    def test_lambda_zero_rejected(self, series):
        state = init(series.prefix(3), 0, 0.0)
        with pytest.raises(ConfigurationError):
            update(state, series.times[3], series.values[3])

    def test_rejects_non_increasing_time(self, series):
        state = init(series.prefix(3), 0, LAM)
        with pytest.raises(OrderingError):
            update(state, series.times[1], 0.0)


class TestEndpointEstimate:
    def test_matches_batch_model(self, rng):
        series = make_series(rng, 30)
        *_, (k, state) = stream(series, 1, 5, 30)
        batch = solve_batch(series, 1, LAM).model
        assert endpoint_estimate(state) == pytest.approx(eval_derivative(batch, series.times[-1]), rel=1e-7, abs=1e-8)

    def test_run_stream_prefix_is_nan(self, series):
        estimates = run_stream(series.prefix(12), 1, LAM)
        assert estimates.shape == (12,)
        assert np.all(np.isnan(estimates[:4]))
        assert np.all(np.isfinite(estimates[4:]))

    def test_run_stream_too_short(self, series):
        assert np.all(np.isnan(run_stream(series.prefix(4), 1, LAM)))


class TestRefactorization:
    def test_idempotent(self, series):
        state = init(series.prefix(10), 1, LAM)
        before = state.z_hat.copy()
        refactorize(state)
        np.testing.assert_array_equal(state.z_hat, before)

    def test_restores_perturbed_inverse(self, rng, series):
        *_, (k, state) = stream(series, 1, 5, 20)
        state.a_inv = state.a_inv + 1e-4 * rng.normal(size=state.a_inv.shape)
        refactorize(state)
        expected = solve_batch(series.prefix(k), 1, LAM).parameters
        assert relative_difference(state.z_hat, expected) <= 1e-10
        assert state.update_count == 0

    def test_periodic(self, series):
        *_, (k, state) = stream(series, 1, 5, 30, refactor_every=10)
        assert k == 30
        assert state.update_count == 5

    def test_breakdown_triggers_refactorization(self, series):
        state = init(series.prefix(8), 1, LAM)
        real_update = solver_recursive.update_quadratic
        failures = []

        def flaky(st, t, y):
            if not failures:
                failures.append(t)
                raise NumericalBreakdownError("Schur complement vanished")
            return real_update(st, t, y)

        with patch("solver_recursive.update_quadratic", side_effect=flaky), \
                patch("solver_recursive.refactorize", wraps=solver_recursive.refactorize) as mock_refactor:
            update(state, series.times[8], series.values[8])

        mock_refactor.assert_called_once()
        expected = solve_batch(series.prefix(9), 1, LAM).parameters
        assert relative_difference(state.z_hat, expected) <= 1e-8


class TestSnapshot:
    @pytest.mark.parametrize("order,start", [(1, 5), (0, 2)])
    def test_resume_from_file(self, tmp_path, series, order, start):
        *_, (_, state) = stream(series, order, start, 20)
        path = str(tmp_path / "state.json")
        save_state(state, path)
        resumed = load_state(path)

        assert resumed.order == order and resumed.size == 20
        np.testing.assert_array_equal(resumed.z_hat, state.z_hat)
        np.testing.assert_array_equal(resumed.a_inv, state.a_inv)

        update(state, series.times[20], series.values[20])
        update(resumed, series.times[20], series.values[20])
        np.testing.assert_array_equal(resumed.z_hat, state.z_hat)
