import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qctrl.dynamics import SystemParams, evolve, fidelity, projector
from qctrl.oct import (
    DEFAULT_SEGMENTS, OptimizationResult, alpha_to_schedule, cost, initial_guesses,
    minimize, multistart, numeric_gradient, projected_gradient_norm, run_restarts,
    schedule_to_alpha,
)
from qctrl.stirap import StirapShape, gaussian_schedule, is_counterintuitive


def brute_gradient(alpha, params, h):
    grad = np.zeros_like(alpha)
    for i in range(len(alpha)):
        up, dn = alpha.copy(), alpha.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (cost(up, params) - cost(dn, params)) / (2 * h)
    return grad


@pytest.fixture(scope="module")
def decay_params():
    return SystemParams.dimensionless(5, 20)


@pytest.fixture(scope="module")
def optimum(decay_params):
    return multistart(decay_params, n_restarts=2, seed=3, n_segments=12, workers=1)


class TestEncoding:
    @given(st.lists(st.floats(0, 20), min_size=2, max_size=40).filter(lambda v: len(v) % 2 == 0))
    def test_round_trip(self, values):
        params = SystemParams(omega_max=20.0)
        alpha = np.array(values)
        sched = alpha_to_schedule(alpha, params)
        np.testing.assert_array_equal(schedule_to_alpha(sched), alpha)
        assert sched.n_segments == len(alpha) // 2

    def test_pump_block_first(self):
        sched = alpha_to_schedule(np.array([1.0, 2.0, 3.0, 4.0]), SystemParams(omega_max=5.0))
        np.testing.assert_array_equal(sched.values_p, [1.0, 2.0])
        np.testing.assert_array_equal(sched.values_s, [3.0, 4.0])

    @pytest.mark.parametrize("bad", [[-0.1, 0.0], [0.0, 5.1], [1.0, 1.0, 1.0]])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            cost(np.array(bad), SystemParams(omega_max=5.0))


class TestCost:
    def test_zero_pulses(self):
        params = SystemParams.dimensionless(3, 10)
        assert cost(np.zeros(60), params) == 1.0

    def test_sequential_pi_pulses(self):
        # pump pi-pulse then Stokes pi-pulse
        params = SystemParams.dimensionless(0, 2 * np.pi)
        alpha = np.array([2 * np.pi, 0.0, 0.0, 2 * np.pi])
        assert cost(alpha, params) <= 1e-4

    def test_gaussian_schedule_cost(self):
        params = SystemParams.dimensionless(0, 100)
        sched = gaussian_schedule(StirapShape.default(params), params, 100)
        assert cost(schedule_to_alpha(sched), params) < 0.2

    def test_matches_density_route(self, decay_params):
        alpha = initial_guesses(decay_params, 1, 11, n_segments=10)[0]
        rho = evolve(projector("g"), alpha_to_schedule(alpha, decay_params), decay_params)[-1]
        assert cost(alpha, decay_params) == pytest.approx(1 - fidelity(rho), abs=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.2, 5.0), st.integers(0, 2**32 - 1))
    def test_scale_invariance(self, a, seed):
        params = SystemParams(delta_p=1.0, gamma=2.0, omega_max=15.0)
        alpha = np.random.default_rng(seed).uniform(0, 15, 16)
        scaled = params.rescaled(a)
        assert cost(alpha / a, scaled) == pytest.approx(cost(alpha, params), abs=1e-10)


class TestGradient:
    def test_zero_start_points_downhill(self, decay_params):
        # at alpha = 0 one-sided differences are the only option
        grad = numeric_gradient(np.zeros(2 * 8), decay_params)
        assert np.all(grad <= 1e-12)

    def test_matches_brute_force(self, decay_params):
        alpha = initial_guesses(decay_params, 1, 5, n_segments=8)[0]
        np.testing.assert_allclose(
            numeric_gradient(alpha, decay_params),
            brute_gradient(alpha, decay_params, 1e-6), atol=1e-8)

    def test_richardson_ratio(self, decay_params):
        alpha = initial_guesses(decay_params, 1, 9, n_segments=6)[0]
        fine = brute_gradient(alpha, decay_params, 1e-5)
        err_h = np.abs(numeric_gradient(alpha, decay_params, step=4e-2 / 20) - fine).max()
        err_2h = np.abs(numeric_gradient(alpha, decay_params, step=8e-2 / 20) - fine).max()
        # central differences: halving the step quarters the error
        assert err_2h / err_h == pytest.approx(4.0, rel=0.1)

    def test_one_sided_at_upper_bound(self, decay_params):
        alpha = np.full(8, decay_params.omega_max)
        grad = numeric_gradient(alpha, decay_params)
        assert np.all(np.isfinite(grad))


class TestMinimize:
    def test_unknown_method(self, decay_params):
        with pytest.raises(ValueError):
            minimize(np.zeros(4), decay_params, method="bfgs")

    def test_improves_and_stays_in_box(self, decay_params):
        x0 = initial_guesses(decay_params, 1, 1, n_segments=10)[0]
        res = minimize(x0, decay_params, budget=200)
        assert res.best_cost <= res.initial_cost
        assert np.all(res.best_alpha >= 0) and np.all(res.best_alpha <= decay_params.omega_max)
        assert res.best_cost == pytest.approx(cost(res.best_alpha, decay_params), abs=1e-14)
        assert res.fidelity == pytest.approx(1 - res.best_cost)

    def test_optimum_is_stationary(self, optimum, decay_params):
        grad = numeric_gradient(optimum.best_alpha, decay_params)
        assert projected_gradient_norm(optimum.best_alpha, grad, decay_params) <= 1e-4

    def test_restart_from_optimum(self, optimum, decay_params):
        again = minimize(optimum.best_alpha, decay_params)
        assert again.converged
        assert again.best_cost == pytest.approx(optimum.best_cost, abs=1e-8)

    def test_beats_gaussian_and_counterintuitive(self, optimum, decay_params):
        sched = gaussian_schedule(StirapShape.default(decay_params), decay_params, 12)
        assert optimum.best_cost < cost(schedule_to_alpha(sched), decay_params)
        assert is_counterintuitive(optimum.schedule(decay_params))

    @pytest.mark.parametrize("method", ["nelder-mead", "powell"])
    def test_derivative_free_methods(self, method, decay_params):
        x0 = initial_guesses(decay_params, 1, 2, n_segments=4)[0]
        res = minimize(x0, decay_params, method=method, budget=300)
        assert res.best_cost <= res.initial_cost
        assert res.evaluations <= 300 + 50
        assert res.gradient_evaluations == 0
        assert np.all(res.best_alpha >= 0) and np.all(res.best_alpha <= decay_params.omega_max)

    def test_budget_exhaustion_reported(self, decay_params):
        x0 = initial_guesses(decay_params, 1, 2, n_segments=8)[0]
        res = minimize(x0, decay_params, method="nelder-mead", budget=20)
        assert not res.converged
        assert res.best_cost <= res.initial_cost


class TestMultistart:
    def test_best_of_restarts(self, decay_params):
        results = run_restarts(decay_params, n_restarts=3, seed=4, n_segments=6, budget=50, workers=1)
        best = multistart(decay_params, n_restarts=3, seed=4, n_segments=6, budget=50, workers=1)
        assert best.best_cost == min(r.best_cost for r in results)
        assert [r.restart_index for r in results] == [0, 1, 2]

    def test_single_restart_equals_minimize(self, decay_params):
        x0 = initial_guesses(decay_params, 1, 8, n_segments=5)[0]
        direct = minimize(x0, decay_params, budget=40, seed=8)
        multi = multistart(decay_params, n_restarts=1, seed=8, n_segments=5, budget=40, workers=1)
        assert multi.to_dict() == direct.to_dict()

    def test_deterministic_across_workers(self, decay_params):
        a = multistart(decay_params, n_restarts=2, seed=6, n_segments=5, budget=40, workers=1)
        b = multistart(decay_params, n_restarts=2, seed=6, n_segments=5, budget=40, workers=2)
        assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())

    def test_guesses_in_half_box(self, decay_params):
        guesses = initial_guesses(decay_params, 4, 0)
        assert len(guesses) == 4
        for g in guesses:
            assert g.shape == (2 * DEFAULT_SEGMENTS,)
            assert g.min() >= 0 and g.max() <= 0.5 * decay_params.omega_max

    def test_rejects_zero_restarts(self, decay_params):
        with pytest.raises(ValueError):
            run_restarts(decay_params, n_restarts=0)

    def test_result_round_trip(self, optimum):
        data = json.loads(json.dumps(optimum.to_dict()))
        back = OptimizationResult.from_dict(data)
        assert json.dumps(back.to_dict()) == json.dumps(optimum.to_dict())
        assert data["n_per_control"] == 12
