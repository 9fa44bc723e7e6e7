"""
Tests for the derivative feedback quota
"""

from dataclasses import replace

import numpy as np
import pytest

from feedback_quota import FeedbackPolicy, FeedbackState, feedback_update, holding_biomass, run_feedback, time_std
from policies import ConstantPolicy
from sde_core import effort_model_params, simulate_paths, solve_deterministic, two_species_params

HELD_B0 = [0.9, 0.8]


def test_update_follows_the_increment():
    state = FeedbackState(np.array([0.9, 0.9]), np.array([1.0, 1.0]), omega=2.0, u_min=0.4, u_max=1.4)
    new = feedback_update(state, [1.1, 0.95])
    np.testing.assert_allclose(new.u, [1.1, 0.8])
    np.testing.assert_array_equal(new.B_prev, [1.1, 0.95])


def test_update_is_clamped():
    state = FeedbackState(np.array([0.9]), np.array([1.0]), omega=100.0, u_min=0.4, u_max=1.4)
    assert feedback_update(state, [1.5]).u[0] == 1.4
    assert feedback_update(state, [0.5]).u[0] == 0.4


def test_update_rejects_shape_change():
    state = FeedbackState(np.array([0.9, 0.9]), np.array([1.0, 1.0]), omega=1.0)
    with pytest.raises(ValueError):
        feedback_update(state, [1.0])


def test_unbounded_box_needs_an_initial_quota():
    with pytest.raises(ValueError):
        FeedbackPolicy(10.0)
    assert FeedbackPolicy(10.0, u0=0.7).initial_quota(2).tolist() == [0.7, 0.7]


def test_initial_quota_defaults_to_box_midpoint():
    np.testing.assert_allclose(FeedbackPolicy(10.0, u_min=0.4, u_max=1.4).initial_quota(2), [0.9, 0.9])


def test_applied_quota_follows_the_recurrence():
    params = two_species_params(B0=HELD_B0, sigma=0.0, sigma_prime=0.0, sigma_init=0.0)
    policy = FeedbackPolicy(100.0, None, params.u_min, params.u_max)
    path = solve_deterministic(params, policy, 0.01)
    np.testing.assert_allclose(path.u[0], 0.9)
    np.testing.assert_allclose(path.u[1], 0.9)
    for k in range(1, len(path) - 1):
        expected = np.clip(path.u[k] + 100.0 * (path.B[k] - path.B[k - 1]), params.u_min, params.u_max)
        np.testing.assert_allclose(path.u[k + 1], expected, rtol=1e-12)


def test_deterministic_feedback_holds_the_stock():
    params = two_species_params(B0=HELD_B0, sigma=0.0, sigma_prime=0.0, sigma_init=0.0)
    path = solve_deterministic(params, FeedbackPolicy(100.0, None, params.u_min, params.u_max), 0.01)
    np.testing.assert_allclose(path.B[-1], HELD_B0, atol=0.05)


def test_paths_carry_independent_state():
    params = two_species_params(B0=HELD_B0)
    paths = run_feedback(params, 100.0, 0.01, 4, seed=3, chunk=2)
    again = run_feedback(params, 100.0, 0.01, 4, seed=3, chunk=4)
    for a, b in zip(paths, again):
        np.testing.assert_array_equal(a.u, b.u)
    assert not np.array_equal(paths[0].u, paths[1].u)
    u = np.stack([p.u for p in paths])
    assert u.min() >= params.u_min and u.max() <= params.u_max


def test_holding_biomass_balances_growth(two_species):
    B = holding_biomass(two_species, 0.9)
    np.testing.assert_allclose(two_species.kappa @ B, two_species.r - 0.9)
    np.testing.assert_allclose(B, [0.5379, 0.4552], atol=1e-3)


def test_holding_biomass_needs_a_positive_state(two_species):
    with pytest.raises(ValueError):
        holding_biomass(two_species, 1.6)
    with pytest.raises(ValueError):
        holding_biomass(effort_model_params(), 0.5)


def test_initial_state_outside_the_holdable_set(two_species):
    # species 1 declines at B0 for every quota in the box
    growth = two_species.r - two_species.kappa @ two_species.B0 - two_species.u_min
    assert growth[0] < 0


def _paired_runs(params, n_paths, seed):
    closed = run_feedback(params, 100.0, 0.01, n_paths, seed)
    lowest = ConstantPolicy(np.full(params.d, params.u_min), params.u_min, params.u_max)
    opened = simulate_paths(params, lowest, 0.01, n_paths, seed)
    return closed, opened


@pytest.mark.slow
@pytest.mark.parametrize("seed", [7, 8])
def test_feedback_reduces_time_variability_on_most_paths(two_species, seed):
    u_start = FeedbackPolicy(100.0, None, two_species.u_min, two_species.u_max).initial_quota(2)
    params = replace(two_species, B0=holding_biomass(two_species, u_start), sigma_init=0.0)
    closed, opened = _paired_runs(params, 100, seed)
    closed_std = np.stack([time_std(p, 0.5, 2.0) for p in closed])
    open_std = np.stack([time_std(p, 0.5, 2.0) for p in opened])
    reduced = closed_std < open_std
    assert np.all(reduced.mean(axis=0) >= 0.9)
    drift = np.stack([np.abs(p.B[-1] - p.B[0]) for p in closed])
    assert np.all(np.median(drift, axis=0) <= 0.15)
    u = np.stack([p.u for p in closed])
    assert u.min() >= params.u_min and u.max() <= params.u_max


def test_time_std_window():
    params = two_species_params(B0=HELD_B0, sigma=0.0, sigma_prime=0.0, sigma_init=0.0)
    path = solve_deterministic(params, ConstantPolicy([0.9, 0.9]), 0.1)
    np.testing.assert_allclose(time_std(path, 0.0, 0.0), [0.0, 0.0])
    assert np.all(time_std(path, 0.0, 2.0) > 0)
    with pytest.raises(ValueError):
        time_std(path, 5.0, 6.0)
