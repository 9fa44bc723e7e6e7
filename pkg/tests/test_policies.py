"""
Tests for the quota policy variants
"""

import numpy as np
import pytest

from exceptions import UnsupportedModeError
from policies import ConstantPolicy, GridPolicy, quota_policy_from_spec


def _linear_grid_policy(u_min=-np.inf, u_max=np.inf):
    axis = np.linspace(0.0, 3.0, 7)
    B1, B2 = np.meshgrid(axis, axis, indexing="ij")
    values = np.stack([0.1 * B1 + 0.2 * B2, 0.5 - 0.1 * B2])
    return GridPolicy([axis, axis], values, u_min, u_max)


def test_constant_policy_is_clamped_to_box():
    policy = ConstantPolicy([2.0, 0.1], u_min=0.4, u_max=1.4)
    np.testing.assert_array_equal(policy.eval([1.0, 1.0]), [1.4, 0.4])


def test_single_state_gives_vector_and_batch_gives_matrix():
    policy = ConstantPolicy([0.9])
    assert policy.eval([1.0, 2.0]).shape == (2,)
    assert policy.eval(np.ones((5, 2))).shape == (5, 2)


def test_constant_policy_rejects_wrong_dimension():
    with pytest.raises(ValueError):
        ConstantPolicy([0.5, 0.6, 0.7]).eval([1.0, 1.0])


def test_inverted_box_is_rejected():
    with pytest.raises(ValueError):
        ConstantPolicy([0.5], u_min=1.0, u_max=0.5)


def test_grid_policy_reproduces_linear_field(rng):
    policy = _linear_grid_policy()
    B = rng.uniform(0.0, 3.0, size=(50, 2))
    expected = np.stack([0.1 * B[:, 0] + 0.2 * B[:, 1], 0.5 - 0.1 * B[:, 1]], axis=1)
    np.testing.assert_allclose(policy.eval(B), expected, atol=1e-12)


def test_grid_policy_projects_states_outside_the_box():
    policy = _linear_grid_policy()
    np.testing.assert_allclose(policy.eval([5.0, -1.0]), policy.eval([3.0, 0.0]))


def test_grid_policy_gradient_of_linear_field(rng):
    policy = _linear_grid_policy()
    B = rng.uniform(0.2, 2.8, size=(10, 2))
    jac = policy.gradient(B)
    assert jac.shape == (10, 2, 2)
    np.testing.assert_allclose(jac[:, 0], np.tile([0.1, 0.2], (10, 1)), atol=1e-12)
    np.testing.assert_allclose(jac[:, 1], np.tile([0.0, -0.1], (10, 1)), atol=1e-12)


def test_grid_policy_gradient_vanishes_where_clamped():
    policy = _linear_grid_policy(u_min=0.0, u_max=0.3)
    # u1 = 0.1 * 2 + 0.2 * 2 = 0.6 > u_max
    jac = policy.gradient([2.0, 2.0])
    np.testing.assert_array_equal(jac[0, 0], [0.0, 0.0])


def test_constant_policy_has_no_gradient():
    with pytest.raises(UnsupportedModeError):
        ConstantPolicy([0.9]).gradient([1.0, 1.0])


def test_policy_from_scenario_snippet():
    policy = quota_policy_from_spec({"constant": 0.9}, 0.4, 1.4, 2)
    np.testing.assert_array_equal(policy.eval([1.0, 1.0]), [0.9, 0.9])
    assert quota_policy_from_spec(None, 0.4, 1.4, 2) is None
    with pytest.raises(ValueError):
        quota_policy_from_spec({"table": [1, 2]}, 0.4, 1.4, 2)
