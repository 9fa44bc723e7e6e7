"""
Tests for boat motion and mode transitions
"""

import numpy as np
import pytest

from spatial.fleet import DOCKED, FISHING, RETURNING, init_fleet, reflect, step_fleet
from spatial.params import SpatialParams


def _params(**overrides):
    values = {"resolution": 24, "n_boats": 4, "position_noise": 0.0}
    values.update(overrides)
    return SpatialParams(**values)


def test_fleet_starts_at_home_on_the_coast(small_mesh):
    fleet = init_fleet(small_mesh, _params(), seed=0)
    assert fleet.size == 4
    assert fleet.count(FISHING) == 4
    np.testing.assert_allclose(fleet.positions[:, 0], 6.75)
    assert fleet.positions[:, 1].min() > 4.0 and fleet.positions[:, 1].max() < 8.0
    np.testing.assert_array_equal(fleet.positions, fleet.homes)


def test_empty_fleet(small_mesh):
    fleet = init_fleet(small_mesh, _params(n_boats=0), seed=0)
    assert fleet.size == 0
    assert step_fleet(fleet, np.zeros(small_mesh.shape), small_mesh, _params(n_boats=0), 0.02) is fleet


def test_boats_climb_the_fish_gradient(small_mesh):
    params = _params()
    X, _ = small_mesh.centres()
    B = np.where(small_mesh.sea, 1.0 + 0.1 * (7.0 - X), 0.0)
    fleet = init_fleet(small_mesh, params, seed=0)
    moved = step_fleet(fleet, B, small_mesh, params, 0.02)
    assert moved.count(FISHING) == 4
    np.testing.assert_allclose(moved.positions[:, 0], 6.75 - params.cruise_speed * 0.02)
    np.testing.assert_allclose(moved.positions[:, 1], fleet.positions[:, 1])


def test_empty_sea_sends_boats_home(small_mesh):
    params = _params()
    fleet = init_fleet(small_mesh, params, seed=0)
    moved = step_fleet(fleet, np.zeros(small_mesh.shape), small_mesh, params, 0.02)
    assert moved.count(DOCKED) == 4
    np.testing.assert_array_equal(moved.positions, fleet.homes)


def test_returning_boats_travel_at_cruise_speed(small_mesh):
    params = _params()
    fleet = init_fleet(small_mesh, params, seed=0)
    fleet.positions[:] = fleet.homes - np.array([2.0, 0.0])
    moved = step_fleet(fleet, np.zeros(small_mesh.shape), small_mesh, params, 0.02)
    assert moved.count(RETURNING) == 4
    np.testing.assert_allclose(moved.positions[:, 0], fleet.homes[:, 0] - 2.0 + 0.04)


def test_total_profit_measure_keeps_fishing_on_thin_stock(small_mesh):
    thin = np.where(small_mesh.sea, 0.01, 0.0)
    local = _params()
    total = _params(profit_measure="total")
    assert step_fleet(init_fleet(small_mesh, local, 0), thin, small_mesh, local, 0.02).count(FISHING) == 0
    assert step_fleet(init_fleet(small_mesh, total, 0), thin, small_mesh, total, 0.02).count(FISHING) == 4


def test_noise_streams_are_per_boat_and_seeded(small_mesh):
    params = _params(position_noise=0.05)
    B = np.where(small_mesh.sea, 2.0, 0.0)
    a = step_fleet(init_fleet(small_mesh, params, seed=3), B, small_mesh, params, 0.02)
    b = step_fleet(init_fleet(small_mesh, params, seed=3), B, small_mesh, params, 0.02)
    c = step_fleet(init_fleet(small_mesh, params, seed=4), B, small_mesh, params, 0.02)
    np.testing.assert_array_equal(a.positions, b.positions)
    assert not np.array_equal(a.positions, c.positions)


def test_reflect_mirrors_into_the_sea(small_mesh):
    out = reflect(np.array([[-0.5, 13.0], [7.5, 1.0], [3.0, 6.0]]), small_mesh)
    np.testing.assert_allclose(out, [[0.5, 11.0], [6.5, 1.0], [3.0, 6.0]])


def test_profit_threshold():
    assert _params().profit_threshold == pytest.approx(0.5)
    assert _params(gamma=0.0).profit_threshold == float("inf")
