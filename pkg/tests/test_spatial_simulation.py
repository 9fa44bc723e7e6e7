"""
Tests for the coupled open-sea run
"""

import numpy as np
import pytest

from spatial.params import SpatialParams
from spatial.simulation import FLEET_COLUMNS, TOTALS_COLUMNS, run_spatial


class TestSpatialParams:
    def test_unknown_keys_are_rejected(self):
        with pytest.raises(ValueError):
            SpatialParams.from_dict({"resolution": 24, "warp": 9})

    @pytest.mark.parametrize("overrides", [
        {"mu": -0.1}, {"dt": 0.0}, {"dt": 3.0}, {"n_boats": -1}, {"resolution": 2},
        {"coast_x": 9.0}, {"profit_measure": "global"}, {"fish_drift": "wind"},
        {"catchability": 0.0},
    ])
    def test_invalid_values(self, overrides):
        with pytest.raises(ValueError):
            SpatialParams(**overrides)

    def test_step_count(self, small_spatial_params):
        assert small_spatial_params.n_steps == 10


class TestRun:
    def test_tables_and_snapshots(self, small_spatial_params):
        result = run_spatial(small_spatial_params, "with_quota", seed=1, snapshot_times=[0.0, 0.1])
        assert list(result.totals.columns) == TOTALS_COLUMNS
        assert list(result.fleet_log.columns) == FLEET_COLUMNS
        assert len(result.totals) == 11
        assert len(result.fleet_log) == 11 * 5
        assert sorted(result.snapshots) == [0.0, 0.1]
        assert len(result.budgets) == 10
        assert result.B.shape == result.mesh.shape
        assert (result.B >= 0).all() and (result.P >= 0).all()

    def test_budgets_close(self, small_spatial_params):
        result = run_spatial(small_spatial_params, "no_quota", seed=1)
        for budget in result.budgets:
            assert abs(budget.residual) < 1e-9 * budget.mass_before

    def test_quota_is_fixed_without_feedback(self, small_spatial_params):
        result = run_spatial(small_spatial_params, "no_quota", seed=1)
        assert (result.totals["Q"] == small_spatial_params.Q0).all()

    def test_quota_follows_the_biomass(self, small_spatial_params):
        result = run_spatial(small_spatial_params, "with_quota", seed=1)
        Q = result.totals["Q"].to_numpy()
        int_B = result.totals["int_B"].to_numpy()
        expected = np.maximum(0.0, Q[:-1] + small_spatial_params.dt * np.diff(int_B))
        np.testing.assert_allclose(Q[1:], expected, rtol=1e-9, atol=1e-12)

    def test_unrestricted_catch_ignores_the_quota(self):
        params = SpatialParams(resolution=24, T=0.02, dt=0.02, n_boats=5, catchability=0.4)
        free = run_spatial(params, "no_quota", seed=1)
        capped = run_spatial(params, "with_quota", seed=1)
        assert free.totals["int_B"].iloc[-1] < capped.totals["int_B"].iloc[-1]

    def test_unfloored_quota_follows_the_biomass(self):
        params = SpatialParams(resolution=24, T=0.2, dt=0.02, n_boats=5, quota_floor=None)
        result = run_spatial(params, "with_quota", seed=1)
        Q = result.totals["Q"].to_numpy()
        expected = Q[:-1] + params.dt * np.diff(result.totals["int_B"].to_numpy())
        np.testing.assert_allclose(Q[1:], expected, rtol=1e-9, atol=1e-12)

    def test_runs_are_reproducible(self, small_spatial_params):
        first = run_spatial(small_spatial_params, "with_quota", seed=2)
        second = run_spatial(small_spatial_params, "with_quota", seed=2)
        assert first.totals.equals(second.totals)
        assert first.fleet_log.equals(second.fleet_log)

    def test_unknown_mode(self, small_spatial_params):
        with pytest.raises(ValueError):
            run_spatial(small_spatial_params, "open_season")

    def test_plankton_taxis_variant(self):
        params = SpatialParams(resolution=24, T=0.1, dt=0.02, n_boats=2, fish_drift="plankton",
                               plankton_boundary="dirichlet")
        result = run_spatial(params, "with_quota", seed=0)
        assert np.isfinite(result.totals["int_B"]).all()


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1])
def test_fleet_returns_to_port_without_a_quota(seed):
    result = run_spatial(SpatialParams(), "no_quota", seed=seed)
    totals = result.totals
    tail = totals[totals["step"] >= int(np.ceil(0.9 * totals["step"].iloc[-1]))]
    assert (tail["n_docked"] == 50).all()


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1])
def test_biomass_settles_under_the_quota(seed):
    result = run_spatial(SpatialParams(quota_floor=None), "with_quota", seed=seed)
    int_B = result.totals["int_B"].to_numpy()
    late = int_B[result.totals["t"].to_numpy() >= 0.5 - 1e-9]
    assert np.abs(late / late[0] - 1.0).max() <= 0.15


@pytest.mark.slow
def test_floored_quota_cannot_stop_the_natural_decline():
    params = SpatialParams(resolution=50)
    idle = run_spatial(SpatialParams(resolution=50, n_boats=0), "no_quota", seed=0)
    int_B = idle.totals["int_B"].to_numpy()
    late = int_B[idle.totals["t"].to_numpy() >= 0.5 - 1e-9]
    assert late[-1] < 0.9 * late[0]
    floored = run_spatial(params, "with_quota", seed=0)
    assert (floored.totals["Q"] >= 0).all()
