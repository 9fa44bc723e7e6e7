"""
Distributed quota control on the density of the two-species biomass
"""

import logging
from typing import Any, Dict

import pandas as pd

from io_utils import OutputManager, j_history_frame
from kfp_control import (
    Grid2D,
    GridField,
    box_stable_dt,
    density_moments,
    extrapolated_objective,
    optimize_quota,
    solve_forward,
)
from run_session import RunPhase, RunSession
from scenarios.base import ScenarioRunner
from sde_core import estimate_cost, simulate_paths

logger = logging.getLogger(__name__)


def _moments_frame(density) -> pd.DataFrame:
    rows = []
    outflow = 0.0
    for k, t in enumerate(density.times):
        m = density_moments(density.grid, density.values[k])
        rows.append([t, m["mass"], m["mean"][0], m["mean"][1],
                     m["cov"][0, 0], m["cov"][0, 1], m["cov"][1, 1], outflow])
        if k < len(density.boundary_outflow):
            outflow += density.boundary_outflow[k]
    return pd.DataFrame(rows, columns=["t", "mass", "mean1", "mean2", "cov11", "cov12", "cov22", "outflow"])


class KfpScenario(ScenarioRunner):
    """Optimise the quota field, then export it with the density and sample paths"""

    tag = "kfp"

    def execute(self, config, seed: int, outputs: OutputManager, session: RunSession,
                progress: bool) -> Dict[str, Any]:
        params = config.model.to_params()
        grid = Grid2D(**config.grid.model_dump())
        u0 = GridField.constant(grid, config.u0)
        dt = config.dt or box_stable_dt(grid, params, config.boundary)

        result = optimize_quota(grid, params, u0, dt, config.max_iter, config.tol,
                                boundary=config.boundary, progress=progress)
        J0 = result.history[0]["J"]
        logger.info(f"Quota optimisation: J {J0:.6f} -> {result.J:.6f} ({result.reason})")
        if not result.converged:
            session.add_warning(f"Quota optimisation stopped: {result.reason}")
        density, _ = solve_forward(grid, params, result.u, dt, config.boundary)

        policy = result.u.as_policy(params.u_min, params.u_max)
        metrics: Dict[str, Any] = {
            "J_initial": J0,
            "J_final": result.J,
            "iterations": len(result.history) - 1,
            "converged": result.converged,
            "reason": result.reason,
        }
        if config.extrapolate:
            J_ext, _, J_fine = extrapolated_objective(grid, params, result.u, config.boundary)
            metrics["J_final_half_step"] = J_fine
            metrics["J_final_extrapolated"] = J_ext
        with_quota, without_quota = [], []
        if config.sample_paths:
            with_quota = simulate_paths(params, policy, config.sim_dt, config.sample_paths, seed)
            without_quota = simulate_paths(params, None, config.sim_dt, config.sample_paths, seed)
        if config.mc_check_paths:
            J_mc, stderr = estimate_cost(params, policy, config.sim_dt, config.mc_check_paths, seed,
                                         qv_mode="ito")
            metrics["J_monte_carlo"] = J_mc
            metrics["J_monte_carlo_stderr"] = stderr

        session.start_phase(RunPhase.EXPORT)
        c = grid.centres
        outputs.field("u1.dat", c, c, result.u.values[0])
        outputs.field("u2.dat", c, c, result.u.values[1])
        outputs.csv("J_history.csv", j_history_frame(result.history))
        outputs.field("density_final.dat", c, c, density.values[-1])
        outputs.csv("density_moments.csv", _moments_frame(density))
        for k, path in enumerate(with_quota):
            outputs.trajectory(f"trajectory_quota_{k:03d}.csv", path)
        for k, path in enumerate(without_quota):
            outputs.trajectory(f"trajectory_free_{k:03d}.csv", path)
        return metrics


# Global kfp scenario instance
kfp_scenario = KfpScenario()
