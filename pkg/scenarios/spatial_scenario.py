"""
Open-sea run with plankton, fish, a fleet of boats and an optional biomass-driven quota
"""

import logging
from typing import Any, Dict

import numpy as np
import pandas as pd

from io_utils import OutputManager
from run_session import RunPhase, RunSession
from scenarios.base import ScenarioRunner
from spatial.simulation import run_spatial

logger = logging.getLogger(__name__)


def _summary(result, params) -> Dict[str, Any]:
    totals = result.totals
    n_boats = params.n_boats
    tail = totals[totals["step"] >= int(np.ceil(0.9 * totals["step"].iloc[-1]))]
    after = totals.loc[totals["t"] >= 0.5 - 1e-9, "int_B"].to_numpy()
    reference = after[0] if len(after) else 0.0
    masses = np.array([max(abs(b.mass_before), 1e-300) for b in result.budgets])
    residuals = np.array([abs(b.residual) for b in result.budgets])
    return {
        "int_B_initial": totals["int_B"].iloc[0],
        "int_B_final": totals["int_B"].iloc[-1],
        "Q_final": totals["Q"].iloc[-1],
        "docked_final": int(totals["n_docked"].iloc[-1]),
        "all_docked_tail_fraction": float((tail["n_docked"] == n_boats).mean()) if n_boats else 1.0,
        "biomass_max_rel_change_after_0.5": float(np.abs(after / reference - 1.0).max()) if reference > 0 else float("nan"),
        "budget_max_rel_residual": float((residuals / masses).max()) if len(masses) else 0.0,
    }


class SpatialScenario(ScenarioRunner):
    """Integrate the open-sea model and export totals, fleet log and field snapshots"""

    tag = "spatial"

    def execute(self, config, seed: int, outputs: OutputManager, session: RunSession,
                progress: bool) -> Dict[str, Any]:
        params = config.to_params()
        result = run_spatial(params, config.mode, seed, config.snapshot_times, progress=progress)
        metrics = _summary(result, params)
        logger.info(f"Spatial run ({config.mode}): int B {metrics['int_B_initial']:.4f} -> "
                    f"{metrics['int_B_final']:.4f}, {metrics['docked_final']} boats docked")
        if config.mode == "no_quota" and metrics["all_docked_tail_fraction"] < 1.0:
            session.add_warning("Part of the fleet is still at sea over the last tenth of the run")
        if config.mode == "with_quota" and metrics["biomass_max_rel_change_after_0.5"] > 0.15:
            session.add_warning("Total biomass left the 15% band around its t=0.5 value")

        budget = pd.DataFrame(
            [[k + 1, b.mass_before, b.mass_after, b.reaction, b.residual]
             for k, b in enumerate(result.budgets)],
            columns=["step", "mass_before", "mass_after", "reaction", "residual"])

        session.start_phase(RunPhase.EXPORT)
        mesh = result.mesh
        outputs.csv("totals.csv", result.totals)
        outputs.csv("fleet.csv", result.fleet_log)
        outputs.csv("budget.csv", budget)
        outputs.field("psi.dat", mesh.xc, mesh.yc, result.psi)
        for t in sorted(result.snapshots):
            B, P = result.snapshots[t]
            outputs.field(f"B_t{t:g}.dat", mesh.xc, mesh.yc, B)
            outputs.field(f"P_t{t:g}.dat", mesh.xc, mesh.yc, P)
        return metrics


# Global spatial scenario instance
spatial_scenario = SpatialScenario()
