"""
Single-site simulation: deterministic path, Monte-Carlo ensemble and the objective
"""

import logging
from typing import Any, Dict

from io_utils import OutputManager, ensemble_frame
from policies import quota_policy_from_spec
from run_session import RunPhase, RunSession
from scenarios.base import ScenarioRunner
from sde_core import ensemble_statistics, estimate_cost, simulate_paths, solve_deterministic

logger = logging.getLogger(__name__)


class SimulateScenario(ScenarioRunner):
    """Sample trajectories of the single-site model under a constant quota (or none)"""

    tag = "simulate"

    def execute(self, config, seed: int, outputs: OutputManager, session: RunSession,
                progress: bool) -> Dict[str, Any]:
        params = config.model.to_params()
        spec = config.policy.model_dump() if config.policy is not None else None
        policy = quota_policy_from_spec(spec, params.u_min, params.u_max, params.d)
        effort = params.dynamics == "effort"

        deterministic = solve_deterministic(params, policy, config.dt)
        paths = simulate_paths(params, policy, config.dt, config.n_paths, seed)
        stats = ensemble_statistics(paths)
        J, stderr = estimate_cost(params, policy, config.dt, config.n_paths, seed)
        logger.info(f"Objective over {config.n_paths} paths: J={J:.6f} +/- {stderr:.2e}")

        session.start_phase(RunPhase.EXPORT)
        outputs.trajectory("deterministic.csv", deterministic, effort)
        outputs.csv("ensemble.csv", ensemble_frame(stats))
        for k in range(min(config.saved_paths, len(paths))):
            outputs.trajectory(f"path_{k:03d}.csv", paths[k], effort)

        return {
            "J_mean": J,
            "J_stderr": stderr,
            "n_paths": config.n_paths,
            "B_final_mean": stats["B_mean"][-1],
            "B_final_deterministic": deterministic.B[-1],
        }


# Global simulate scenario instance
simulate_scenario = SimulateScenario()
