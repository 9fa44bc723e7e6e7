"""
Static neural quota policy trained through the unrolled stochastic model
"""

import logging
from typing import Any, Dict

import numpy as np
import pandas as pd

from io_utils import OutputManager
from neural import train_policy
from run_session import RunPhase, RunSession
from scenarios.base import ScenarioRunner
from sde_core import constant_baseline, estimate_cost

logger = logging.getLogger(__name__)


class PolicyScenario(ScenarioRunner):
    """Train u(B), then compare it with the two constant quotas at the box ends"""

    tag = "policy"

    def execute(self, config, seed: int, outputs: OutputManager, session: RunSession,
                progress: bool) -> Dict[str, Any]:
        params = config.model.to_params()
        policy, history = train_policy(params, tuple(config.hidden), config.dt,
                                       config.training.to_config(seed, progress))

        candidates = [
            ("neural", policy),
            ("u_min", constant_baseline(params, params.u_min)),
            ("u_max", constant_baseline(params, params.u_max)),
        ]
        costs = {}
        for name, candidate in candidates:
            costs[name] = estimate_cost(params, candidate, config.dt, config.eval_paths, seed)
            logger.info(f"J[{name}] = {costs[name][0]:.6f} +/- {costs[name][1]:.2e}")
        beats = costs["neural"][0] < min(costs["u_min"][0], costs["u_max"][0])
        if not beats:
            session.add_warning("The trained policy does not beat both constant quotas")

        lo, hi = config.surface_range
        axis = np.linspace(lo, hi, config.surface_points)
        B1, B2 = np.meshgrid(axis, axis, indexing="ij")
        surface = policy.eval(np.stack([B1.ravel(), B2.ravel()], axis=1))

        session.start_phase(RunPhase.EXPORT)
        outputs.weights("policy_weights.txt", policy.net)
        outputs.csv("policy_loss.csv", pd.DataFrame({"epoch": history.epochs, "loss": history.losses}))
        outputs.csv("baselines.csv", pd.DataFrame(
            [[name, J, err] for name, (J, err) in costs.items()], columns=["policy", "J", "stderr"]))
        for i in range(params.d):
            outputs.field(f"policy_u{i + 1}.dat", axis, axis, surface[:, i].reshape(B1.shape))

        return {
            "final_loss": history.final_loss,
            "J_neural": costs["neural"][0],
            "J_u_min": costs["u_min"][0],
            "J_u_max": costs["u_max"][0],
            "beats_constants": beats,
        }


# Global policy scenario instance
policy_scenario = PolicyScenario()
