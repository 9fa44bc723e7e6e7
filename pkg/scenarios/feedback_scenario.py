"""
Closed-loop derivative feedback quota against the open-loop run at the lowest quota
"""

import logging
from dataclasses import replace
from typing import Any, Dict

import numpy as np
import pandas as pd

from feedback_quota import FeedbackPolicy, holding_biomass, run_feedback, time_std
from io_utils import OutputManager
from policies import ConstantPolicy
from run_session import RunPhase, RunSession
from scenarios.base import ScenarioRunner
from sde_core import simulate_paths

logger = logging.getLogger(__name__)


class FeedbackScenario(ScenarioRunner):
    """Per-path time variability of B with and without feedback, on shared noise"""

    tag = "feedback"

    def execute(self, config, seed: int, outputs: OutputManager, session: RunSession,
                progress: bool) -> Dict[str, Any]:
        params = config.model.to_params()
        d = params.d
        u_start = FeedbackPolicy(config.omega, config.u0, params.u_min, params.u_max).initial_quota(d)
        if config.hold_initial_state:
            params = replace(params, B0=holding_biomass(params, u_start))
            logger.info(f"Starting from the state held by the initial quota, B0={params.B0.tolist()}")
        closed = run_feedback(params, config.omega, config.dt, config.n_paths, seed, config.u0)
        t_from, t_to = config.window or (0.0, params.T)

        columns = ["path"] + [f"std_B{i + 1}_feedback" for i in range(d)]
        rows = [[k] + list(time_std(path, t_from, t_to)) for k, path in enumerate(closed)]
        u_all = np.stack([path.u for path in closed])
        drift = np.stack([np.abs(path.B[-1] - path.B[0]) for path in closed])
        metrics: Dict[str, Any] = {
            "u_min_seen": float(u_all.min()),
            "u_max_seen": float(u_all.max()),
            "median_drift": np.median(drift, axis=0).tolist(),
        }

        opened = []
        if config.compare_open_loop:
            lowest = ConstantPolicy(np.full(d, params.u_min), params.u_min, params.u_max)
            opened = simulate_paths(params, lowest, config.dt, config.n_paths, seed)
            columns += [f"std_B{i + 1}_open" for i in range(d)]
            for row, path in zip(rows, opened):
                row.extend(time_std(path, t_from, t_to))
            table = np.array([row[1:] for row in rows])
            reduced = table[:, :d] < table[:, d:]
            metrics["fraction_reduced_per_species"] = reduced.mean(axis=0).tolist()
            metrics["fraction_reduced"] = float(reduced.all(axis=1).mean())
            logger.info(f"Feedback reduced the time-std of every species on {reduced.all(axis=1).mean():.0%} of paths")
            if metrics["fraction_reduced"] < 0.9:
                session.add_warning(f"Feedback reduced the variability on only {metrics['fraction_reduced']:.0%} "
                                    f"of paths; the start B0={params.B0.tolist()} may not be holdable inside "
                                    f"[{params.u_min}, {params.u_max}]")

        session.start_phase(RunPhase.EXPORT)
        outputs.csv("feedback_stats.csv", pd.DataFrame(rows, columns=columns))
        for k in range(min(config.saved_paths, len(closed))):
            outputs.trajectory(f"feedback_path_{k:03d}.csv", closed[k])
            if opened:
                outputs.trajectory(f"open_path_{k:03d}.csv", opened[k])
        return metrics


# Global feedback scenario instance
feedback_scenario = FeedbackScenario()
