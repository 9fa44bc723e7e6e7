"""
Derivative feedback quota u(t + dt) = u(t) + omega (B(t) - B(t - dt))
"""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from config import PATH_CHUNK, WORKERS
from policies import QuotaPolicy, as_batch
from sde_core import ModelParams, Trajectory, simulate_paths

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeedbackState:
    u: np.ndarray
    B_prev: np.ndarray
    omega: float
    u_min: float = -np.inf
    u_max: float = np.inf


def feedback_update(state: FeedbackState, B_now) -> FeedbackState:
    """One application of the rule, clamped, with B_now stored as the new previous biomass"""
    B_now = np.asarray(B_now, dtype=float)
    if B_now.shape != state.B_prev.shape:
        raise ValueError(f"Biomass shape {B_now.shape} does not match the stored {state.B_prev.shape}")
    u = np.clip(state.u + state.omega * (B_now - state.B_prev), state.u_min, state.u_max)
    return replace(state, u=u, B_prev=B_now.copy())


class FeedbackPolicy(QuotaPolicy):
    """Stateful quota driven by the last biomass increment, one state row per path

    ``eval`` returns the current quota and then feeds the observed biomass to
    the rule, so the quota applied over step k is u0 + omega (B_{k-1} - B_0).
    """

    kind = "feedback"
    stateful = True

    def __init__(self, omega: float, u0=None, u_min: float = -np.inf, u_max: float = np.inf):
        super().__init__(u_min, u_max)
        if u0 is None and not (np.isfinite(u_min) and np.isfinite(u_max)):
            raise ValueError("An initial quota u0 is required when the box is unbounded")
        self.omega = float(omega)
        self.u0 = None if u0 is None else np.asarray(u0, dtype=float)
        self.state: Optional[FeedbackState] = None

    def initial_quota(self, d: int) -> np.ndarray:
        if self.u0 is None:
            return np.full(d, 0.5 * (self.u_min + self.u_max))
        return np.broadcast_to(self.u0, (d,)).astype(float)

    def reset(self, B0) -> None:
        B0 = as_batch(B0)
        u = np.tile(self.initial_quota(B0.shape[1]), (B0.shape[0], 1))
        self.state = FeedbackState(np.clip(u, self.u_min, self.u_max), B0.copy(),
                                   self.omega, self.u_min, self.u_max)

    def raw(self, B: np.ndarray, t: float) -> np.ndarray:
        if self.state is None or self.state.B_prev.shape != B.shape:
            self.reset(B)
        current = self.state.u.copy()
        self.state = feedback_update(self.state, B)
        return current


def holding_biomass(params: ModelParams, u) -> np.ndarray:
    """Biomass at which the constant quota u exactly balances growth, kappa B = r - u

    Raises ValueError when that state has a non-positive species.
    """
    if params.dynamics != "reduced":
        raise ValueError("A holding state is defined for the reduced dynamics only")
    u = np.broadcast_to(np.asarray(u, dtype=float), (params.d,))
    B = np.linalg.solve(params.kappa, params.r - u)
    if np.any(B <= 0):
        raise ValueError(f"Quota {u.tolist()} holds no positive biomass, kappa B = r - u gives {B.tolist()}")
    return B


def run_feedback(params: ModelParams, omega: float, dt: float, n_paths: int, seed: int,
                 u0=None, chunk: int = PATH_CHUNK, workers: int = WORKERS) -> List[Trajectory]:
    """Closed-loop paths; each path carries its own feedback state"""
    policy = FeedbackPolicy(omega, u0, params.u_min, params.u_max)
    logger.info(f"Feedback run: omega={omega}, {n_paths} paths, dt={dt}")
    return simulate_paths(params, policy, dt, n_paths, seed, chunk=chunk, workers=workers)


def time_std(trajectory: Trajectory, t_from: float, t_to: float) -> np.ndarray:
    """Standard deviation in time of each B_i over [t_from, t_to]"""
    mask = (trajectory.times >= t_from - 1e-12) & (trajectory.times <= t_to + 1e-12)
    if not mask.any():
        raise ValueError(f"No time points in [{t_from}, {t_to}]")
    return trajectory.B[mask].std(axis=0)
