"""
Open-sea run: current, plankton, fish, fleet and quota, stepped together
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from spatial.fields import (
    DiffusionSolver,
    StepBudget,
    catch_field,
    current_velocity,
    fish_velocity,
    initial_bump,
    solve_stream_potential,
    step_biomass,
    step_plankton,
    transport_rate,
    update_quota,
)
from spatial.fleet import DOCKED, FISHING, MODE_NAMES, Fleet, init_fleet, step_fleet
from spatial.mesh import Mesh, coastal_mesh
from spatial.params import MODES, SpatialParams

logger = logging.getLogger(__name__)

TOTALS_COLUMNS = ["step", "t", "int_B", "int_P", "Q", "n_fishing", "n_docked"]
FLEET_COLUMNS = ["step", "boat_id", "x", "y", "mode"]


@dataclass
class SpatialResult:
    mesh: Mesh
    psi: np.ndarray
    totals: pd.DataFrame
    fleet_log: pd.DataFrame
    snapshots: Dict[float, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    budgets: List[StepBudget] = field(default_factory=list)
    B: Optional[np.ndarray] = None
    P: Optional[np.ndarray] = None


def _fleet_rows(step: int, fleet: Fleet) -> List[list]:
    return [[step, k, float(x), float(y), MODE_NAMES[int(m)]]
            for k, ((x, y), m) in enumerate(zip(fleet.positions, fleet.modes))]


def _substeps(mesh: Mesh, params: SpatialParams, current, P: np.ndarray, dt: float) -> int:
    rate = max(transport_rate(mesh, current.vx, current.vy),
               transport_rate(mesh, *fish_velocity(mesh, params, current, P)))
    return max(1, math.ceil(dt * rate / 0.9))


def run_spatial(params: SpatialParams, mode: str = "with_quota", seed: int = 0,
                snapshot_times: Sequence[float] = (), mesh: Optional[Mesh] = None,
                progress: bool = False) -> SpatialResult:
    """Integrate the open-sea model over [0, T]

    In ``no_quota`` mode Q stays at Q0; in ``with_quota`` mode it follows
    the biomass increments after each step.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    mesh = mesh or coastal_mesh(params.resolution, params.width, params.height, params.coast_x)
    dt = params.dt
    N = params.n_steps
    psi = solve_stream_potential(mesh)
    logger.info(f"Spatial run ({mode}): {N} steps, {params.n_boats} boats, mesh {mesh.nx}x{mesh.ny}")

    B = initial_bump(mesh, params.bump_center, params.bump_scale)
    P = B.copy()
    edge = mesh.gamma1 | mesh.gamma2
    dirichlet = params.plankton_boundary == "dirichlet"
    P_edge = P[edge].copy() if dirichlet else None
    plankton_solver = DiffusionSolver(mesh, params.mu, dt, edge if dirichlet else None) if params.mu > 0 else None
    fish_solver = DiffusionSolver(mesh, params.nu, dt) if params.nu > 0 else None

    fleet = init_fleet(mesh, params, seed)
    Q = params.Q0
    snap_steps = {int(round(t / dt)): t for t in snapshot_times}

    totals = [[0, 0.0, mesh.integrate(B), mesh.integrate(P), Q, fleet.count(FISHING), fleet.count(DOCKED)]]
    fleet_rows = _fleet_rows(0, fleet)
    snapshots = {}
    budgets = []
    if 0 in snap_steps:
        snapshots[snap_steps[0]] = (B.copy(), P.copy())

    for k in tqdm(range(N), desc="spatial", disable=not progress):
        t = k * dt
        current = current_velocity(psi, mesh, t, params.current_amplitude, params.current_frequency)
        substeps = _substeps(mesh, params, current, P, dt)
        rate = min(Q, params.catchability) if mode == "with_quota" else params.catchability
        catch = catch_field(mesh, fleet.positions, fleet.fishing, rate, params.kernel_radius)

        P_next = step_plankton(P, B, current, mesh, params, dt, substeps, plankton_solver, P_edge)
        B_next, budget = step_biomass(B, P, current, catch, mesh, params, dt, substeps, fish_solver)
        fleet = step_fleet(fleet, B_next, mesh, params, dt)
        if mode == "with_quota":
            Q = update_quota(Q, B_next, B, mesh, dt, params.quota_weight, params.quota_floor)
        B, P = B_next, P_next
        budgets.append(budget)

        totals.append([k + 1, (k + 1) * dt, mesh.integrate(B), mesh.integrate(P), Q,
                       fleet.count(FISHING), fleet.count(DOCKED)])
        fleet_rows.extend(_fleet_rows(k + 1, fleet))
        if k + 1 in snap_steps:
            snapshots[snap_steps[k + 1]] = (B.copy(), P.copy())
        if (k + 1) % 10 == 0:
            logger.debug(f"t={(k + 1) * dt:.2f}: int B={totals[-1][2]:.4f}, Q={Q:.4f}, "
                         f"fishing={totals[-1][5]}, docked={totals[-1][6]}")

    return SpatialResult(
        mesh=mesh,
        psi=psi,
        totals=pd.DataFrame(totals, columns=TOTALS_COLUMNS),
        fleet_log=pd.DataFrame(fleet_rows, columns=FLEET_COLUMNS),
        snapshots=snapshots,
        budgets=budgets,
        B=B,
        P=P,
    )
