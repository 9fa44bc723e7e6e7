"""
Stream potential, sea current and the plankton / fish field updates

Fields are full (nx, ny) arrays holding zeros on land.  Each step is split
into explicit upwind transport, an exact logistic reaction sub-step and an
implicit diffusion solve with zero flux across closed faces.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import factorized, spsolve

from exceptions import SolverConvergenceError, StabilityError
from spatial.mesh import Mesh
from spatial.params import SpatialParams

logger = logging.getLogger(__name__)

BoundaryData = Union[float, Callable[[np.ndarray], np.ndarray]]


@dataclass
class Current:
    """Face-normal velocities on open faces and the cell-centred vector field"""

    vx: np.ndarray
    vy: np.ndarray
    cell: np.ndarray


@dataclass
class StepBudget:
    mass_before: float
    mass_after: float
    reaction: float
    boundary_flux: float = 0.0

    @property
    def residual(self) -> float:
        return self.mass_after - self.mass_before - self.reaction + self.boundary_flux


def initial_bump(mesh: Mesh, center=(4.0, 6.0), scale: float = 40.0) -> np.ndarray:
    """[1 - |x - center|^2 / scale]^+ on sea cells"""
    X, Y = mesh.centres()
    bump = np.maximum(1.0 - ((X - center[0]) ** 2 + (Y - center[1]) ** 2) / scale, 0.0)
    return np.where(mesh.sea, bump, 0.0)


def _boundary_values(data: BoundaryData, x: np.ndarray) -> np.ndarray:
    if callable(data):
        return np.asarray(data(x), dtype=float)
    return np.full(x.shape, float(data))


def solve_stream_potential(mesh: Mesh, top: Optional[BoundaryData] = None,
                           bottom: BoundaryData = 0.0, tol: float = 1e-8) -> np.ndarray:
    """Discrete harmonic psi with psi = top(x) on the upper row, bottom(x) on the lower row"""
    top = (lambda x: x - 6.0) if top is None else top
    idx = mesh.index()
    L = mesh.laplacian().tolil()
    n = L.shape[0]
    rhs = np.zeros(n)
    for mask, data in ((mesh.gamma1, top), (mesh.gamma2, bottom)):
        cells = idx[mask]
        values = _boundary_values(data, mesh.centres()[0][mask])
        for k, v in zip(cells, values):
            L.rows[k] = [k]
            L.data[k] = [1.0]
            rhs[k] = v
    A = L.tocsr()
    psi_vec = spsolve(A, rhs)
    residual = float(np.linalg.norm(A @ psi_vec - rhs) / max(np.linalg.norm(rhs), 1.0))
    if not np.isfinite(residual) or residual > tol:
        raise SolverConvergenceError("Stream potential solve failed", residual)
    logger.debug(f"Stream potential solved, relative residual {residual:.2e}")
    psi = np.zeros(mesh.shape)
    psi[mesh.sea] = psi_vec
    return psi


def face_gradient_velocity(mesh: Mesh, F: np.ndarray, scale: float):
    """scale * dF/dn on open faces, zero on closed ones"""
    vx = np.where(mesh.open_x, scale * (F[1:, :] - F[:-1, :]) / mesh.h, 0.0)
    vy = np.where(mesh.open_y, scale * (F[:, 1:] - F[:, :-1]) / mesh.h, 0.0)
    return vx, vy


def current_velocity(psi: np.ndarray, mesh: Mesh, t: float, amplitude: float = 10.0,
                     frequency: float = 2 * math.pi) -> Current:
    """v = amplitude cos(frequency t) grad psi"""
    scale = amplitude * math.cos(frequency * t)
    vx, vy = face_gradient_velocity(mesh, psi, scale)
    masked = np.where(mesh.sea, psi, np.nan)
    gx, gy = np.gradient(masked, mesh.h)
    cell = np.nan_to_num(scale * np.stack([gx, gy]))
    cell[:, ~mesh.sea] = 0.0
    return Current(vx, vy, cell)


def divergence(mesh: Mesh, vx: np.ndarray, vy: np.ndarray) -> np.ndarray:
    div = np.zeros(mesh.shape)
    div[:-1, :] += vx
    div[1:, :] -= vx
    div[:, :-1] += vy
    div[:, 1:] -= vy
    return div / mesh.h


def transport_rate(mesh: Mesh, vx: np.ndarray, vy: np.ndarray) -> float:
    """Largest per-cell sum of |face velocity| / h; explicit transport needs dt * rate <= 1"""
    rate = np.zeros(mesh.shape)
    for v, lo, hi in ((np.abs(vx), (slice(None, -1), slice(None)), (slice(1, None), slice(None))),
                      (np.abs(vy), (slice(None), slice(None, -1)), (slice(None), slice(1, None)))):
        rate[lo] += v
        rate[hi] += v
    return float(rate.max() / mesh.h)


def _check_transport(mesh: Mesh, vx: np.ndarray, vy: np.ndarray, dt: float):
    rate = transport_rate(mesh, vx, vy)
    if dt * rate > 1.0 + 1e-12:
        raise StabilityError(f"Explicit transport step dt={dt:.4g} violates dt * max rate <= 1", 0.9 / rate)


def advect_conservative(F: np.ndarray, vx: np.ndarray, vy: np.ndarray, h: float, dt: float) -> np.ndarray:
    """Upwind flux form of -div(v F)"""
    fx = np.maximum(vx, 0.0) * F[:-1, :] + np.minimum(vx, 0.0) * F[1:, :]
    fy = np.maximum(vy, 0.0) * F[:, :-1] + np.minimum(vy, 0.0) * F[:, 1:]
    dF = np.zeros_like(F)
    dF[:-1, :] -= fx
    dF[1:, :] += fx
    dF[:, :-1] -= fy
    dF[:, 1:] += fy
    return F + dt * dF / h


def advect_upwind(F: np.ndarray, vx: np.ndarray, vy: np.ndarray, h: float, dt: float) -> np.ndarray:
    """Upwind form of -v . grad F; each cell moves toward its inflow neighbours"""
    ex = F[1:, :] - F[:-1, :]
    ey = F[:, 1:] - F[:, :-1]
    dF = np.zeros_like(F)
    dF[:-1, :] -= np.minimum(vx, 0.0) * ex
    dF[1:, :] -= np.maximum(vx, 0.0) * ex
    dF[:, :-1] -= np.minimum(vy, 0.0) * ey
    dF[:, 1:] -= np.maximum(vy, 0.0) * ey
    return F + dt * dF / h


def logistic_step(y: np.ndarray, g: np.ndarray, k: float, dt: float) -> np.ndarray:
    """Exact flow of y' = y (g - k y) over dt"""
    g = np.broadcast_to(g, y.shape)
    growth = np.exp(g * dt)
    small = np.abs(g * dt) < 1e-12
    ratio = np.where(small, dt, np.expm1(g * dt) / np.where(small, 1.0, g))
    return y * growth / (1.0 + k * y * ratio)


class DiffusionSolver:
    """Factorised (I - dt D Laplacian) on sea cells, optional Dirichlet rows"""

    def __init__(self, mesh: Mesh, coefficient: float, dt: float, dirichlet: Optional[np.ndarray] = None):
        self.mesh = mesh
        n = int(mesh.sea.sum())
        A = (sp.identity(n, format="lil") - dt * coefficient * mesh.laplacian()).tolil()
        self.fixed = None
        if dirichlet is not None and dirichlet.any():
            self.fixed = mesh.index()[dirichlet & mesh.sea]
            for k in self.fixed:
                A.rows[k] = [k]
                A.data[k] = [1.0]
        self._solve = factorized(A.tocsc())

    def __call__(self, F: np.ndarray, fixed_values: Optional[np.ndarray] = None) -> np.ndarray:
        rhs = F[self.mesh.sea].copy()
        if self.fixed is not None and fixed_values is not None:
            rhs[self.fixed] = fixed_values
        out = np.zeros(self.mesh.shape)
        out[self.mesh.sea] = self._solve(rhs)
        return out


def catch_field(mesh: Mesh, positions: np.ndarray, active: np.ndarray, Q: float,
                radius_cells: float = 2.0) -> np.ndarray:
    """Q times a unit-mass cone kernel of radius radius_cells * h at every active boat

    A negative Q gives a negative catch, i.e. fish released around the boats.
    """
    out = np.zeros(mesh.shape)
    if Q == 0 or not np.any(active):
        return out
    X, Y = mesh.centres()
    R = radius_cells * mesh.h
    for x, y in positions[active]:
        w = np.maximum(1.0 - np.hypot(X - x, Y - y) / R, 0.0) * mesh.sea
        total = w.sum() * mesh.h ** 2
        if total > 0:
            out += w / total
    return Q * out


def step_plankton(P: np.ndarray, B: np.ndarray, current: Current, mesh: Mesh, params: SpatialParams,
                  dt: float, substeps: int = 1, solver: Optional[DiffusionSolver] = None,
                  boundary_values: Optional[np.ndarray] = None) -> np.ndarray:
    """dP/dt + v . grad P - mu Lap P = P (1 - P - b B)"""
    sub = dt / substeps
    _check_transport(mesh, current.vx, current.vy, sub)
    for _ in range(substeps):
        P = advect_upwind(P, current.vx, current.vy, mesh.h, sub)
    P = np.where(mesh.sea, logistic_step(P, 1.0 - params.b * B, 1.0, dt), 0.0)
    if params.mu > 0:
        if solver is None:
            dirichlet = (mesh.gamma1 | mesh.gamma2) if params.plankton_boundary == "dirichlet" else None
            solver = DiffusionSolver(mesh, params.mu, dt, dirichlet)
        P = solver(P, boundary_values)
    elif boundary_values is not None and params.plankton_boundary == "dirichlet":
        P = P.copy()
        P[(mesh.gamma1 | mesh.gamma2)] = boundary_values
    return P


def fish_velocity(mesh: Mesh, params: SpatialParams, current: Current, P: np.ndarray):
    """Face velocities carrying the fish: the sea current, or taxis up the plankton gradient"""
    if params.fish_drift == "plankton":
        return face_gradient_velocity(mesh, P, params.taxis)
    return current.vx, current.vy


def step_biomass(B: np.ndarray, P: np.ndarray, current: Current, catch: np.ndarray, mesh: Mesh,
                 params: SpatialParams, dt: float, substeps: int = 1,
                 solver: Optional[DiffusionSolver] = None):
    """dB/dt + div(v B) - nu Lap B = B (P r - catch - kappa B); returns (B, StepBudget)"""
    mass_before = mesh.integrate(B)
    vx, vy = fish_velocity(mesh, params, current, P)
    sub = dt / substeps
    _check_transport(mesh, vx, vy, sub)
    for _ in range(substeps):
        B = advect_conservative(B, vx, vy, mesh.h, sub)
    before_reaction = mesh.integrate(B)
    B = np.where(mesh.sea, logistic_step(B, params.r * P - catch, params.kappa, dt), 0.0)
    reaction = mesh.integrate(B) - before_reaction
    if params.nu > 0:
        solver = solver or DiffusionSolver(mesh, params.nu, dt)
        B = solver(B)
    B = np.maximum(B, 0.0)
    return B, StepBudget(mass_before, mesh.integrate(B), reaction)


def update_quota(Q: float, B_now: np.ndarray, B_prev: np.ndarray, mesh: Mesh, dt: float,
                 weight: float = 1.0, floor: Optional[float] = 0.0) -> float:
    """Q + weight * dt * integral(B_now - B_prev), clipped below at floor unless floor is None"""
    if B_now.shape != B_prev.shape:
        raise ValueError("Biomass fields live on different meshes")
    Q = Q + weight * dt * mesh.integrate(B_now - B_prev)
    return Q if floor is None else max(floor, Q)
