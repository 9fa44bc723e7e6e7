"""
Distributed quota control for two species

The density rho(B, t) of the controlled process solves a Kolmogorov forward
equation on a truncated box.  The box is split into n x n cells of width h;
advection is first-order upwind, diffusion is in conservative flux form and
time stepping is explicit Euler.  The adjoint is the exact transpose of the
discrete forward step, so the gradient of the discrete objective is exact up
to rounding except where an upwind direction switches.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from tqdm import tqdm

from exceptions import SchemeFaultError, StabilityError, UnsupportedModeError
from policies import GridPolicy
from sde_core import ModelParams

logger = logging.getLogger(__name__)

BOUNDARIES = ("no_flux", "outflow")


@dataclass(frozen=True)
class Grid2D:
    b_min: float = 0.0
    b_max: float = 3.0
    n: int = 100

    def __post_init__(self):
        if self.b_min < 0:
            raise ValueError(f"b_min must be non-negative, got {self.b_min}")
        if not self.b_max > self.b_min:
            raise ValueError(f"b_max={self.b_max} must exceed b_min={self.b_min}")
        if self.n < 8:
            raise ValueError(f"At least 8 cells per axis are required, got {self.n}")

    @property
    def h(self) -> float:
        return (self.b_max - self.b_min) / self.n

    @property
    def centres(self) -> np.ndarray:
        return self.b_min + (np.arange(self.n) + 0.5) * self.h

    @property
    def faces(self) -> np.ndarray:
        """Interior face coordinates along one axis"""
        return self.b_min + np.arange(1, self.n) * self.h

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.centres, self.centres, indexing="ij")

    def integrate(self, values: np.ndarray) -> float:
        return float(values.sum() * self.h ** 2)


@dataclass
class GridField:
    """Time-independent quota per species at the cell centres, shape (2, n, n)"""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = (2, self.grid.n, self.grid.n)
        if self.values.shape != expected:
            raise ValueError(f"Grid field must have shape {expected}, got {self.values.shape}")

    @classmethod
    def constant(cls, grid: Grid2D, level) -> "GridField":
        level = np.broadcast_to(np.asarray(level, dtype=float), (2,))
        return cls(grid, np.stack([np.full((grid.n, grid.n), v) for v in level]))

    def copy(self) -> "GridField":
        return GridField(self.grid, self.values.copy())

    def as_policy(self, u_min: float = -np.inf, u_max: float = np.inf) -> GridPolicy:
        """Bilinear interpolation between the cell centres, usable by sde_core"""
        axes = [self.grid.centres, self.grid.centres]
        return GridPolicy(axes, self.values, u_min, u_max)

    def refine(self) -> "GridField":
        """Same field on a grid with half the cell width, bilinear between the old centres"""
        fine = Grid2D(self.grid.b_min, self.grid.b_max, 2 * self.grid.n)
        X, Y = fine.mesh()
        points = np.column_stack([X.ravel(), Y.ravel()])
        values = self.as_policy().raw(points, 0.0)
        return GridField(fine, values.T.reshape(2, fine.n, fine.n))


@dataclass
class DensityField:
    grid: Grid2D
    times: np.ndarray
    values: np.ndarray
    boundary_outflow: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def mass(self) -> np.ndarray:
        return self.values.sum(axis=(1, 2)) * self.grid.h ** 2


@dataclass
class AdjointField:
    grid: Grid2D
    times: np.ndarray
    values: np.ndarray


@dataclass
class OptimizeResult:
    u: GridField
    J: float
    history: List[dict] = field(default_factory=list)
    converged: bool = False
    reason: str = ""

    @property
    def J_history(self) -> List[float]:
        return [row["J"] for row in self.history]


def _check_params(params: ModelParams):
    if params.d != 2:
        raise UnsupportedModeError(f"The density solver handles two species, got d={params.d}")
    if params.dynamics != "reduced":
        raise UnsupportedModeError("The density solver uses the reduced biomass dynamics")


def _one_d(n: int, h: float):
    """Face-from-cell difference, face average, and centred cell derivative"""
    rows = np.arange(n - 1)
    Df = sp.csr_matrix((np.r_[-np.ones(n - 1), np.ones(n - 1)] / h,
                        (np.r_[rows, rows], np.r_[rows, rows + 1])), shape=(n - 1, n))
    A = sp.csr_matrix((np.full(2 * (n - 1), 0.5), (np.r_[rows, rows], np.r_[rows, rows + 1])),
                      shape=(n - 1, n))
    Dc = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        Dc[i, i - 1], Dc[i, i + 1] = -0.5 / h, 0.5 / h
    Dc[0, 0], Dc[0, 1] = -1.0 / h, 1.0 / h
    Dc[n - 1, n - 2], Dc[n - 1, n - 1] = -1.0 / h, 1.0 / h
    return Df, A, Dc.tocsr()


@dataclass
class _Stencils:
    """Sparse building blocks shared by the forward, adjoint and gradient passes"""

    Df: Tuple[sp.csr_matrix, sp.csr_matrix]
    avg: Tuple[sp.csr_matrix, sp.csr_matrix]
    left: Tuple[sp.csr_matrix, sp.csr_matrix]
    right: Tuple[sp.csr_matrix, sp.csr_matrix]
    D: Tuple[sp.csr_matrix, sp.csr_matrix]
    face_B: Tuple[np.ndarray, np.ndarray]


def _stencils(grid: Grid2D) -> _Stencils:
    n, h = grid.n, grid.h
    I = sp.identity(n, format="csr")
    Df, A, Dc = _one_d(n, h)
    rows = np.arange(n - 1)
    Sl = sp.csr_matrix((np.ones(n - 1), (rows, rows)), shape=(n - 1, n))
    Sr = sp.csr_matrix((np.ones(n - 1), (rows, rows + 1)), shape=(n - 1, n))
    c, f = grid.centres, grid.faces
    # coordinates of the two face families: x-faces (n-1, n), y-faces (n, n-1)
    fx = (np.broadcast_to(f[:, None], (n - 1, n)), np.broadcast_to(c[None, :], (n - 1, n)))
    fy = (np.broadcast_to(c[:, None], (n, n - 1)), np.broadcast_to(f[None, :], (n, n - 1)))
    return _Stencils(
        Df=(sp.kron(Df, I, format="csr"), sp.kron(I, Df, format="csr")),
        avg=(sp.kron(A, I, format="csr"), sp.kron(I, A, format="csr")),
        left=(sp.kron(Sl, I, format="csr"), sp.kron(I, Sl, format="csr")),
        right=(sp.kron(Sr, I, format="csr"), sp.kron(I, Sr, format="csr")),
        D=(sp.kron(Dc, I, format="csr"), sp.kron(I, Dc, format="csr")),
        face_B=(np.stack(fx), np.stack(fy)),
    )


def _velocity(params: ModelParams, B1: np.ndarray, B2: np.ndarray, u: np.ndarray, axis: int) -> np.ndarray:
    Ba = B1 if axis == 0 else B2
    return Ba * (params.r[axis] - params.kappa[axis, 0] * B1 - params.kappa[axis, 1] * B2 - u)


@dataclass
class _Operator:
    L: sp.csr_matrix
    out_rate: np.ndarray
    velocity: Tuple[np.ndarray, np.ndarray]
    boundary: List[Tuple[int, np.ndarray, np.ndarray, np.ndarray]]


def _boundary_faces(grid: Grid2D):
    """(axis, cell indices, face coordinates (B1, B2), outward sign) for the four box sides"""
    n, c = grid.n, grid.centres
    idx = np.arange(n * n).reshape(n, n)
    lo, hi = np.full(n, grid.b_min), np.full(n, grid.b_max)
    return [
        (0, idx[0, :], (lo, c), -1.0),
        (0, idx[-1, :], (hi, c), 1.0),
        (1, idx[:, 0], (c, lo), -1.0),
        (1, idx[:, -1], (c, hi), 1.0),
    ]


def build_operator(grid: Grid2D, params: ModelParams, u: GridField, stencils: Optional[_Stencils] = None,
                   boundary: str = "no_flux") -> _Operator:
    """Sparse generator L(u) of the semi-discrete forward equation d rho/dt = L rho"""
    _check_params(params)
    if boundary not in BOUNDARIES:
        raise ValueError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")
    st = stencils or _stencils(grid)
    n, h = grid.n, grid.h
    N2 = n * n
    B1, B2 = (arr.ravel() for arr in grid.mesh())

    L = sp.csr_matrix((N2, N2))
    velocities = []
    for axis in (0, 1):
        fB1, fB2 = (arr.ravel() for arr in st.face_B[axis])
        u_face = st.avg[axis] @ u.values[axis].ravel()
        v = _velocity(params, fB1, fB2, u_face, axis)
        velocities.append(v)
        flux = sp.diags(np.maximum(v, 0.0)) @ st.left[axis] + sp.diags(np.minimum(v, 0.0)) @ st.right[axis]
        L = L + st.Df[axis].T @ flux

    sig2 = params.sigma ** 2
    for axis, Ba in ((0, B1), (1, B2)):
        a = sp.diags(0.5 * sig2 * Ba ** 2)
        L = L - st.Df[axis].T @ (st.Df[axis] @ a)
    if params.noise == "common" and sig2 > 0:
        a12 = sp.diags(0.5 * sig2 * B1 * B2)
        mixed = st.Df[0].T @ (st.avg[0] @ st.D[1]) + st.Df[1].T @ (st.avg[1] @ st.D[0])
        L = L - mixed @ a12

    out_rate = np.zeros(N2)
    faces = []
    if boundary == "outflow":
        for axis, cells, (fb1, fb2), sign in _boundary_faces(grid):
            v = _velocity(params, fb1, fb2, u.values[axis].ravel()[cells], axis)
            outward = np.maximum(sign * v, 0.0)
            out_rate[cells] += outward / h
            faces.append((axis, cells, sign * (fb1 if axis == 0 else fb2), sign * v > 0))
        L = L - sp.diags(out_rate)
    return _Operator(L.tocsr(), out_rate, (velocities[0], velocities[1]), faces)


def _max_rate(op: _Operator) -> float:
    return float(np.max(-op.L.diagonal()))


def stable_dt(grid: Grid2D, params: ModelParams, u: GridField, boundary: str = "no_flux",
              safety: float = 0.9) -> float:
    """Largest explicit step with T/dt an integer, at ``safety`` times the bound"""
    rate = _max_rate(build_operator(grid, params, u, boundary=boundary))
    if rate <= 0:
        return params.T
    N = math.ceil(params.T * rate / safety)
    return params.T / N


def _advective_diagonal(st: _Stencils, velocities, h: float) -> np.ndarray:
    """Outgoing upwind rate of every cell for the given face velocities"""
    rate = 0.0
    for axis, v in enumerate(velocities):
        rate = rate + (st.left[axis].T @ np.maximum(v, 0.0) - st.right[axis].T @ np.minimum(v, 0.0)) / h
    return rate


def box_stable_dt(grid: Grid2D, params: ModelParams, boundary: str = "no_flux",
                  safety: float = 0.9) -> float:
    """Largest explicit step that stays stable for every quota field inside [u_min, u_max]

    Each face velocity depends on a single quota value and is affine in it,
    so the outgoing rate of a face is largest at one of the two box ends.
    """
    if not (np.isfinite(params.u_min) and np.isfinite(params.u_max)):
        raise ValueError("A bounded quota box is required for a box-wide stable step")
    st = _stencils(grid)
    h = grid.h
    op = build_operator(grid, params, GridField.constant(grid, params.u_min), st, boundary)
    # diffusion part, independent of the quota
    rate = -op.L.diagonal() - _advective_diagonal(st, op.velocity, h) - op.out_rate
    for axis in (0, 1):
        fB1, fB2 = (arr.ravel() for arr in st.face_B[axis])
        v_lo = _velocity(params, fB1, fB2, params.u_min, axis)
        v_hi = _velocity(params, fB1, fB2, params.u_max, axis)
        rate = rate + (st.left[axis].T @ np.maximum(np.maximum(v_lo, v_hi), 0.0)
                       - st.right[axis].T @ np.minimum(np.minimum(v_lo, v_hi), 0.0)) / h
    if boundary == "outflow":
        for axis, cells, (fb1, fb2), sign in _boundary_faces(grid):
            out = np.maximum(sign * _velocity(params, fb1, fb2, params.u_min, axis),
                             sign * _velocity(params, fb1, fb2, params.u_max, axis))
            rate[cells] += np.maximum(out, 0.0) / h
    max_rate = float(rate.max())
    if max_rate <= 0:
        return params.T
    return params.T / math.ceil(params.T * max_rate / safety)


def _check_dt(op: _Operator, dt: float):
    rate = _max_rate(op)
    if dt * rate > 1.0 + 1e-12:
        raise StabilityError(f"Explicit step dt={dt:.6g} violates dt * max rate <= 1", 0.9 / rate)


def initial_density(grid: Grid2D, B0, sigma_init: float) -> np.ndarray:
    """Gaussian of mean B0 and std sigma_init per axis, truncated to the box, mass 1"""
    B0 = np.asarray(B0, dtype=float)
    if np.any(B0 < grid.b_min) or np.any(B0 > grid.b_max):
        raise ValueError(f"B0={B0.tolist()} lies outside the box [{grid.b_min}, {grid.b_max}]^2")
    n, h = grid.n, grid.h
    if sigma_init == 0:
        rho = np.zeros((n, n))
        i, j = (np.clip(((B0 - grid.b_min) / h).astype(int), 0, n - 1))
        rho[i, j] = 1.0 / h ** 2
        return rho
    margin = np.minimum(B0 - grid.b_min, grid.b_max - B0)
    if np.any(margin < 3 * sigma_init):
        logger.warning(f"B0={B0.tolist()} is closer than 3 sigma_init to the box edge; density is truncated")
    X, Y = grid.mesh()
    rho = np.exp(-((X - B0[0]) ** 2 + (Y - B0[1]) ** 2) / (2 * sigma_init ** 2))
    return rho / (rho.sum() * h ** 2)


def _gradients(st: _Stencils, u: GridField) -> np.ndarray:
    """g[j, i] = d u_j / d B_i at the cell centres, flattened"""
    return np.array([[st.D[i] @ u.values[j].ravel() for i in (0, 1)] for j in (0, 1)])


def running_source(grid: Grid2D, params: ModelParams, u: GridField,
                   stencils: Optional[_Stencils] = None) -> np.ndarray:
    """s = w |B - B^d|^2 - alpha . u + sum_j beta_j d[u_j]/dt, flattened"""
    st = stencils or _stencils(grid)
    B = np.stack([arr.ravel() for arr in grid.mesh()])
    track = params.tracking_weight * ((B - params.B_desired[:, None]) ** 2).sum(axis=0)
    reward = (params.alpha[:, None] * u.values.reshape(2, -1)).sum(axis=0)
    g = _gradients(st, u)
    sig2 = params.sigma ** 2
    if params.noise == "common":
        rates = sig2 * (B[None, :, :] * g).sum(axis=1) ** 2
    else:
        rates = sig2 * ((B[None, :, :] * g) ** 2).sum(axis=1)
    return track - reward + (params.beta[:, None] * rates).sum(axis=0)


def _resolve_dt(grid: Grid2D, params: ModelParams, u: GridField, dt: Optional[float], boundary: str) -> float:
    if dt is None:
        return stable_dt(grid, params, u, boundary)
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return dt


def solve_forward(grid: Grid2D, params: ModelParams, u: GridField, dt: Optional[float] = None,
                  boundary: str = "no_flux", progress: bool = False) -> Tuple[DensityField, float]:
    """March the forward equation and accumulate the objective J alongside"""
    dt = _resolve_dt(grid, params, u, dt, boundary)
    st = _stencils(grid)
    op = build_operator(grid, params, u, st, boundary)
    _check_dt(op, dt)
    N = max(1, int(round(params.T / dt)))
    h2 = grid.h ** 2
    s = running_source(grid, params, u, st)

    rho = initial_density(grid, params.B0, params.sigma_init).ravel()
    values = np.empty((N + 1, grid.n * grid.n))
    outflow = np.zeros(N)
    values[0] = rho
    J = 0.0
    for k in tqdm(range(N), desc="forward", disable=not progress):
        J += dt * h2 * float(s @ rho)
        outflow[k] = dt * h2 * float(op.out_rate @ rho)
        rho = rho + dt * (op.L @ rho)
        mass = rho.sum() * h2
        if not np.isfinite(mass) or mass < 0:
            raise SchemeFaultError(f"Density mass became {mass} at t={(k + 1) * dt:.6g}")
        values[k + 1] = rho
    times = np.arange(N + 1) * dt
    logger.debug(f"Forward solve: {N} steps of {dt:.3e}, J={J:.6f}")
    density = DensityField(grid, times, values.reshape(N + 1, grid.n, grid.n), outflow)
    return density, J


def _grid_dt(grid: Grid2D, params: ModelParams, u: GridField, boundary: str) -> float:
    if np.isfinite(params.u_max - params.u_min):
        return box_stable_dt(grid, params, boundary)
    return stable_dt(grid, params, u, boundary)


def extrapolated_objective(grid: Grid2D, params: ModelParams, u: GridField,
                           boundary: str = "no_flux") -> Tuple[float, float, float]:
    """Richardson value 2 J(h/2) - J(h) with the two underlying objectives

    Upwind transport makes J first order in h; the combination removes the
    leading term.  Each solve uses its own stable step.
    """
    _, J_coarse = solve_forward(grid, params, u, _grid_dt(grid, params, u, boundary), boundary)
    fine = u.refine()
    _, J_fine = solve_forward(fine.grid, params, fine, _grid_dt(fine.grid, params, fine, boundary), boundary)
    J = 2.0 * J_fine - J_coarse
    logger.debug(f"Extrapolated J={J:.6f} from J(h)={J_coarse:.6f}, J(h/2)={J_fine:.6f}")
    return J, J_coarse, J_fine


def solve_adjoint(grid: Grid2D, params: ModelParams, u: GridField, dt: Optional[float] = None,
                  boundary: str = "no_flux", progress: bool = False) -> AdjointField:
    """Backward march of the transposed step with zero terminal value

    The stored field is the multiplier divided by the cell area, so a
    constant source C with no transport gives C (T - t).
    """
    dt = _resolve_dt(grid, params, u, dt, boundary)
    st = _stencils(grid)
    op = build_operator(grid, params, u, st, boundary)
    _check_dt(op, dt)
    N = max(1, int(round(params.T / dt)))
    s = running_source(grid, params, u, st)
    LT = op.L.T.tocsr()

    lam = np.zeros(grid.n * grid.n)
    values = np.empty((N + 1, grid.n * grid.n))
    values[N] = lam
    for k in tqdm(range(N - 1, -1, -1), desc="adjoint", disable=not progress):
        lam = lam + dt * (LT @ lam) + dt * s
        values[k] = lam
    times = np.arange(N + 1) * dt
    return AdjointField(grid, times, values.reshape(N + 1, grid.n, grid.n))


def objective_gradient(grid: Grid2D, params: ModelParams, u: GridField, rho: DensityField,
                       rho_star: AdjointField, boundary: str = "no_flux") -> np.ndarray:
    """L2 (Riesz) representative of dJ/du at the cell centres, shape (2, n, n)

    The directional derivative along du is ``h^2 * sum(grad * du)``.
    """
    if rho.values.shape != rho_star.values.shape or rho.grid != grid or rho_star.grid != grid:
        raise ValueError("Density and adjoint fields must share the grid and the time slicing")
    if u.grid != grid:
        raise ValueError("Quota field lives on a different grid")
    st = _stencils(grid)
    op = build_operator(grid, params, u, st, boundary)
    h, h2 = grid.h, grid.h ** 2
    dt = rho.dt
    N = len(rho.times) - 1
    R = rho.values[:N].reshape(N, -1).sum(axis=0)
    B = np.stack([arr.ravel() for arr in grid.mesh()])

    # running source: reward and quadratic-variation penalty
    grad = np.zeros((2, grid.n * grid.n))
    g = _gradients(st, u)
    sig2 = params.sigma ** 2
    for j in (0, 1):
        grad[j] -= params.alpha[j] * R
        if params.beta[j] != 0 and sig2 > 0:
            if params.noise == "common":
                inner = (B * g[j]).sum(axis=0)
                for i in (0, 1):
                    grad[j] += st.D[i].T @ (2 * sig2 * params.beta[j] * R * B[i] * inner)
            else:
                for i in (0, 1):
                    grad[j] += st.D[i].T @ (2 * sig2 * params.beta[j] * R * B[i] ** 2 * g[j][i])
    grad *= dt * h2

    # transport: the upwind flux of species-j faces depends on u_j
    lam = rho_star.values.reshape(N + 1, -1) * h2
    rho_flat = rho.values.reshape(N + 1, -1)
    for axis in (0, 1):
        v = op.velocity[axis]
        pos, neg = (v > 0).astype(float), (v < 0).astype(float)
        Df, left, right = st.Df[axis], st.left[axis], st.right[axis]
        face_sum = np.zeros_like(v)
        for k in range(N):
            upwind = pos * (left @ rho_flat[k]) + neg * (right @ rho_flat[k])
            face_sum += (Df @ lam[k + 1]) * upwind
        fBa = st.face_B[axis][axis].ravel()
        grad[axis] += dt * (st.avg[axis].T @ (face_sum * -fBa))
    for axis, cells, signed_B, outward in op.boundary:
        pair = (lam[1:, cells] * rho_flat[:N, cells]).sum(axis=0)
        # minus the derivative of the outward rate: outward * sign * B_face / h
        grad[axis, cells] += dt * pair * outward * signed_B / h

    return (grad / h2).reshape(2, grid.n, grid.n)


def directional_derivative(grid: Grid2D, grad: np.ndarray, du: np.ndarray) -> float:
    return float((grad * du).sum() * grid.h ** 2)


def project_box(u: GridField, u_min: float, u_max: float) -> GridField:
    return GridField(u.grid, np.clip(u.values, u_min, u_max))


def density_moments(grid: Grid2D, rho: np.ndarray) -> dict:
    """Mass, mean and covariance of one density slice"""
    X, Y = grid.mesh()
    h2 = grid.h ** 2
    mass = float(rho.sum() * h2)
    if mass <= 0:
        raise ValueError("Density slice has no mass")
    mean = np.array([(X * rho).sum(), (Y * rho).sum()]) * h2 / mass
    dX, dY = X - mean[0], Y - mean[1]
    cov = np.array([
        [(dX * dX * rho).sum(), (dX * dY * rho).sum()],
        [(dX * dY * rho).sum(), (dY * dY * rho).sum()],
    ]) * h2 / mass
    return {"mass": mass, "mean": mean, "cov": cov}


def _projected_gradient_norm(grid: Grid2D, u: GridField, grad: np.ndarray, u_min: float, u_max: float) -> float:
    pg = u.values - np.clip(u.values - grad, u_min, u_max)
    return float(np.sqrt((pg ** 2).sum() * grid.h ** 2))


def optimize_quota(grid: Grid2D, params: ModelParams, u0: GridField, dt: Optional[float] = None,
                   max_iter: int = 50, tol: float = 1e-6, min_step: float = 1e-8,
                   boundary: str = "no_flux", progress: bool = False) -> OptimizeResult:
    """Projected gradient descent with backtracking on the time-independent quota field

    Only J-decreasing steps are accepted.  The step is scaled so the first
    trial moves the quota by at most half the box width, doubled after an
    accepted step and halved on rejection.
    """
    u = project_box(u0, params.u_min, params.u_max)
    if not np.array_equal(u.values, u0.values):
        logger.warning("Initial quota was outside the box and has been projected")
    if dt is None and np.isfinite(params.u_max - params.u_min):
        dt = box_stable_dt(grid, params, boundary)
    dt = _resolve_dt(grid, params, u, dt, boundary)
    box = params.u_max - params.u_min if np.isfinite(params.u_max - params.u_min) else 1.0

    rho, J = solve_forward(grid, params, u, dt, boundary)
    history = [{"iter": 0, "J": J, "step": 0.0, "grad_norm": float("nan")}]
    step = None
    converged, reason = False, "max iterations reached"
    for it in tqdm(range(1, max_iter + 1), desc="optimize", disable=not progress):
        rho_star = solve_adjoint(grid, params, u, dt, boundary)
        grad = objective_gradient(grid, params, u, rho, rho_star, boundary)
        gnorm = _projected_gradient_norm(grid, u, grad, params.u_min, params.u_max)
        history[-1]["grad_norm"] = gnorm
        if gnorm < tol:
            converged, reason = True, "projected gradient below tolerance"
            break
        if step is None:
            step = 0.5 * box / max(float(np.abs(grad).max()), 1e-300)

        while step >= min_step:
            trial = project_box(GridField(grid, u.values - step * grad), params.u_min, params.u_max)
            rho_trial, J_trial = solve_forward(grid, params, trial, dt, boundary)
            if J_trial < J:
                break
            step *= 0.5
        else:
            converged, reason = True, "stagnation: no decrease at the minimum step"
            logger.warning(f"Line search stagnated at iteration {it}, J={J:.6f}")
            break

        u, rho, J = trial, rho_trial, J_trial
        history.append({"iter": it, "J": J, "step": step, "grad_norm": float("nan")})
        logger.info(f"Quota optimisation iteration {it}: J={J:.6f}, step={step:.3e}, |Pg|={gnorm:.3e}")
        step *= 2.0
    return OptimizeResult(u, J, history, converged, reason)
