"""
Single-site multi-species fishery model
Deterministic and stochastic integration, Monte-Carlo evaluation of the quota objective
"""

import copy
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config import EFFORT_MODEL_TRUTH, PATH_CHUNK, TWO_SPECIES_DEFAULTS, WORKERS
from exceptions import IntegrationError, UnsupportedModeError
from policies import ConstantPolicy, QuotaPolicy

logger = logging.getLogger(__name__)

NOISE_MODES = ("independent", "common")
DYNAMICS = ("reduced", "effort")
SCHEMES = ("log", "clamped")


@dataclass
class ModelParams:
    """Coefficients of the single-site model

    ``kappa`` is the d x d capacity matrix; ``sigma`` scales the biomass noise
    (applied as sigma * I), ``sigma_prime`` the effort noise and
    ``sigma_init`` the initial-condition noise of both B(0) and E(0).
    """

    r: np.ndarray
    kappa: np.ndarray
    B0: np.ndarray
    T: float = 2.0
    sigma: float = 0.0
    sigma_prime: float = 0.0
    sigma_init: float = 0.0
    a: float = 0.0
    c: float = 0.0
    q: float = 1.0
    E0: float = 0.0
    alpha: Optional[np.ndarray] = None
    beta: Optional[np.ndarray] = None
    B_desired: Optional[np.ndarray] = None
    u_min: float = 0.0
    u_max: float = np.inf
    tracking_weight: float = 1.0
    noise: str = "independent"
    dynamics: str = "reduced"
    scheme: str = "log"

    def __post_init__(self):
        self.r = np.atleast_1d(np.asarray(self.r, dtype=float))
        d = self.r.size
        self.kappa = np.asarray(self.kappa, dtype=float).reshape(d, d)
        self.B0 = np.atleast_1d(np.asarray(self.B0, dtype=float))
        self.alpha = _vector_or_zeros(self.alpha, d, "alpha")
        self.beta = _vector_or_zeros(self.beta, d, "beta")
        self.B_desired = _vector_or_zeros(self.B_desired, d, "B_desired")
        if self.B0.size != d:
            raise ValueError(f"B0 has {self.B0.size} entries for {d} species")
        if d < 1:
            raise ValueError("At least one species is required")
        if not self.T > 0:
            raise ValueError(f"Horizon T must be positive, got {self.T}")
        if self.u_min > self.u_max:
            raise ValueError(f"u_min={self.u_min} exceeds u_max={self.u_max}")
        for name in ("sigma", "sigma_prime", "sigma_init"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if np.any(np.diag(self.kappa) <= 0):
            raise ValueError("Diagonal of kappa must be positive (self-limitation)")
        if self.noise not in NOISE_MODES:
            raise ValueError(f"noise must be one of {NOISE_MODES}, got {self.noise!r}")
        if self.dynamics not in DYNAMICS:
            raise ValueError(f"dynamics must be one of {DYNAMICS}, got {self.dynamics!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")

    @property
    def d(self) -> int:
        return self.r.size

    def with_noise(self, sigma: float) -> "ModelParams":
        """Same model with sigma = sigma' = sigma_init"""
        return replace(self, sigma=sigma, sigma_prime=sigma, sigma_init=sigma)


def _vector_or_zeros(value, d: int, name: str) -> np.ndarray:
    if value is None:
        return np.zeros(d)
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(d, arr[0])
    if arr.size != d:
        raise ValueError(f"{name} has {arr.size} entries for {d} species")
    return arr


def two_species_params(**overrides) -> ModelParams:
    """The two-species site used for the quota experiments"""
    values = copy.deepcopy(TWO_SPECIES_DEFAULTS)
    values.update(overrides)
    return ModelParams(**values)


@dataclass(frozen=True)
class State:
    B: np.ndarray
    E: float
    t: float


@dataclass(frozen=True)
class Trajectory:
    """One simulated path; arrays are read-only"""

    times: np.ndarray
    B: np.ndarray
    E: np.ndarray
    u: np.ndarray
    rng_seed: Optional[int] = None
    path_index: int = 0

    def __post_init__(self):
        for arr in (self.times, self.B, self.E, self.u):
            arr.flags.writeable = False

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def states(self) -> List[State]:
        return [State(self.B[k], float(self.E[k]), float(self.times[k])) for k in range(len(self.times))]

    @property
    def controls(self) -> np.ndarray:
        return self.u

    def __len__(self) -> int:
        return len(self.times)


def n_steps(T: float, dt: float) -> int:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if dt > T:
        raise ValueError(f"dt={dt} exceeds the horizon T={T}")
    return max(1, int(round(T / dt)))


def _capacity_term(kappa: np.ndarray, B: np.ndarray) -> np.ndarray:
    # elementwise product then a short sum keeps results independent of batch size
    return (B[..., None, :] * kappa).sum(axis=-1)


def drift_eval(params: ModelParams, B, E, u) -> Tuple[np.ndarray, np.ndarray]:
    """Drift of the biomass and of the effort

    dB = B * (r - kappa B - u), dE = a - (B . u + c E) with u = Q E the
    effort-aggregated harvest rate.
    """
    B = np.asarray(B, dtype=float)
    u = np.asarray(u, dtype=float)
    if B.shape[-1] != params.d or u.shape[-1] != params.d:
        raise ValueError(
            f"Dimension mismatch: model has {params.d} species, got B{B.shape} and u{u.shape}"
        )
    E = np.asarray(E, dtype=float)
    dB = B * (params.r - _capacity_term(params.kappa, B) - u)
    dE = params.a - (B * u).sum(axis=-1) - params.c * E
    return dB, dE


def _harvest(params: ModelParams, policy: Optional[QuotaPolicy], B: np.ndarray,
             E: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """Return (applied control, harvest rate u entering the drift)"""
    if params.dynamics == "reduced":
        if policy is None:
            zero = np.zeros_like(B)
            return zero, zero
        u = policy.eval(B, t)
        return u, u
    if policy is None:
        quota = np.full_like(B, params.q)
    else:
        quota = np.minimum(policy.eval(B, t), params.q)
    return quota, quota * E[:, None]


def _integrate(params: ModelParams, policy: Optional[QuotaPolicy], dt: float,
               normals: np.ndarray):
    """March a batch of paths; ``normals`` has shape (n, N + 1, d + 1)"""
    d = params.d
    N = normals.shape[1] - 1
    sqdt = math.sqrt(dt)
    n = normals.shape[0]

    B = np.maximum(params.B0 + params.sigma_init * normals[:, 0, :d], 0.0)
    E = np.maximum(params.E0 + params.sigma_init * normals[:, 0, d], 0.0)
    if policy is not None:
        policy.reset(B)

    Bs = np.empty((n, N + 1, d))
    Es = np.empty((n, N + 1))
    Us = np.empty((n, N + 1, d))
    for k in range(N + 1):
        t = k * dt
        applied, harvest = _harvest(params, policy, B, E, t)
        Bs[:, k] = B
        Es[:, k] = E
        Us[:, k] = applied
        if k == N:
            break
        growth = params.r - _capacity_term(params.kappa, B) - harvest
        if params.dynamics == "effort":
            dE = params.a - (B * harvest).sum(axis=-1) - params.c * E
        if params.noise == "common":
            dW = sqdt * normals[:, k + 1, :1]
        else:
            dW = sqdt * normals[:, k + 1, :d]
        if params.scheme == "log":
            B = B * np.exp((growth - 0.5 * params.sigma ** 2) * dt + params.sigma * dW)
        else:
            B = np.maximum(B + B * growth * dt + params.sigma * B * dW, 0.0)
        if params.dynamics == "effort":
            dWp = sqdt * normals[:, k + 1, d]
            E = np.maximum(E + dE * dt + params.sigma_prime * E * dWp, 0.0)
        if not (np.all(np.isfinite(B)) and np.all(np.isfinite(E))):
            raise IntegrationError(t + dt)
    return Bs, Es, Us


def path_normals(seed: int, path_index: int, d: int, N: int) -> np.ndarray:
    """Standard normals of one path from its own counter-based Philox stream

    Row 0 holds the initial-condition draws, row k the increments of step k - 1.
    """
    seq = np.random.SeedSequence(seed, spawn_key=(path_index,))
    rng = np.random.Generator(np.random.Philox(seq))
    return rng.standard_normal((N + 1, d + 1))


def _batch_normals(seed: int, indices: Sequence[int], d: int, N: int) -> np.ndarray:
    return np.stack([path_normals(seed, k, d, N) for k in indices])


def solve_deterministic(params: ModelParams, u: Optional[QuotaPolicy], dt: float) -> Trajectory:
    """Noise-free integration with the same step as the stochastic solver"""
    N = n_steps(params.T, dt)
    normals = np.zeros((1, N + 1, params.d + 1))
    quiet = replace(params, sigma=0.0, sigma_prime=0.0, sigma_init=0.0)
    policy = copy.deepcopy(u) if (u is not None and u.stateful) else u
    Bs, Es, Us = _integrate(quiet, policy, dt, normals)
    times = np.arange(N + 1) * dt
    return Trajectory(times, Bs[0], Es[0], Us[0], rng_seed=None, path_index=0)


def _chunks(n_paths: int, chunk: int) -> List[range]:
    return [range(s, min(s + chunk, n_paths)) for s in range(0, n_paths, chunk)]


def _run_chunks(worker, n_paths: int, chunk: int, workers: int):
    blocks = _chunks(n_paths, chunk)
    if workers <= 1 or len(blocks) == 1:
        return [worker(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, blocks))


def _simulate_block(params: ModelParams, policy: Optional[QuotaPolicy], dt: float,
                    seed: int, indices: range):
    N = n_steps(params.T, dt)
    normals = _batch_normals(seed, indices, params.d, N)
    local = copy.deepcopy(policy) if (policy is not None and policy.stateful) else policy
    return _integrate(params, local, dt, normals)


def simulate_paths(params: ModelParams, u: Optional[QuotaPolicy], dt: float, n_paths: int,
                   seed: int, chunk: int = PATH_CHUNK, workers: int = WORKERS) -> List[Trajectory]:
    """Euler-Maruyama paths, bitwise reproducible for a given (seed, n_paths, dt)"""
    if n_paths < 1:
        raise ValueError(f"n_paths must be at least 1, got {n_paths}")
    N = n_steps(params.T, dt)
    times = np.arange(N + 1) * dt
    logger.debug(f"Simulating {n_paths} paths, {N} steps, seed={seed}")

    results = _run_chunks(lambda idx: (idx, _simulate_block(params, u, dt, seed, idx)),
                          n_paths, chunk, workers)
    paths: List[Trajectory] = []
    for indices, (Bs, Es, Us) in results:
        for j, k in enumerate(indices):
            paths.append(Trajectory(times.copy(), Bs[j], Es[j], Us[j], rng_seed=seed, path_index=k))
    return paths


def sample_state(trajectory: Trajectory, t: float) -> Tuple[np.ndarray, float]:
    """Linear interpolation of (B, E) at an arbitrary time inside the horizon"""
    times = trajectory.times
    if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
        raise ValueError(f"t={t} is outside [{times[0]}, {times[-1]}]")
    B = np.array([np.interp(t, times, trajectory.B[:, i]) for i in range(trajectory.B.shape[1])])
    E = float(np.interp(t, times, trajectory.E))
    return B, E


def ensemble_statistics(trajectories: Sequence[Trajectory]) -> dict:
    """Mean and standard deviation of B and u over paths at each time"""
    B = np.stack([tr.B for tr in trajectories])
    U = np.stack([tr.u for tr in trajectories])
    return {
        "times": trajectories[0].times,
        "B_mean": B.mean(axis=0),
        "B_std": B.std(axis=0),
        "u_mean": U.mean(axis=0),
        "u_std": U.std(axis=0),
    }


def _qv_rate(params: ModelParams, B: np.ndarray, jac: np.ndarray) -> np.ndarray:
    """Ito rate d[u_j]/dt for an (n, d) batch and its (n, d, d) policy Jacobian"""
    scaled = jac * B[:, None, :]
    if params.noise == "common":
        return params.sigma ** 2 * scaled.sum(axis=2) ** 2
    return params.sigma ** 2 * (scaled ** 2).sum(axis=2)


def quadratic_variation(u_path: Optional[np.ndarray] = None, policy: Optional[QuotaPolicy] = None,
                        trajectory: Optional[Trajectory] = None, mode: str = "discrete",
                        params: Optional[ModelParams] = None) -> np.ndarray:
    """Quadratic variation of the control along a path, one value per species

    ``discrete`` sums squared increments of ``u_path`` (or of the trajectory's
    controls); ``ito`` integrates |sigma B grad u|^2 along the trajectory and
    needs a differentiable policy and the model parameters.
    """
    if mode == "discrete":
        if u_path is None:
            if trajectory is None:
                raise ValueError("Discrete quadratic variation needs u_path or a trajectory")
            u_path = trajectory.u
        u_path = np.asarray(u_path, dtype=float)
        if u_path.ndim == 1:
            u_path = u_path[:, None]
        return (np.diff(u_path, axis=0) ** 2).sum(axis=0)
    if mode == "ito":
        if policy is None or trajectory is None or params is None:
            raise ValueError("Ito quadratic variation needs a policy, a trajectory and the model parameters")
        jac = policy.gradient(trajectory.B[:-1], 0.0)
        rate = _qv_rate(params, trajectory.B[:-1], jac)
        return rate.sum(axis=0) * trajectory.dt
    raise ValueError(f"Unknown quadratic variation mode {mode!r}")


def _block_costs(params: ModelParams, policy: Optional[QuotaPolicy], dt: float, seed: int,
                 indices: range, qv_mode: str) -> np.ndarray:
    Bs, _, Us = _simulate_block(params, policy, dt, seed, indices)
    gap = ((Bs[:, :-1] - params.B_desired) ** 2).sum(axis=2)
    reward = (Us[:, :-1] * params.alpha).sum(axis=2)
    running = dt * (params.tracking_weight * gap - reward).sum(axis=1)
    if qv_mode == "discrete":
        qv = (np.diff(Us, axis=1) ** 2).sum(axis=1)
    elif qv_mode == "ito":
        n, N1, d = Bs.shape
        flat = Bs[:, :-1].reshape(-1, d)
        rate = _qv_rate(params, flat, policy.gradient(flat, 0.0)).reshape(n, N1 - 1, d)
        qv = rate.sum(axis=1) * dt
    else:
        raise ValueError(f"Unknown quadratic variation mode {qv_mode!r}")
    return running + qv @ params.beta


def estimate_cost(params: ModelParams, u: Optional[QuotaPolicy], dt: float, n_paths: int, seed: int,
                  qv_mode: str = "discrete", chunk: int = PATH_CHUNK,
                  workers: int = WORKERS) -> Tuple[float, float]:
    """Monte-Carlo estimate of J = E[int |B - B^d|^2 - alpha.u dt + beta.[u]] with its standard error"""
    if n_paths < 1:
        raise ValueError(f"n_paths must be at least 1, got {n_paths}")
    if qv_mode == "ito" and (u is None or not u.differentiable):
        raise UnsupportedModeError("Ito quadratic variation needs a grid or neural policy")
    blocks = _run_chunks(lambda idx: _block_costs(params, u, dt, seed, idx, qv_mode),
                         n_paths, chunk, workers)
    costs = np.concatenate(blocks)
    mean = float(costs.mean())
    std_err = float(costs.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
    logger.debug(f"J estimate {mean:.6f} +/- {std_err:.2e} over {n_paths} paths")
    return mean, std_err


def constant_baseline(params: ModelParams, level: float) -> ConstantPolicy:
    """Constant quota at ``level`` for every species, clamped to the box"""
    return ConstantPolicy(np.full(params.d, level), params.u_min, params.u_max)


def effort_model_params(r: Optional[float] = None, kappa: Optional[float] = None,
                        a: Optional[float] = None, c: Optional[float] = None,
                        **overrides) -> ModelParams:
    """Single-species fishery with effort, unrestricted quota (the calibration model)"""
    values = {
        "r": [EFFORT_MODEL_TRUTH["r"] if r is None else r],
        "kappa": [[EFFORT_MODEL_TRUTH["kappa"] if kappa is None else kappa]],
        "a": EFFORT_MODEL_TRUTH["a"] if a is None else a,
        "c": EFFORT_MODEL_TRUTH["c"] if c is None else c,
        "q": EFFORT_MODEL_TRUTH["q"],
        "B0": [EFFORT_MODEL_TRUTH["B0"]],
        "E0": EFFORT_MODEL_TRUTH["E0"],
        "T": EFFORT_MODEL_TRUTH["t2"],
        "dynamics": "effort",
    }
    values.update(overrides)
    return ModelParams(**values)
