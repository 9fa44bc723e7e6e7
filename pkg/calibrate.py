"""
Coefficient identification z = [r, kappa, a, c] from two-date observations
of the single-species fishery with effort
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from config import EFFORT_MODEL_TRUTH
from exceptions import IntegrationError
from neural import TrainConfig, TrainingHistory, mlp_eval, train_regressor
from sde_core import path_normals

logger = logging.getLogger(__name__)

COEFFICIENTS = ("r", "kappa", "a", "c")
DEFAULT_DT = 1e-3


@dataclass(frozen=True)
class CoefficientVector:
    r: float
    kappa: float
    a: float
    c: float

    def __post_init__(self):
        if not (self.r > 0 and self.kappa > 0):
            raise ValueError(f"r and kappa must be positive, got r={self.r}, kappa={self.kappa}")
        if self.a < 0 or self.c < 0:
            raise ValueError(f"a and c must be non-negative, got a={self.a}, c={self.c}")

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.kappa, self.a, self.c])

    @classmethod
    def from_array(cls, z) -> "CoefficientVector":
        z = np.asarray(z, dtype=float)
        return cls(*(float(v) for v in z))

    @classmethod
    def truth(cls) -> "CoefficientVector":
        return cls(*(EFFORT_MODEL_TRUTH[name] for name in COEFFICIENTS))


@dataclass(frozen=True)
class ObservationVector:
    """Z = [B(t1), E(t1), B(t2), E(t2)]"""

    Z: Tuple[float, float, float, float]
    t1: float
    t2: float

    def __post_init__(self):
        if len(self.Z) != 4:
            raise ValueError(f"An observation has 4 entries, got {len(self.Z)}")
        if not 0 < self.t1 <= self.t2:
            raise ValueError(f"Observation dates must satisfy 0 < t1 <= t2, got t1={self.t1}, t2={self.t2}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.Z, dtype=float)


@dataclass
class CalibrationResult:
    z: CoefficientVector
    residual_norm: float
    iterations: int
    converged: bool
    message: str = ""
    evaluations: int = 0


@dataclass
class SampleCalibration:
    """Per-coefficient mean and dispersion over a sample set"""

    mean: CoefficientVector
    std: np.ndarray
    estimates: np.ndarray
    method: str
    converged: bool = True
    message: str = ""
    history: Optional[TrainingHistory] = None


def _time_grid(t2: float, dt: float) -> Tuple[int, float]:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    N = max(1, math.ceil(t2 / dt - 1e-9))
    return N, t2 / N


def _at(values: np.ndarray, t: float, dt: float) -> np.ndarray:
    N = values.shape[1] - 1
    i = min(int(t / dt), N - 1)
    w = t / dt - i
    return (1.0 - w) * values[:, i] + w * values[:, i + 1]


def observe_batch(zs: np.ndarray, q: float, B0: float, E0: float, t1: float, t2: float,
                  sigma: float = 0.0, normals: Optional[np.ndarray] = None,
                  dt: float = DEFAULT_DT) -> np.ndarray:
    """Observations of m coefficient vectors at once, shape (m, 4)

    Same log-Euler scheme as sde_core with effort dynamics and an
    unrestricted quota; row j of ``normals`` (shape (m, N + 1, 2)) drives
    the j-th path.
    """
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    if zs.shape[1] != 4:
        raise ValueError(f"Coefficient vectors have 4 entries, got {zs.shape[1]}")
    if not 0 < t1 <= t2:
        raise ValueError(f"Observation dates must satisfy 0 < t1 <= t2, got t1={t1}, t2={t2}")
    N, dt = _time_grid(t2, dt)
    m = zs.shape[0]
    if normals is None:
        normals = np.zeros((m, N + 1, 2))
    if normals.shape != (m, N + 1, 2):
        raise ValueError(f"Expected normals of shape {(m, N + 1, 2)}, got {normals.shape}")
    r, kappa, a, c = zs.T
    sqdt = math.sqrt(dt)

    B = np.maximum(B0 + sigma * normals[:, 0, 0], 0.0)
    E = np.maximum(E0 + sigma * normals[:, 0, 1], 0.0)
    Bs = np.empty((m, N + 1))
    Es = np.empty((m, N + 1))
    Bs[:, 0], Es[:, 0] = B, E
    for k in range(N):
        harvest = q * E
        growth = r - B * kappa - harvest
        dE = a - B * harvest - c * E
        B = B * np.exp((growth - 0.5 * sigma ** 2) * dt + sigma * (sqdt * normals[:, k + 1, 0]))
        E = np.maximum(E + dE * dt + sigma * E * (sqdt * normals[:, k + 1, 1]), 0.0)
        Bs[:, k + 1], Es[:, k + 1] = B, E
    if not (np.all(np.isfinite(Bs)) and np.all(np.isfinite(Es))):
        raise IntegrationError(t2)
    return np.stack([_at(Bs, t1, dt), _at(Es, t1, dt), Bs[:, -1], Es[:, -1]], axis=1)


def _sample_normals(seed: int, indices: Sequence[int], t2: float, dt: float) -> np.ndarray:
    N, _ = _time_grid(t2, dt)
    # columns: biomass increment, effort increment
    return np.stack([path_normals(seed, k, 1, N) for k in indices])


def synthesize_observations(z: CoefficientVector, q: float, B0: float, E0: float, t1: float, t2: float,
                            sigma: float = 0.0, seed: int = 0, path_index: int = 0,
                            dt: float = DEFAULT_DT) -> ObservationVector:
    """Integrate the calibration model and sample it at t1 and t2"""
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    normals = _sample_normals(seed, [path_index], t2, dt) if sigma > 0 else None
    Z = observe_batch(z.as_array(), q, B0, E0, t1, t2, sigma, normals, dt)[0]
    return ObservationVector(tuple(float(v) for v in Z), t1, t2)


def synthesize_sample_set(z: CoefficientVector, q: float, B0: float, E0: float, t1: float, t2: float,
                          sigma: float, n_samples: int, seed: int,
                          dt: float = DEFAULT_DT) -> List[ObservationVector]:
    """n noisy observations, sample k drawn from substream k of ``seed``"""
    if n_samples < 1:
        raise ValueError(f"n_samples must be at least 1, got {n_samples}")
    normals = _sample_normals(seed, range(n_samples), t2, dt)
    zs = np.tile(z.as_array(), (n_samples, 1))
    Z = observe_batch(zs, q, B0, E0, t1, t2, sigma, normals, dt)
    return [ObservationVector(tuple(float(v) for v in row), t1, t2) for row in Z]


def build_training_set(z_ref: CoefficientVector, q: float, B0: float, E0: float, t1: float, t2: float,
                       M: int = 1000, seed: int = 0, spread: float = 0.5, sigma: float = 0.0,
                       dt: float = DEFAULT_DT) -> Tuple[np.ndarray, np.ndarray]:
    """Pairs (Z(z^j), z^j) with z^j uniform in [(1 - spread) z_ref, (1 + spread) z_ref]"""
    if M < 1:
        raise ValueError(f"M must be at least 1, got {M}")
    if not 0 <= spread < 1:
        raise ValueError(f"spread must lie in [0, 1), got {spread}")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2 ** 31,)))
    ref = z_ref.as_array()
    zs = rng.uniform((1 - spread) * ref, (1 + spread) * ref, size=(M, 4))
    normals = _sample_normals(seed, range(M), t2, dt) if sigma > 0 else None
    Z = observe_batch(zs, q, B0, E0, t1, t2, sigma, normals, dt)
    return Z, zs


def _fd_jacobian(fun, x: np.ndarray, fx: np.ndarray, step: float) -> np.ndarray:
    h = step * np.maximum(np.abs(x), 1.0)
    cols = [(fun(x + h[i] * np.eye(len(x))[i]) - fx) / h[i] for i in range(len(x))]
    return np.stack(cols, axis=1)


def calibrate_root(Z_target: ObservationVector, z0: CoefficientVector, q: float, B0: float, E0: float,
                   tol: float = 1e-10, max_iter: int = 200, fd_step: float = 1e-7,
                   dt: float = DEFAULT_DT) -> CalibrationResult:
    """Broyden ("good" update) root of z -> Z(z) - Z_target

    The Jacobian starts from finite differences and is rebuilt from finite
    differences whenever the update goes singular or a step fails to reduce
    the residual.
    """
    target = Z_target.as_array()
    evaluations = 0

    def residual(x):
        nonlocal evaluations
        evaluations += 1
        return observe_batch(x, q, B0, E0, Z_target.t1, Z_target.t2, 0.0, None, dt)[0] - target

    x = z0.as_array()
    F = residual(x)
    J = _fd_jacobian(residual, x, F, fd_step)
    message = "max iterations reached"
    iterations = 0
    while iterations < max_iter:
        if np.linalg.norm(F) < tol:
            message = "residual below tolerance"
            break
        iterations += 1
        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            logger.debug(f"Singular Jacobian at iteration {iterations}, rebuilding")
            J = _fd_jacobian(residual, x, F, fd_step)
            continue

        # keep r and kappa positive, a and c non-negative, and require descent
        step = 1.0
        for _ in range(40):
            trial = x + step * dx
            if trial[0] > 0 and trial[1] > 0 and trial[2] >= 0 and trial[3] >= 0:
                try:
                    F_trial = residual(trial)
                except IntegrationError:
                    F_trial = np.full(4, np.inf)
                if np.all(np.isfinite(F_trial)) and np.linalg.norm(F_trial) < np.linalg.norm(F):
                    break
            step *= 0.5
        else:
            logger.debug(f"No descent along the Broyden step at iteration {iterations}, rebuilding")
            J = _fd_jacobian(residual, x, F, fd_step)
            continue

        s = trial - x
        J = J + np.outer(F_trial - F - J @ s, s) / (s @ s)
        x, F = trial, F_trial
        if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1e14:
            J = _fd_jacobian(residual, x, F, fd_step)

    norm = float(np.linalg.norm(F))
    converged = norm < tol
    if not converged:
        logger.warning(f"Root calibration stopped after {iterations} iterations, residual {norm:.3e}")
    return CalibrationResult(CoefficientVector.from_array(x), norm, iterations, converged, message, evaluations)


def _least_squares(samples: np.ndarray, z0: np.ndarray, q: float, B0: float, E0: float,
                   t1: float, t2: float, dt: float, max_iter: int):
    def objective(x):
        if x[0] <= 0 or x[1] <= 0 or x[2] < 0 or x[3] < 0:
            return np.inf
        try:
            Z = observe_batch(x, q, B0, E0, t1, t2, 0.0, None, dt)[0]
        except IntegrationError:
            return np.inf
        return float(((Z - samples) ** 2).sum(axis=1).mean())

    return minimize(objective, z0, method="Nelder-Mead",
                    options={"xatol": 1e-9, "fatol": 1e-18, "maxiter": max_iter, "maxfev": 4 * max_iter})


def calibrate_samples(samples: Sequence[ObservationVector], method: str = "regressor",
                      q: float = EFFORT_MODEL_TRUTH["q"], B0: float = EFFORT_MODEL_TRUTH["B0"],
                      E0: float = EFFORT_MODEL_TRUTH["E0"], z0: Optional[CoefficientVector] = None,
                      training_set: Optional[Tuple[np.ndarray, np.ndarray]] = None,
                      config: Optional[TrainConfig] = None, hidden: Sequence[int] = (100, 100),
                      dispersion_samples: int = 20, max_iter: int = 4000,
                      dt: float = DEFAULT_DT) -> SampleCalibration:
    """Calibrate from a set of observations

    ``least_squares`` minimises the empirical mean of |Z(z) - Z^d|^2 with a
    simplex search; the dispersion is the spread of per-sample fits on the
    first ``dispersion_samples`` observations.  ``regressor`` trains an MLP
    Z -> z on ``training_set`` and reports the mean and std of its
    predictions on the samples.
    """
    if not samples:
        raise ValueError("calibrate_samples needs at least one observation")
    t1, t2 = samples[0].t1, samples[0].t2
    data = np.stack([s.as_array() for s in samples])

    if method == "least_squares":
        start = (z0 or CoefficientVector.truth()).as_array()
        result = _least_squares(data, start, q, B0, E0, t1, t2, dt, max_iter)
        if not result.success:
            logger.warning(f"Simplex search did not converge: {result.message}")
        if len(data) > 1:
            estimates = np.array([
                _least_squares(row[None, :], result.x, q, B0, E0, t1, t2, dt, max_iter).x
                for row in data[:dispersion_samples]
            ])
            std = estimates.std(axis=0)
        else:
            estimates = result.x[None, :]
            std = np.zeros(4)
        return SampleCalibration(CoefficientVector.from_array(result.x), std, estimates, method,
                                 bool(result.success), str(result.message))

    if method == "regressor":
        if training_set is None:
            raise ValueError("The regressor method needs a training set (see build_training_set)")
        Z_train, z_train = training_set
        net, history = train_regressor(Z_train, z_train, hidden, config)
        estimates = mlp_eval(net, data)
        mean = np.clip(estimates.mean(axis=0), [1e-12, 1e-12, 0.0, 0.0], None)
        return SampleCalibration(CoefficientVector.from_array(mean), estimates.std(axis=0),
                                 estimates, method, True, "trained", history)

    raise ValueError(f"Unknown calibration method {method!r}; expected least_squares or regressor")
