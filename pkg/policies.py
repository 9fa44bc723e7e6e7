"""
Quota policies u(B, t)
Every variant clamps its output to the admissible box [u_min, u_max]
"""

import logging
from abc import ABC, abstractmethod
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from exceptions import UnsupportedModeError

logger = logging.getLogger(__name__)


def as_batch(B) -> np.ndarray:
    """View a single state or a batch of states as a 2-D (n, d) array"""
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        return B[None, :]
    if B.ndim != 2:
        raise ValueError(f"Biomass must be a vector or an (n, d) batch, got shape {B.shape}")
    return B


class QuotaPolicy(ABC):
    """Base class of the four quota representations"""

    kind = "abstract"
    stateful = False
    differentiable = False

    def __init__(self, u_min: float = -np.inf, u_max: float = np.inf):
        if u_min > u_max:
            raise ValueError(f"u_min={u_min} exceeds u_max={u_max}")
        self.u_min = float(u_min)
        self.u_max = float(u_max)

    @abstractmethod
    def raw(self, B: np.ndarray, t: float) -> np.ndarray:
        """Unclamped output for an (n, d) batch"""

    def eval(self, B, t: float = 0.0) -> np.ndarray:
        single = np.ndim(B) == 1
        out = np.clip(self.raw(as_batch(B), t), self.u_min, self.u_max)
        return out[0] if single else out

    def reset(self, B0: np.ndarray) -> None:
        """Re-initialise internal memory at the start of a batch of paths"""

    def gradient(self, B, t: float = 0.0) -> np.ndarray:
        """Jacobian du_j/dB_i of the clamped policy, shape (n, d_out, d_in)"""
        raise UnsupportedModeError(
            f"{self.kind} policy has no derivative rule; Ito quadratic variation needs a grid or neural policy"
        )

    def __call__(self, B, t: float = 0.0) -> np.ndarray:
        return self.eval(B, t)


class ConstantPolicy(QuotaPolicy):
    kind = "constant"

    def __init__(self, u: Sequence[float], u_min: float = -np.inf, u_max: float = np.inf):
        super().__init__(u_min, u_max)
        self.u = np.atleast_1d(np.asarray(u, dtype=float))

    def raw(self, B: np.ndarray, t: float) -> np.ndarray:
        if self.u.size not in (1, B.shape[1]):
            raise ValueError(f"Constant quota has {self.u.size} entries for {B.shape[1]} species")
        return np.broadcast_to(self.u, B.shape).copy()


class GridPolicy(QuotaPolicy):
    """Piecewise-linear interpolation of nodal values on a tensor grid

    ``values`` has shape (d_out, n_1, ..., n_d); node coordinates are given per
    axis.  States outside the grid box are projected onto it first.
    """

    kind = "grid"
    differentiable = True

    def __init__(self, axes: Sequence[np.ndarray], values: np.ndarray,
                 u_min: float = -np.inf, u_max: float = np.inf):
        super().__init__(u_min, u_max)
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        self.values = np.asarray(values, dtype=float)
        expected = tuple(len(a) for a in self.axes)
        if self.values.shape[1:] != expected:
            raise ValueError(f"Grid values shape {self.values.shape[1:]} does not match axes {expected}")
        self._lo = np.array([a[0] for a in self.axes])
        self._hi = np.array([a[-1] for a in self.axes])
        self._interp = [RegularGridInterpolator(self.axes, v) for v in self.values]
        slopes = []
        for v in self.values:
            g = np.gradient(v, *self.axes, edge_order=1)
            if len(self.axes) == 1:
                g = [g]
            slopes.append([RegularGridInterpolator(self.axes, gi) for gi in g])
        self._slopes = slopes

    def _project(self, B: np.ndarray) -> np.ndarray:
        if B.shape[1] != len(self.axes):
            raise ValueError(f"Grid policy is {len(self.axes)}-dimensional, got states of dimension {B.shape[1]}")
        return np.clip(B, self._lo, self._hi)

    def raw(self, B: np.ndarray, t: float) -> np.ndarray:
        Bp = self._project(B)
        return np.stack([f(Bp) for f in self._interp], axis=1)

    def gradient(self, B, t: float = 0.0) -> np.ndarray:
        B = as_batch(B)
        Bp = self._project(B)
        raw = np.stack([f(Bp) for f in self._interp], axis=1)
        inside = (raw > self.u_min) & (raw < self.u_max)
        jac = np.stack(
            [np.stack([s(Bp) for s in per_species], axis=1) for per_species in self._slopes],
            axis=1,
        )
        return jac * inside[:, :, None]


def quota_policy_from_spec(spec: dict, u_min: float, u_max: float, d: int) -> Optional[QuotaPolicy]:
    """Build a constant policy from a scenario snippet ``{"constant": [..]}``"""
    if spec is None:
        return None
    if "constant" in spec:
        u = np.atleast_1d(np.asarray(spec["constant"], dtype=float))
        if u.size == 1:
            u = np.full(d, u[0])
        return ConstantPolicy(u, u_min, u_max)
    raise ValueError(f"Unknown policy specification: {sorted(spec)}")
