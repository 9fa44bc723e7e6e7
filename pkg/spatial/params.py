"""
Parameters of the open-sea model
"""

import math
from dataclasses import dataclass, fields
from typing import Optional, Tuple

from config import SPATIAL_DEFAULTS

PROFIT_MEASURES = ("local", "total")
FISH_DRIFTS = ("current", "plankton")
PLANKTON_BOUNDARIES = ("neumann", "dirichlet")
MODES = ("no_quota", "with_quota")


@dataclass
class SpatialParams:
    """Coefficients, fleet settings and domain geometry

    ``catchability`` is the catch rate of a fishing boat when nothing
    restricts it; under the quota a boat takes min(Q, catchability).
    ``quota_floor=None`` lets the quota go negative, which releases fish
    around the boats.

    ``c`` and ``a`` are carried for completeness; no equation of the
    spatial model uses them.
    """

    T: float = SPATIAL_DEFAULTS["T"]
    dt: float = SPATIAL_DEFAULTS["dt"]
    b: float = SPATIAL_DEFAULTS["b"]
    mu: float = SPATIAL_DEFAULTS["mu"]
    nu: float = SPATIAL_DEFAULTS["nu"]
    r: float = SPATIAL_DEFAULTS["r"]
    kappa: float = SPATIAL_DEFAULTS["kappa"]
    c: float = SPATIAL_DEFAULTS["c"]
    a: float = SPATIAL_DEFAULTS["a"]
    resolution: int = SPATIAL_DEFAULTS["resolution"]
    cruise_speed: float = SPATIAL_DEFAULTS["cruise_speed"]
    gamma: float = SPATIAL_DEFAULTS["gamma"]
    position_noise: float = SPATIAL_DEFAULTS["position_noise"]
    Q0: float = SPATIAL_DEFAULTS["Q0"]
    quota_weight: float = 1.0
    quota_floor: Optional[float] = 0.0
    catchability: float = 1.0
    n_boats: int = SPATIAL_DEFAULTS["n_boats"]
    current_amplitude: float = SPATIAL_DEFAULTS["current_amplitude"]
    current_frequency: float = SPATIAL_DEFAULTS["current_frequency"]
    kernel_radius: float = 2.0
    profit_measure: str = "local"
    fish_drift: str = "current"
    taxis: float = 1.0
    plankton_boundary: str = "neumann"
    width: float = 8.0
    height: float = 12.0
    coast_x: float = 7.0
    home_band: Tuple[float, float] = (4.0, 8.0)
    bump_center: Tuple[float, float] = (4.0, 6.0)
    bump_scale: float = 40.0

    def __post_init__(self):
        if self.mu < 0 or self.nu < 0:
            raise ValueError(f"Diffusivities must be non-negative, got mu={self.mu}, nu={self.nu}")
        if not self.dt > 0 or not self.T > 0:
            raise ValueError(f"dt and T must be positive, got dt={self.dt}, T={self.T}")
        if self.dt > self.T:
            raise ValueError(f"dt={self.dt} exceeds the horizon T={self.T}")
        if self.n_boats < 0:
            raise ValueError(f"n_boats must be non-negative, got {self.n_boats}")
        if self.resolution < 4:
            raise ValueError(f"resolution must be at least 4, got {self.resolution}")
        if not 0 < self.coast_x <= self.width:
            raise ValueError(f"coast_x={self.coast_x} must lie in (0, width]")
        if self.kernel_radius <= 0:
            raise ValueError("kernel_radius must be positive (in cells)")
        if not self.catchability > 0:
            raise ValueError(f"catchability must be positive, got {self.catchability}")
        for name, allowed in (("profit_measure", PROFIT_MEASURES), ("fish_drift", FISH_DRIFTS),
                              ("plankton_boundary", PLANKTON_BOUNDARIES)):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        self.home_band = tuple(self.home_band)
        self.bump_center = tuple(self.bump_center)

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.T / self.dt)))

    @property
    def profit_threshold(self) -> float:
        """Biomass below which a boat stops fishing: gamma * B <= U_M^2"""
        return self.cruise_speed ** 2 / self.gamma if self.gamma > 0 else math.inf

    @classmethod
    def from_dict(cls, values: dict) -> "SpatialParams":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f"Unknown spatial parameters: {unknown}")
        return cls(**values)
