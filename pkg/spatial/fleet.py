"""
Fishing boats: gradient ascent on the fish field, profitability rule, return to port
"""

import logging
from dataclasses import dataclass, replace
from typing import List

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from spatial.mesh import Mesh
from spatial.params import SpatialParams

logger = logging.getLogger(__name__)

FISHING, RETURNING, DOCKED = 0, 1, 2
MODE_NAMES = {FISHING: "fishing", RETURNING: "returning", DOCKED: "docked"}


@dataclass
class Fleet:
    positions: np.ndarray
    modes: np.ndarray
    homes: np.ndarray
    rngs: List[np.random.Generator]

    @property
    def size(self) -> int:
        return len(self.modes)

    def count(self, mode: int) -> int:
        return int((self.modes == mode).sum())

    @property
    def fishing(self) -> np.ndarray:
        return self.modes == FISHING


def init_fleet(mesh: Mesh, params: SpatialParams, seed: int) -> Fleet:
    """Boats start fishing from homes spread along the coast, one noise stream per boat"""
    M = params.n_boats
    lo, hi = params.home_band
    y = lo + (np.arange(M) + 0.5) / max(M, 1) * (hi - lo)
    x = np.full(M, mesh.coast_x - 0.5 * mesh.h)
    homes = np.stack([x, y], axis=1) if M else np.zeros((0, 2))
    rngs = [np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(k,))))
            for k in range(M)]
    return Fleet(homes.copy(), np.full(M, FISHING), homes, rngs)


class FieldSampler:
    """Bilinear values and gradients of a cell field at arbitrary points"""

    def __init__(self, mesh: Mesh, F: np.ndarray):
        axes = (mesh.xc, mesh.yc)
        gx, gy = np.gradient(F, mesh.h)
        self._lo = np.array([mesh.xc[0], mesh.yc[0]])
        self._hi = np.array([mesh.xc[-1], mesh.yc[-1]])
        self._value = RegularGridInterpolator(axes, F)
        self._grad = [RegularGridInterpolator(axes, g) for g in (gx, gy)]

    def _clip(self, points: np.ndarray) -> np.ndarray:
        return np.clip(np.atleast_2d(points), self._lo, self._hi)

    def value(self, points: np.ndarray) -> np.ndarray:
        return self._value(self._clip(points))

    def gradient(self, points: np.ndarray) -> np.ndarray:
        p = self._clip(points)
        return np.stack([g(p) for g in self._grad], axis=1)


def reflect(positions: np.ndarray, mesh: Mesh) -> np.ndarray:
    """Mirror positions back into [0, coast_x] x [0, height]"""
    upper = np.array(mesh.extent)
    pos = np.abs(positions)
    pos = np.where(pos > upper, 2 * upper - pos, pos)
    return np.clip(pos, 0.0, upper)


def step_fleet(fleet: Fleet, B: np.ndarray, mesh: Mesh, params: SpatialParams, dt: float) -> Fleet:
    """Move every boat by one step and apply the mode transitions"""
    if fleet.size == 0:
        return fleet
    pos = fleet.positions.copy()
    modes = fleet.modes.copy()
    sampler = FieldSampler(mesh, B)
    speed = params.cruise_speed * dt

    if params.profit_measure == "total":
        unprofitable = np.full(fleet.size, params.gamma * mesh.integrate(B) <= params.cruise_speed ** 2)
    else:
        unprofitable = params.gamma * sampler.value(pos) <= params.cruise_speed ** 2
    switching = (modes == FISHING) & unprofitable
    if switching.any():
        logger.debug(f"{int(switching.sum())} boats stop fishing")
    modes[switching] = RETURNING

    fishing = modes == FISHING
    if fishing.any():
        grad = sampler.gradient(pos[fishing])
        norm = np.linalg.norm(grad, axis=1)
        # flat field: no deterministic motion
        step = np.where(norm[:, None] > 1e-12, speed * grad / np.where(norm > 1e-12, norm, 1.0)[:, None], 0.0)
        pos[fishing] += step

    returning = modes == RETURNING
    if returning.any():
        to_home = fleet.homes[returning] - pos[returning]
        dist = np.linalg.norm(to_home, axis=1)
        arrive = dist <= speed
        moved = pos[returning] + speed * to_home / np.where(dist > 0, dist, 1.0)[:, None]
        pos[returning] = np.where(arrive[:, None], fleet.homes[returning], moved)
        idx = np.nonzero(returning)[0]
        modes[idx[arrive]] = DOCKED

    noise = np.stack([rng.standard_normal(2) for rng in fleet.rngs])
    moving = modes != DOCKED
    pos[moving] += params.position_noise * noise[moving]
    pos = reflect(pos, mesh)
    return replace(fleet, positions=pos, modes=modes)
