"""
Rectangular sea lattice with a land strip along the east side
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.sparse as sp
from scipy.ndimage import label

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Square cells of width h; arrays are indexed [i (x), j (y)]

    Gamma1 is the upper sea row, Gamma2 the lower one; the coast is the set
    of sea cells bordering land.
    """

    nx: int
    ny: int
    h: float
    sea: np.ndarray

    def __post_init__(self):
        if self.sea.shape != (self.nx, self.ny):
            raise ValueError(f"Sea mask has shape {self.sea.shape}, expected {(self.nx, self.ny)}")
        _, n_regions = label(self.sea)
        if n_regions != 1:
            raise ValueError(f"The sea region must be connected, found {n_regions} components")
        if not self.gamma1.any() or not self.gamma2.any():
            raise ValueError("Both the upper and the lower boundary must contain sea cells")
        self.sea.flags.writeable = False

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def xc(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.h

    @property
    def yc(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.h

    def centres(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xc, self.yc, indexing="ij")

    @property
    def gamma1(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[:, -1] = self.sea[:, -1]
        return mask

    @property
    def gamma2(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[:, 0] = self.sea[:, 0]
        return mask

    @property
    def coast(self) -> np.ndarray:
        land = ~self.sea
        touches = np.zeros(self.shape, dtype=bool)
        touches[:-1, :] |= land[1:, :]
        touches[1:, :] |= land[:-1, :]
        touches[:, :-1] |= land[:, 1:]
        touches[:, 1:] |= land[:, :-1]
        return self.sea & touches

    @property
    def open_x(self) -> np.ndarray:
        """Faces between horizontally adjacent sea cells, shape (nx - 1, ny)"""
        return self.sea[:-1, :] & self.sea[1:, :]

    @property
    def open_y(self) -> np.ndarray:
        return self.sea[:, :-1] & self.sea[:, 1:]

    @property
    def coast_x(self) -> float:
        """x of the straight coastline: east edge of the easternmost sea column"""
        columns = np.nonzero(self.sea.any(axis=1))[0]
        return float((columns[-1] + 1) * self.h)

    @property
    def extent(self) -> Tuple[float, float]:
        return self.coast_x, self.ny * self.h

    def integrate(self, field: np.ndarray) -> float:
        return float(field[self.sea].sum() * self.h ** 2)

    def index(self) -> np.ndarray:
        """Position of every sea cell in the compressed vector, -1 on land"""
        idx = -np.ones(self.shape, dtype=int)
        idx[self.sea] = np.arange(int(self.sea.sum()))
        return idx

    def laplacian(self) -> sp.csr_matrix:
        """Five-point Laplacian on sea cells, zero flux across land and box edges"""
        idx = self.index()
        rows, cols = [], []
        for open_faces, left, right in ((self.open_x, idx[:-1, :], idx[1:, :]),
                                        (self.open_y, idx[:, :-1], idx[:, 1:])):
            rows.append(left[open_faces])
            cols.append(right[open_faces])
        P = np.concatenate(rows)
        R = np.concatenate(cols)
        n = int(self.sea.sum())
        w = np.full(P.size, 1.0 / self.h ** 2)
        A = sp.csr_matrix((np.r_[w, w], (np.r_[P, R], np.r_[R, P])), shape=(n, n))
        return (A - sp.diags(np.asarray(A.sum(axis=1)).ravel())).tocsr()


def coastal_mesh(resolution: int = 100, width: float = 8.0, height: float = 12.0,
                 coast_x: float = 7.0) -> Mesh:
    """``resolution`` cells along y; cells whose centre lies east of ``coast_x`` are land"""
    h = height / resolution
    nx = int(round(width / h))
    xc = (np.arange(nx) + 0.5) * h
    sea = np.repeat((xc < coast_x)[:, None], resolution, axis=1)
    logger.debug(f"Mesh {nx}x{resolution}, h={h:.4f}, {int(sea.sum())} sea cells")
    return Mesh(nx, resolution, h, sea)
