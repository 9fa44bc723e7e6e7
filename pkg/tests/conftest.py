"""
Test configuration and fixtures for the fishery quota-control tests
"""

import os

import numpy as np
import pytest

# Set test environment
os.environ.setdefault("FISHQUOTA_LOG_LEVEL", "DEBUG")
os.environ.pop("FISHQUOTA_OUTPUT_DIR", None)

from calibrate import CoefficientVector  # noqa: E402
from kfp_control import Grid2D  # noqa: E402
from sde_core import two_species_params  # noqa: E402
from spatial.mesh import coastal_mesh  # noqa: E402
from spatial.params import SpatialParams  # noqa: E402


@pytest.fixture
def two_species():
    """Two-species site used by the quota experiments"""
    return two_species_params()


@pytest.fixture
def quiet_two_species():
    """Same site without any noise"""
    return two_species_params(sigma=0.0, sigma_prime=0.0, sigma_init=0.0)


@pytest.fixture
def truth():
    """Calibration truth r=2, kappa=1, a=1.1, c=1"""
    return CoefficientVector.truth()


@pytest.fixture
def coarse_grid():
    """Small density grid for fast adjoint and mass checks"""
    return Grid2D(0.0, 3.0, 24)


@pytest.fixture
def small_spatial_params():
    """Open-sea model on a coarse mesh with a short horizon and a few boats"""
    return SpatialParams(resolution=24, T=0.2, dt=0.02, n_boats=5)


@pytest.fixture
def small_mesh():
    """Coarse coastal mesh, 16 x 24 cells"""
    return coastal_mesh(resolution=24)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def temp_output_dir(tmp_path):
    """Create temporary directory for run outputs"""
    out = tmp_path / "run_outputs"
    return out
