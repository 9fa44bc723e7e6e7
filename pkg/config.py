"""
Configuration settings for the fishery quota-control toolkit
"""

import os
from pathlib import Path

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables
load_dotenv()

# Package version recorded in run manifests
VERSION = "0.1.0"

# Base paths
BASE_DIR = Path(__file__).parent
CONFIGS_DIR = BASE_DIR / "configs"


class RuntimeSettings(BaseSettings):
    """Environment-level settings (FISHQUOTA_* variables or .env)"""

    model_config = SettingsConfigDict(env_prefix="FISHQUOTA_", extra="ignore")

    output_dir: str = "outputs"
    log_level: str = "INFO"
    log_to_file: bool = False
    default_seed: int = 1234
    workers: int = 1
    path_chunk: int = 4096


settings = RuntimeSettings()

# Runtime settings
OUTPUT_DIR = settings.output_dir
LOG_LEVEL = settings.log_level
LOG_TO_FILE = settings.log_to_file
DEFAULT_SEED = settings.default_seed
WORKERS = settings.workers
PATH_CHUNK = settings.path_chunk

# Scenario tags, in the order the README walks through them
SCENARIO_ORDER = [
    "simulate",
    "calibrate",
    "kfp",
    "policy",
    "feedback",
    "spatial",
]

# Two-species site used by the distributed control, neural and feedback runs
TWO_SPECIES_DEFAULTS = {
    "r": [1.5, 1.5],
    "kappa": [[1.2, -0.1], [0.1, 1.2]],
    "sigma": 0.1,
    "sigma_prime": 0.1,
    "sigma_init": 0.1,
    "alpha": [0.1, 0.1],
    "beta": [0.02, 0.02],
    "q": 1.3,
    "u_min": 0.4,
    "u_max": 1.4,
    "B_desired": [1.0, 1.0],
    "B0": [1.2, 0.8],
    "E0": 1.0,
    "a": 0.0,
    "c": 0.0,
    "T": 2.0,
}

# Single-species calibration truth z = [r, kappa, a, c]
EFFORT_MODEL_TRUTH = {
    "r": 2.0,
    "kappa": 1.0,
    "a": 1.1,
    "c": 1.0,
    "q": 1.0,
    "B0": 0.1,
    "E0": 0.1,
    "t1": 1.0 / 14.0,
    "t2": 1.0,
}

# Published regressor results per noise level: (mean, std) for r, kappa, c, a
REGRESSOR_REFERENCE = {
    0.01: {"r": (1.99, 0.09), "kappa": (1.01, 0.30), "c": (0.97, 0.06), "a": (1.09, 0.04)},
    0.125: {"r": (2.04, 0.11), "kappa": (1.13, 0.20), "c": (1.14, 0.16), "a": (1.29, 0.10)},
    0.25: {"r": (1.97, 0.16), "kappa": (1.03, 0.34), "c": (0.90, 0.23), "a": (1.15, 0.15)},
}

# Open-sea model
SPATIAL_DEFAULTS = {
    "T": 2.0,
    "dt": 0.02,
    "b": 1.0,
    "mu": 0.1,
    "nu": 0.1,
    "r": 1.0,
    "kappa": 1.0,
    "c": 0.7,
    "a": 0.2,
    "resolution": 100,
    "cruise_speed": 2.0,
    "gamma": 8.0,
    "position_noise": 0.05,
    "Q0": 0.05,
    "n_boats": 50,
    "current_amplitude": 10.0,
    "current_frequency": 6.283185307179586,
}


def resolve_output_dir(scenario: str, cli_out=None, config_out=None) -> Path:
    """--out flag, then FISHQUOTA_OUTPUT_DIR, then the config file, then outputs/<scenario>"""
    if cli_out:
        return Path(cli_out)
    env_out = os.environ.get("FISHQUOTA_OUTPUT_DIR")
    if env_out:
        return Path(env_out)
    if config_out:
        return Path(config_out)
    return Path(OUTPUT_DIR) / scenario
