"""
Scenario configuration schema and validation
Every numeric field is checked against the invariants of the module it feeds
before a scenario is dispatched
"""

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    TypeAdapter,
    ValidationError,
    model_validator,
)

from config import EFFORT_MODEL_TRUTH, SCENARIO_ORDER
from exceptions import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass
class ValidationResult:
    """Result of a validation check"""
    is_valid: bool
    errors: List[str]
    warnings: List[str]
    details: Dict[str, Any]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(StrictModel):
    """Overrides applied on top of a preset site (two-species by default)"""

    preset: Literal["two_species", "effort_model"] = "two_species"
    r: Optional[List[float]] = None
    kappa: Optional[List[List[float]]] = None
    B0: Optional[List[NonNegativeFloat]] = None
    T: Optional[PositiveFloat] = None
    sigma: Optional[NonNegativeFloat] = None
    sigma_prime: Optional[NonNegativeFloat] = None
    sigma_init: Optional[NonNegativeFloat] = None
    a: Optional[NonNegativeFloat] = None
    c: Optional[NonNegativeFloat] = None
    q: Optional[NonNegativeFloat] = None
    E0: Optional[NonNegativeFloat] = None
    alpha: Optional[List[float]] = None
    beta: Optional[List[NonNegativeFloat]] = None
    B_desired: Optional[List[float]] = None
    u_min: Optional[float] = None
    u_max: Optional[float] = None
    tracking_weight: Optional[NonNegativeFloat] = None
    noise: Optional[Literal["independent", "common"]] = None
    dynamics: Optional[Literal["reduced", "effort"]] = None
    scheme: Optional[Literal["log", "clamped"]] = None

    def overrides(self) -> Dict[str, Any]:
        return {k: v for k, v in self.model_dump(exclude={"preset"}).items() if v is not None}

    def to_params(self):
        from sde_core import effort_model_params, two_species_params

        if self.preset == "effort_model":
            return replace(effort_model_params(), **self.overrides())
        return two_species_params(**self.overrides())

    @model_validator(mode="after")
    def _check_params(self):
        self.to_params()
        return self


class TrainingSection(StrictModel):
    epochs: PositiveInt = 200
    batch_size: PositiveInt = 32
    learning_rate: PositiveFloat = 1e-3
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: PositiveFloat = 1e-8
    steps_per_epoch: PositiveInt = 1
    log_every: PositiveInt = 20

    def to_config(self, seed: int, progress: bool = False):
        from neural import TrainConfig

        return TrainConfig(seed=seed, progress=progress, **self.model_dump())


class ConstantPolicySpec(StrictModel):
    constant: Union[float, List[float]]


class ScenarioBase(StrictModel):
    description: str = ""
    seed: Optional[int] = None
    output_dir: Optional[str] = None


class SimulateConfig(ScenarioBase):
    scenario: Literal["simulate"]
    model: ModelSection = Field(default_factory=ModelSection)
    policy: Optional[ConstantPolicySpec] = None
    dt: PositiveFloat = 0.01
    n_paths: PositiveInt = 1000
    saved_paths: NonNegativeInt = 3

    @model_validator(mode="after")
    def _check_horizon(self):
        params = self.model.to_params()
        if self.dt > params.T:
            raise ValueError(f"dt={self.dt} exceeds the horizon T={params.T}")
        return self


class CoefficientSection(StrictModel):
    r: PositiveFloat = EFFORT_MODEL_TRUTH["r"]
    kappa: PositiveFloat = EFFORT_MODEL_TRUTH["kappa"]
    a: NonNegativeFloat = EFFORT_MODEL_TRUTH["a"]
    c: NonNegativeFloat = EFFORT_MODEL_TRUTH["c"]


class CalibrateConfig(ScenarioBase):
    scenario: Literal["calibrate"]
    truth: CoefficientSection = Field(default_factory=CoefficientSection)
    q: PositiveFloat = EFFORT_MODEL_TRUTH["q"]
    B0: PositiveFloat = EFFORT_MODEL_TRUTH["B0"]
    E0: NonNegativeFloat = EFFORT_MODEL_TRUTH["E0"]
    t1: PositiveFloat = EFFORT_MODEL_TRUTH["t1"]
    t2: PositiveFloat = EFFORT_MODEL_TRUTH["t2"]
    dt: PositiveFloat = 1e-3
    sigmas: List[NonNegativeFloat] = Field(default_factory=lambda: [0.01], min_length=1)
    n_samples: PositiveInt = 1000
    method: Literal["regressor", "least_squares"] = "regressor"
    training_size: PositiveInt = 1000
    spread: float = Field(0.5, gt=0.0, lt=1.0)
    hidden: List[PositiveInt] = Field(default_factory=lambda: [100, 100])
    training: TrainingSection = Field(default_factory=TrainingSection)
    root_check: bool = True
    start_scale: PositiveFloat = 1.5

    @model_validator(mode="after")
    def _check_dates(self):
        if self.t1 > self.t2:
            raise ValueError(f"Observation dates must satisfy t1 <= t2, got t1={self.t1}, t2={self.t2}")
        if self.dt > self.t1:
            raise ValueError(f"dt={self.dt} must not exceed the first observation date t1={self.t1}")
        return self


class GridSection(StrictModel):
    b_min: NonNegativeFloat = 0.0
    b_max: PositiveFloat = 3.0
    n: int = Field(100, ge=8)

    @model_validator(mode="after")
    def _check_box(self):
        if self.b_max <= self.b_min:
            raise ValueError(f"b_max={self.b_max} must exceed b_min={self.b_min}")
        return self


def _two_species_reduced(model: ModelSection, what: str):
    params = model.to_params()
    if params.d != 2:
        raise ValueError(f"The {what} scenario needs two species, got {params.d}")
    if params.dynamics != "reduced":
        raise ValueError(f"The {what} scenario uses the reduced biomass dynamics")
    return params


class KfpConfig(ScenarioBase):
    scenario: Literal["kfp"]
    model: ModelSection = Field(default_factory=ModelSection)
    grid: GridSection = Field(default_factory=GridSection)
    dt: Optional[PositiveFloat] = None
    boundary: Literal["no_flux", "outflow"] = "no_flux"
    u0: Union[float, List[float]] = 0.9
    max_iter: PositiveInt = 50
    tol: PositiveFloat = 1e-6
    sample_paths: NonNegativeInt = 2
    sim_dt: PositiveFloat = 0.01
    mc_check_paths: NonNegativeInt = 0
    extrapolate: bool = True

    @model_validator(mode="after")
    def _check_model(self):
        params = _two_species_reduced(self.model, "kfp")
        if self.sim_dt > params.T:
            raise ValueError(f"sim_dt={self.sim_dt} exceeds the horizon T={params.T}")
        return self


class PolicyConfig(ScenarioBase):
    scenario: Literal["policy"]
    model: ModelSection = Field(default_factory=ModelSection)
    hidden: List[PositiveInt] = Field(default_factory=lambda: [50, 50])
    dt: PositiveFloat = 0.01
    training: TrainingSection = Field(default_factory=TrainingSection)
    eval_paths: PositiveInt = 10000
    surface_points: int = Field(61, ge=2)
    surface_range: Tuple[NonNegativeFloat, PositiveFloat] = (0.0, 3.0)

    @model_validator(mode="after")
    def _check_model(self):
        params = _two_species_reduced(self.model, "policy")
        if not (params.u_min > float("-inf") and params.u_max < float("inf")):
            raise ValueError("The policy scenario needs a bounded quota box [u_min, u_max]")
        if self.dt > params.T:
            raise ValueError(f"dt={self.dt} exceeds the horizon T={params.T}")
        if self.surface_range[1] <= self.surface_range[0]:
            raise ValueError(f"surface_range {self.surface_range} is empty")
        return self


class FeedbackConfig(ScenarioBase):
    scenario: Literal["feedback"]
    model: ModelSection = Field(default_factory=ModelSection)
    omega: float = 100.0
    u0: Optional[Union[float, List[float]]] = None
    dt: PositiveFloat = 0.01
    n_paths: PositiveInt = 100
    saved_paths: NonNegativeInt = 3
    compare_open_loop: bool = True
    hold_initial_state: bool = False
    window: Optional[Tuple[NonNegativeFloat, PositiveFloat]] = None

    @model_validator(mode="after")
    def _check_model(self):
        params = self.model.to_params()
        if self.dt > params.T:
            raise ValueError(f"dt={self.dt} exceeds the horizon T={params.T}")
        if self.window is not None and not self.window[0] < self.window[1] <= params.T:
            raise ValueError(f"window {self.window} must be an increasing pair inside [0, T]")
        return self


class SpatialConfig(ScenarioBase):
    scenario: Literal["spatial"]
    mode: Literal["no_quota", "with_quota"] = "with_quota"
    params: Dict[str, Any] = Field(default_factory=dict)
    snapshot_times: List[NonNegativeFloat] = Field(default_factory=list)

    def to_params(self):
        from spatial.params import SpatialParams

        return SpatialParams.from_dict(self.params)

    @model_validator(mode="after")
    def _check_params(self):
        params = self.to_params()
        late = [t for t in self.snapshot_times if t > params.T]
        if late:
            raise ValueError(f"Snapshot times {late} lie beyond the horizon T={params.T}")
        return self


ScenarioConfig = Annotated[
    Union[SimulateConfig, CalibrateConfig, KfpConfig, PolicyConfig, FeedbackConfig, SpatialConfig],
    Field(discriminator="scenario"),
]
_adapter = TypeAdapter(ScenarioConfig)


def _error_path(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error["loc"]) or "<root>"


def validate_config(data: Dict[str, Any]) -> ValidationResult:
    """Validate a parsed scenario file; ``details['config']`` holds the model on success"""
    if not isinstance(data, dict):
        return ValidationResult(False, ["<root>: a scenario file must hold a JSON object"], [], {})
    tag = data.get("scenario")
    if tag not in SCENARIO_ORDER:
        return ValidationResult(False, [f"scenario: expected one of {SCENARIO_ORDER}, got {tag!r}"], [], {})
    try:
        config = _adapter.validate_python(data)
    except ValidationError as e:
        errors = [f"{_error_path(err)}: {err['msg']}" for err in e.errors()]
        return ValidationResult(False, errors, [], {"scenario": tag})

    warnings = []
    if config.seed is None:
        warnings.append("seed: not set, the default seed is used")
    return ValidationResult(True, [], warnings, {"scenario": tag, "config": config})


def load_config_file(path: Path) -> Tuple[Dict[str, Any], ValidationResult]:
    """Read and validate a scenario file; raises ConfigurationError when unusable"""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError([f"{path}: no such config file"])
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigurationError([f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}"]) from e
    result = validate_config(data)
    if not result.is_valid:
        raise ConfigurationError(result.errors)
    for warning in result.warnings:
        logger.warning(warning)
    return data, result
