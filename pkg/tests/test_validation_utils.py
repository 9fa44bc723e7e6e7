"""
Tests for scenario file validation
"""

import json

import numpy as np
import pytest

from config import CONFIGS_DIR
from exceptions import ConfigurationError
from validation_utils import (
    CalibrateConfig,
    KfpConfig,
    ModelSection,
    SimulateConfig,
    load_config_file,
    validate_config,
)


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS_DIR.glob("*.json")))
def test_shipped_configs_are_valid(name):
    data, result = load_config_file(CONFIGS_DIR / name)
    assert result.is_valid, result.errors
    assert result.details["config"].scenario == data["scenario"]


def test_minimal_simulate_config():
    result = validate_config({"scenario": "simulate", "seed": 1})
    assert result.is_valid
    config = result.details["config"]
    assert isinstance(config, SimulateConfig)
    assert config.n_paths == 1000
    assert result.warnings == []


def test_missing_seed_is_a_warning():
    result = validate_config({"scenario": "simulate"})
    assert result.is_valid
    assert result.warnings


def test_unknown_scenario_tag():
    result = validate_config({"scenario": "forecast"})
    assert not result.is_valid
    assert result.errors[0].startswith("scenario:")


def test_non_object_document():
    assert not validate_config([1, 2, 3]).is_valid


def test_errors_carry_the_field_path():
    result = validate_config({"scenario": "simulate", "model": {"sigma": -1.0}})
    assert not result.is_valid
    assert any(e.startswith("simulate.model.sigma") or e.startswith("model.sigma") for e in result.errors)


def test_unknown_fields_are_rejected():
    result = validate_config({"scenario": "simulate", "n_pathz": 10})
    assert not result.is_valid


def test_model_invariants_are_checked():
    assert not validate_config({"scenario": "simulate", "model": {"u_min": 2.0, "u_max": 1.0}}).is_valid
    assert not validate_config({"scenario": "simulate", "model": {"B0": [1.0, 1.0, 1.0]}}).is_valid


def test_model_section_overrides_the_preset():
    params = ModelSection(sigma=0.3, B0=[0.9, 0.8]).to_params()
    assert params.sigma == 0.3
    np.testing.assert_array_equal(params.B0, [0.9, 0.8])
    assert params.u_max == 1.4
    single = ModelSection(preset="effort_model", sigma=0.1).to_params()
    assert single.d == 1 and single.dynamics == "effort"


def test_calibration_dates_are_checked():
    with pytest.raises(ValueError):
        CalibrateConfig(scenario="calibrate", t1=2.0, t2=1.0)
    with pytest.raises(ValueError):
        CalibrateConfig(scenario="calibrate", dt=0.5)


def test_kfp_needs_two_reduced_species():
    result = validate_config({"scenario": "kfp", "model": {"preset": "effort_model"}})
    assert not result.is_valid
    assert isinstance(KfpConfig(scenario="kfp"), KfpConfig)


def test_kfp_grid_is_checked():
    assert not validate_config({"scenario": "kfp", "grid": {"n": 4}}).is_valid
    assert not validate_config({"scenario": "kfp", "grid": {"b_min": 2.0, "b_max": 1.0}}).is_valid


def test_policy_needs_a_bounded_box():
    assert not validate_config({"scenario": "policy", "model": {"u_max": float("inf")}}).is_valid


def test_spatial_params_and_snapshots():
    assert validate_config({"scenario": "spatial", "params": {"resolution": 24}}).is_valid
    assert not validate_config({"scenario": "spatial", "params": {"warp": 1}}).is_valid
    assert not validate_config({"scenario": "spatial", "snapshot_times": [5.0]}).is_valid


def test_feedback_window():
    assert validate_config({"scenario": "feedback", "window": [0.5, 2.0]}).is_valid
    assert not validate_config({"scenario": "feedback", "window": [1.5, 1.0]}).is_valid


class TestLoadConfigFile:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config_file(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{\"scenario\": ")
        with pytest.raises(ConfigurationError) as info:
            load_config_file(path)
        assert "invalid JSON" in info.value.errors[0]

    def test_schema_errors_are_collected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"scenario": "simulate", "dt": -1.0, "n_paths": 0}))
        with pytest.raises(ConfigurationError) as info:
            load_config_file(path)
        assert len(info.value.errors) == 2
