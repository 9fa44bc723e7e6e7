"""
End-to-end tests of the command-line entry point
"""

import json

import pytest
from typer.testing import CliRunner

from config import SCENARIO_ORDER
from run_scenario import EXIT_CONFIG, EXIT_MODEL, EXIT_OK, app

runner = CliRunner()

SMALL_SIMULATE = {
    "scenario": "simulate",
    "seed": 5,
    "model": {"preset": "two_species", "T": 0.5},
    "policy": {"constant": 0.9},
    "dt": 0.05,
    "n_paths": 20,
    "saved_paths": 2,
}


def _write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


@pytest.fixture
def simulate_config(tmp_path):
    return _write(tmp_path, "simulate.json", SMALL_SIMULATE)


def test_list_scenarios():
    result = runner.invoke(app, ["list"])
    assert result.exit_code == EXIT_OK
    for tag in SCENARIO_ORDER:
        assert tag in result.output


def test_validate_command(simulate_config, tmp_path):
    assert runner.invoke(app, ["validate", str(simulate_config)]).exit_code == EXIT_OK
    bad = _write(tmp_path, "bad.json", {"scenario": "simulate", "dt": -1})
    assert runner.invoke(app, ["validate", str(bad)]).exit_code == EXIT_CONFIG


def test_validate_only_writes_nothing(simulate_config, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(app, ["run", str(simulate_config), "--out", str(out), "--validate-only"])
    assert result.exit_code == EXIT_OK
    assert not out.exists()


def test_malformed_config_exits_before_any_output(tmp_path):
    out = tmp_path / "out"
    bad = _write(tmp_path, "bad.json", {"scenario": "simulate", "n_paths": "many"})
    result = runner.invoke(app, ["run", str(bad), "--out", str(out)])
    assert result.exit_code == EXIT_CONFIG
    assert not out.exists()


def test_missing_config_file(tmp_path):
    result = runner.invoke(app, ["run", str(tmp_path / "absent.json")])
    assert result.exit_code == EXIT_CONFIG


def test_simulate_run_writes_outputs_and_manifest(simulate_config, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(app, ["run", str(simulate_config), "--out", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    for name in ("deterministic.csv", "ensemble.csv", "path_000.csv", "path_001.csv", "manifest.json"):
        assert (out / name).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["scenario"] == "simulate"
    assert manifest["seed"] == 5
    assert {f["path"] for f in manifest["files"]} == {
        "deterministic.csv", "ensemble.csv", "path_000.csv", "path_001.csv"}
    assert manifest["stats"]["n_paths"] == 20


def test_runs_are_byte_identical(simulate_config, tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    assert runner.invoke(app, ["run", str(simulate_config), "--out", str(first)]).exit_code == EXIT_OK
    assert runner.invoke(app, ["run", str(simulate_config), "--out", str(second)]).exit_code == EXIT_OK
    for name in ("deterministic.csv", "ensemble.csv", "path_000.csv", "manifest.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_seed_flag_overrides_the_file(simulate_config, tmp_path):
    base, other = tmp_path / "base", tmp_path / "other"
    runner.invoke(app, ["run", str(simulate_config), "--out", str(base)])
    result = runner.invoke(app, ["run", str(simulate_config), "--out", str(other), "--seed", "6"])
    assert result.exit_code == EXIT_OK
    assert json.loads((other / "manifest.json").read_text())["seed"] == 6
    assert (base / "path_000.csv").read_bytes() != (other / "path_000.csv").read_bytes()


def test_model_failure_exits_with_model_code(tmp_path):
    config = _write(tmp_path, "kfp.json", {
        "scenario": "kfp",
        "seed": 1,
        "grid": {"b_min": 0.0, "b_max": 3.0, "n": 8},
        "dt": 1.0,
        "max_iter": 1,
    })
    out = tmp_path / "out"
    result = runner.invoke(app, ["run", str(config), "--out", str(out)])
    assert result.exit_code == EXIT_MODEL
    assert not (out / "manifest.json").exists()


def test_spatial_run(tmp_path):
    config = _write(tmp_path, "spatial.json", {
        "scenario": "spatial",
        "seed": 3,
        "mode": "with_quota",
        "params": {"resolution": 24, "T": 0.1, "dt": 0.02, "n_boats": 3, "quota_floor": None},
        "snapshot_times": [0.0, 0.1],
    })
    out = tmp_path / "out"
    result = runner.invoke(app, ["run", str(config), "--out", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    for name in ("totals.csv", "fleet.csv", "budget.csv", "psi.dat", "B_t0.dat", "P_t0.1.dat"):
        assert (out / name).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert "all_docked_tail_fraction" in manifest["stats"]


def test_feedback_run(tmp_path):
    config = _write(tmp_path, "feedback.json", {
        "scenario": "feedback",
        "seed": 2,
        "model": {"B0": [0.9, 0.8], "T": 0.5},
        "dt": 0.05,
        "n_paths": 6,
        "saved_paths": 1,
    })
    out = tmp_path / "out"
    result = runner.invoke(app, ["run", str(config), "--out", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    manifest = json.loads((out / "manifest.json").read_text())
    assert 0.0 <= manifest["stats"]["fraction_reduced"] <= 1.0
    assert (out / "feedback_path_000.csv").exists() and (out / "open_path_000.csv").exists()
    assert len(manifest["stats"]["median_drift"]) == 2


def test_feedback_run_from_the_holding_state(tmp_path):
    config = _write(tmp_path, "feedback.json", {
        "scenario": "feedback",
        "seed": 2,
        "model": {"T": 0.5, "sigma_init": 0.0},
        "dt": 0.05,
        "n_paths": 4,
        "saved_paths": 0,
        "hold_initial_state": True,
    })
    out = tmp_path / "out"
    result = runner.invoke(app, ["run", str(config), "--out", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    stats = json.loads((out / "manifest.json").read_text())["stats"]
    assert len(stats["fraction_reduced_per_species"]) == 2
    assert stats["u_min_seen"] >= 0.4 and stats["u_max_seen"] <= 1.4


def test_kfp_run(tmp_path):
    config = _write(tmp_path, "kfp.json", {
        "scenario": "kfp",
        "seed": 1,
        "grid": {"b_min": 0.0, "b_max": 3.0, "n": 10},
        "max_iter": 2,
        "sample_paths": 1,
        "sim_dt": 0.1,
    })
    out = tmp_path / "out"
    result = runner.invoke(app, ["run", str(config), "--out", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    for name in ("u1.dat", "u2.dat", "J_history.csv", "density_final.dat"):
        assert (out / name).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["stats"]["J_final"] <= manifest["stats"]["J_initial"]
    assert "J_final_extrapolated" in manifest["stats"]


def test_calibrate_run(tmp_path):
    config = _write(tmp_path, "calibrate.json", {
        "scenario": "calibrate",
        "seed": 4,
        "dt": 0.01,
        "sigmas": [0.01],
        "n_samples": 5,
        "training_size": 16,
        "hidden": [4],
        "training": {"epochs": 2, "batch_size": 8},
    })
    out = tmp_path / "out"
    result = runner.invoke(app, ["run", str(config), "--out", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    for name in ("calibration.csv", "root_calibration.csv", "observations_sigma0.01.csv",
                 "regressor_loss_sigma0.01.csv"):
        assert (out / name).exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert "root_max_rel_error" in manifest["stats"]
    assert "sigma0.01_mean" in manifest["stats"]


def test_policy_run(tmp_path):
    config = _write(tmp_path, "policy.json", {
        "scenario": "policy",
        "seed": 4,
        "model": {"T": 0.3},
        "dt": 0.1,
        "hidden": [4],
        "training": {"epochs": 2, "batch_size": 4},
        "eval_paths": 5,
        "surface_points": 3,
    })
    out = tmp_path / "out"
    result = runner.invoke(app, ["run", str(config), "--out", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    for name in ("policy_weights.txt", "policy_loss.csv", "baselines.csv", "policy_u1.dat", "policy_u2.dat"):
        assert (out / name).exists()
