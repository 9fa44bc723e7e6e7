"""
Tests for run bookkeeping and the manifest
"""

import json
from pathlib import Path

import numpy as np
import pytest

from config import VERSION, resolve_output_dir
from run_session import (
    MANIFEST_NAME,
    RunPhase,
    RunSession,
    clear_run_session,
    create_run_session,
    get_run_session,
)
from utils import config_hash, file_sha256

CONFIG = {"scenario": "simulate", "seed": 7, "n_paths": 10}


@pytest.fixture
def session(tmp_path):
    yield create_run_session(CONFIG, 7, tmp_path)
    clear_run_session()


def test_session_identity(session):
    assert session.scenario == "simulate"
    assert session.config_hash == config_hash(CONFIG)
    assert session.session_id == f"simulate_{config_hash(CONFIG)[:12]}_7"
    assert session.current_phase == RunPhase.INITIALIZATION
    assert get_run_session() is session


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_files_are_recorded_relative_to_the_output_dir(session, tmp_path):
    path = tmp_path / "table.csv"
    path.write_text("a\n1\n")
    record = session.register_file(path, "csv")
    assert record.path == "table.csv"
    assert record.sha256 == file_sha256(path)


def test_manifest_contents(session, tmp_path):
    for name in ("b.csv", "a.csv"):
        (tmp_path / name).write_text(name)
        session.register_file(tmp_path / name, "csv")
    session.add_stat("J_mean", np.float64(0.25))
    session.add_stat("B_final", np.array([1.0, 2.0]))
    session.add_warning("seed: not set")
    manifest = session.manifest()
    assert manifest["package_version"] == VERSION
    assert set(manifest["library_versions"]) == {"numpy", "pandas", "scipy", "torch"}
    assert [f["path"] for f in manifest["files"]] == ["a.csv", "b.csv"]
    assert manifest["stats"] == {"J_mean": 0.25, "B_final": [1.0, 2.0]}
    assert manifest["warnings"] == ["seed: not set"]


def test_manifest_file_is_stable(session, tmp_path):
    (tmp_path / "a.csv").write_text("x")
    session.register_file(tmp_path / "a.csv", "csv")
    first = session.write_manifest().read_bytes()
    second = session.write_manifest().read_bytes()
    assert first == second
    assert first.endswith(b"\n")
    assert json.loads(first)["seed"] == 7
    assert (tmp_path / MANIFEST_NAME).exists()


def test_summary_counts(session):
    session.start_phase(RunPhase.COMPUTATION)
    session.add_error("boom")
    summary = session.get_session_summary()
    assert summary["current_phase"] == "computation"
    assert summary["errors"] == 1
    assert summary["files"] == 0


def test_clear_session(tmp_path):
    create_run_session(CONFIG, 1, tmp_path)
    clear_run_session()
    assert get_run_session() is None


def test_standalone_session_has_no_global(tmp_path):
    clear_run_session()
    RunSession(CONFIG, 1, tmp_path)
    assert get_run_session() is None


class TestOutputDirectory:
    def test_flag_wins(self, monkeypatch):
        monkeypatch.setenv("FISHQUOTA_OUTPUT_DIR", "/tmp/env")
        assert resolve_output_dir("kfp", "cli", "cfg") == Path("cli")

    def test_environment_before_config(self, monkeypatch):
        monkeypatch.setenv("FISHQUOTA_OUTPUT_DIR", "/tmp/env")
        assert resolve_output_dir("kfp", None, "cfg") == Path("/tmp/env")

    def test_config_then_default(self, monkeypatch):
        monkeypatch.delenv("FISHQUOTA_OUTPUT_DIR", raising=False)
        assert resolve_output_dir("kfp", None, "cfg") == Path("cfg")
        assert resolve_output_dir("kfp").name == "kfp"
