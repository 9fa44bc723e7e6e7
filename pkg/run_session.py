"""
Run session management
Tracks the phase, statistics, warnings and written files of one scenario run
and writes its manifest
"""

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
import scipy
import torch

from config import VERSION
from utils import config_hash, file_sha256

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


class RunPhase(Enum):
    """Run phases in order"""
    INITIALIZATION = "initialization"
    VALIDATION = "validation"
    COMPUTATION = "computation"
    EXPORT = "export"
    COMPLETION = "completion"


@dataclass
class OutputRecord:
    """A written file, relative to the output directory"""
    path: str
    sha256: str
    kind: str


def _plain(value: Any) -> Any:
    """JSON-ready copy of a statistic (numpy scalars and arrays become lists and floats)"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


class RunSession:
    """
    Central bookkeeping for one scenario run
    Everything recorded here is deterministic for a fixed (config, seed)
    """

    def __init__(self, config: Dict[str, Any], seed: int, out_dir: Path):
        self.config = config
        self.seed = seed
        self.out_dir = Path(out_dir)
        self.scenario = config.get("scenario", "unknown")
        self.config_hash = config_hash(config)
        self.session_id = f"{self.scenario}_{self.config_hash[:12]}_{seed}"
        self.current_phase = RunPhase.INITIALIZATION

        self.files: Dict[str, OutputRecord] = {}
        self.stats: Dict[str, Any] = {}
        self.warnings: List[str] = []
        self.errors: List[str] = []

        logger.info(f"Run session {self.session_id} initialized")

    def start_phase(self, phase: RunPhase):
        logger.info(f"Starting run phase: {phase.value}")
        self.current_phase = phase

    def register_file(self, path: Path, kind: str) -> OutputRecord:
        """Hash a written file and record it; re-registering a path replaces the entry"""
        path = Path(path)
        try:
            relative = path.relative_to(self.out_dir).as_posix()
        except ValueError:
            relative = path.as_posix()
        record = OutputRecord(relative, file_sha256(path), kind)
        self.files[relative] = record
        logger.debug(f"Registered {relative} ({kind}) sha256={record.sha256[:12]}")
        return record

    def add_stat(self, key: str, value: Any):
        self.stats[key] = _plain(value)

    def add_warning(self, message: str):
        logger.warning(message)
        self.warnings.append(message)

    def add_error(self, message: str):
        logger.error(message)
        self.errors.append(message)

    def manifest(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "package_version": VERSION,
            "library_versions": {
                "numpy": np.__version__,
                "pandas": pd.__version__,
                "scipy": scipy.__version__,
                "torch": torch.__version__,
            },
            "files": [
                {"path": r.path, "sha256": r.sha256, "kind": r.kind}
                for r in sorted(self.files.values(), key=lambda r: r.path)
            ],
            "stats": self.stats,
            "warnings": list(self.warnings),
        }

    def write_manifest(self) -> Path:
        path = self.out_dir / MANIFEST_NAME
        text = json.dumps(self.manifest(), sort_keys=True, indent=2, allow_nan=True)
        with open(path, "w", newline="\n") as fh:
            fh.write(text + "\n")
        logger.info(f"Manifest written to {path} ({len(self.files)} files)")
        return path

    def get_session_summary(self) -> Dict[str, Any]:
        return {
            "session_id": self.session_id,
            "scenario": self.scenario,
            "current_phase": self.current_phase.value,
            "seed": self.seed,
            "files": len(self.files),
            "statistics": self.stats,
            "warnings": len(self.warnings),
            "errors": len(self.errors),
        }


# Global session instance
run_session: Optional[RunSession] = None


def get_run_session() -> Optional[RunSession]:
    """Get the current run session"""
    return run_session


def create_run_session(config: Dict[str, Any], seed: int, out_dir: Path) -> RunSession:
    """Create a new run session"""
    global run_session
    run_session = RunSession(config, seed, out_dir)
    return run_session


def clear_run_session():
    """Clear the current run session"""
    global run_session
    run_session = None
