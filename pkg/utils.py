"""
Simple utility functions shared by the scenario runners
"""

import hashlib
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional


def setup_logging(level: str = "INFO", log_dir: Optional[Path] = None):
    """Setup logging configuration"""
    handlers = [logging.StreamHandler()]
    if log_dir is not None:
        Path(log_dir).mkdir(parents=True, exist_ok=True)
        handlers.append(
            logging.FileHandler(
                Path(log_dir) / f'fishquota_{datetime.now().strftime("%Y%m%d_%H%M%S")}.log'
            )
        )
    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def file_sha256(path: Path) -> str:
    """Content hash of a written output file"""
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def config_hash(config: Dict[str, Any]) -> str:
    """Stable hash of a scenario configuration"""
    payload = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()

