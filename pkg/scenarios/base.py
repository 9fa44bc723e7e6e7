"""
Shared driver for the scenario runners
"""

import logging
from abc import ABC, abstractmethod
from typing import Any, Dict

from exceptions import FisheryModelError
from io_utils import OutputManager
from run_session import RunPhase, RunSession, get_run_session

logger = logging.getLogger(__name__)


class ScenarioRunner(ABC):
    """One runner per scenario tag; ``run`` returns a result dict and never raises model errors"""

    tag = "abstract"

    def run(self, config, seed: int, outputs: OutputManager, progress: bool = False) -> Dict[str, Any]:
        session = get_run_session()
        if not session:
            logger.error("No active run session - create one first")
            return {"success": False, "error": "No active run session"}

        session.start_phase(RunPhase.COMPUTATION)
        logger.info(f"Starting {self.tag} scenario (seed {seed})")
        try:
            metrics = self.execute(config, seed, outputs, session, progress)
        except (FisheryModelError, ValueError) as e:
            message = f"{type(e).__name__}: {e}"
            session.add_error(f"{self.tag} scenario failed: {message}")
            return {"success": False, "error": message}

        for key, value in metrics.items():
            session.add_stat(key, value)
        logger.info(f"{self.tag} scenario completed: {len(outputs.written)} files written")
        return {"success": True, "files": len(outputs.written), "metrics": metrics}

    @abstractmethod
    def execute(self, config, seed: int, outputs: OutputManager, session: RunSession,
                progress: bool) -> Dict[str, Any]:
        """Compute, export through ``outputs`` and return the scalar metrics of the run"""
