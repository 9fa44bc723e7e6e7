"""
Error types raised by the numerical modules
"""

from typing import List, Optional


class FisheryModelError(Exception):
    """Base class for model and numerical failures (CLI exit status 3)"""


class IntegrationError(FisheryModelError):
    """State became non-finite during time integration"""

    def __init__(self, time: float, message: Optional[str] = None):
        self.time = time
        super().__init__(message or f"Integration failed at t={time:.6g}: non-finite state")


class StabilityError(FisheryModelError):
    """Explicit step violates its stability bound"""

    def __init__(self, message: str, suggested_dt: Optional[float] = None):
        self.suggested_dt = suggested_dt
        if suggested_dt is not None:
            message = f"{message}; use dt <= {suggested_dt:.6g}"
        super().__init__(message)


class SchemeFaultError(FisheryModelError):
    """A discrete scheme broke one of its structural guarantees"""


class UnsupportedModeError(FisheryModelError):
    """Operation mode not available for the given policy or configuration"""


class TrainingDivergedError(FisheryModelError):
    """Loss became non-finite during training"""

    def __init__(self, last_finite_epoch: int, message: Optional[str] = None):
        self.last_finite_epoch = last_finite_epoch
        super().__init__(
            message or f"Training diverged after epoch {last_finite_epoch} (non-finite loss)"
        )


class SolverConvergenceError(FisheryModelError):
    """Linear or nonlinear solver did not reach its tolerance"""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


class ConfigurationError(Exception):
    """Scenario file missing, unreadable or schema-invalid (CLI exit status 2)"""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
