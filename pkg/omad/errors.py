"""Exception hierarchy shared by every omad module."""

from typing import Any, Dict, Optional


class OmadError(Exception):
    """Root of all omad failures."""


class ConfigError(OmadError, ValueError):
    """Invalid configuration value, schedule, support or config file line."""


class ShapeError(ConfigError):
    """Operand shapes do not line up."""


class NonFiniteError(OmadError, FloatingPointError):
    """A loss, gradient or sampled value left the finite range."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ScheduleMismatchError(OmadError):
    """Trajectory and policy were built on different noise schedules."""


class CheckpointError(OmadError):
    """Checkpoint could not be read or does not fit the model it is loaded into."""


class TrainingAbort(OmadError):
    """Training stopped; `record` holds the diagnostic record written to disk."""

    def __init__(self, message: str, record: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.record = dict(record or {})
