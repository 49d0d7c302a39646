"""Exception types shared across the package."""


class FlywheelError(Exception):
    """Base class for package errors."""


class QuadratureError(FlywheelError):
    """A frequency integral failed its self-check (bad limits or tolerance)."""


class ConsistencyError(FlywheelError):
    """Two independent computation paths disagree beyond tolerance."""


class TruncationError(FlywheelError):
    """Number-basis truncation is too small for the requested state."""


class GridCoverageError(FlywheelError):
    """Too many phase-space samples fall outside the histogram grid."""


class DivergenceError(FlywheelError):
    """The integrator produced a non-finite state."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite state at step {step}")


class VacuumStateError(FlywheelError):
    """Quantity undefined for a state with zero mean occupation."""


class ConfigError(FlywheelError):
    """Invalid run configuration."""
