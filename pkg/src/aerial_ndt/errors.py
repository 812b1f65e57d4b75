"""Exception types shared across the package."""


class AerialNDTError(Exception):
    """Base class for all package errors."""


class ConfigError(AerialNDTError):
    """Malformed or inconsistent scenario configuration."""


class NonFiniteState(AerialNDTError):
    """The simulated state diverged (NaN or inf)."""

    def __init__(self, message, tick=None):
        super().__init__(message if tick is None else f"{message} (tick {tick})")
        self.tick = tick


class NonFiniteInput(AerialNDTError, ValueError):
    pass


class InsufficientSamples(AerialNDTError, ValueError):
    pass


class DegenerateData(AerialNDTError, ValueError):
    pass


class ZeroStiffness(AerialNDTError, ValueError):
    pass


class SolverSingular(AerialNDTError):
    pass


class LimitUnreachable(AerialNDTError):
    pass


class InvalidPose(AerialNDTError, ValueError):
    pass


class NoContactPhase(AerialNDTError):
    """Metrics were requested for a run that never established contact."""


class SchemaError(AerialNDTError):
    """A log or metrics file does not have the expected columns."""


class CouplantWithoutContact(UserWarning):
    """Couplant dispensed while the probe is not attached."""
