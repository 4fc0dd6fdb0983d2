"""Exception hierarchy for the sonovortex engine.

``DomainError`` and its subclasses signal invalid input or configuration
(CLI exit code 2); every other ``EngineError`` signals an internal failure
(exit code 1).
"""


class EngineError(Exception):
    """Base class for all engine errors."""


class InternalConsistencyError(EngineError):
    """A physically impossible intermediate result (engine bug or bad model)."""


class DomainError(EngineError, ValueError):
    """Input outside the documented domain of an operation."""


class GeometryError(DomainError):
    """Degenerate geometry (coincident points, zero-distance target, ...)."""


class TargetingError(DomainError):
    """Target not reachable by the requested stimulus (e.g. off the shot axis)."""


class ConfigurationError(DomainError):
    """Invalid engine configuration, scene, or experiment condition."""


class OutOfRangeError(DomainError):
    """Value outside a calibrated or representable range."""


class FitError(DomainError):
    """Calibration fit impossible: insufficient or unidentifiable data."""


class EncodingError(DomainError):
    """Schedule cannot be serialized to the wire format."""

    def __init__(self, message: str, event_index: int | None = None):
        if event_index is not None:
            message = f"{message} (event index {event_index})"
        super().__init__(message)
        self.event_index = event_index


class DecodeError(DomainError):
    """Malformed wire stream."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NonConvergenceError(EngineError):
    """A threshold series failed to cross within the platform range."""

    def __init__(self, message: str, trials=None):
        super().__init__(message)
        self.trials = list(trials) if trials is not None else []
