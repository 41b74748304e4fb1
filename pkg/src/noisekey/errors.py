"""Exception hierarchy shared across the package."""


class NoiseKeyError(Exception):
    """Base class for all package errors."""


class ParameterError(NoiseKeyError, ValueError):
    """Invalid argument or configuration value."""


class FitError(NoiseKeyError):
    """Histogram fit could not be performed (degenerate data)."""


class ComputationError(NoiseKeyError):
    """A numerical computation failed its own sanity checks."""


class FramingError(NoiseKeyError):
    """Wire bytes do not form a valid frame."""


class TransportError(NoiseKeyError):
    """Transport-level failure (disconnect, closed channel)."""


class ProtocolError(NoiseKeyError):
    """Protocol contract violation between stations."""


class DesyncError(ProtocolError):
    """Station pools are no longer synchronized; fatal for the session."""


class InsufficientEntropyError(ProtocolError):
    """Round parameters leave no room for the hash reduction."""
