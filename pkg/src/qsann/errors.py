"""Exception types shared across the package."""


class QsannError(Exception):
    """Base class for package-specific errors."""


class ConfigurationError(QsannError, ValueError):
    """Invalid configuration, dimension mismatch, or out-of-range setting."""


class EmptySequenceError(QsannError, ValueError):
    """An operation received an empty token sequence."""


class ParseError(QsannError, ValueError):
    """A data or checkpoint file could not be parsed."""


class TrainingAborted(QsannError, RuntimeError):
    """Training stopped because of a non-finite loss or gradient."""
