# src/Hawkes/utils/errors.py


class HawkesError(Exception):
    """Base class for every error raised by the inference engine."""


class InvalidParamsError(HawkesError, ValueError):
    """Model parameters violate positivity or finiteness."""


class InvalidWindowError(HawkesError, ValueError):
    """An observation window ends before an event it should contain."""


class BackendError(HawkesError, ValueError):
    """Unsupported thread count or lane width."""


class ConfigError(HawkesError, ValueError):
    """Run configuration failed schema validation."""


class EventParseError(HawkesError, ValueError):
    """A row of an event file could not be turned into an event."""

    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class ChainFormatError(HawkesError, ValueError):
    """Chain file is empty, truncated, corrupt or from another format version."""


class DataMismatchError(HawkesError, ValueError):
    """A chain was fitted to a different event set than the one supplied."""


class BatchEvaluationError(HawkesError):
    """One element of a batched evaluation failed."""

    def __init__(self, index: int, cause: Exception):
        self.index = index
        self.cause = cause
        super().__init__(f"evaluation {index} failed: {cause}")


class BenchmarkDriftError(HawkesError, RuntimeError):
    """Repeated timed evaluations returned different results."""
