# Export schemas and errors for easier imports
from src.Hawkes.utils.errors import (
    BackendError,
    BatchEvaluationError,
    BenchmarkDriftError,
    ChainFormatError,
    ConfigError,
    DataMismatchError,
    EventParseError,
    HawkesError,
    InvalidParamsError,
    InvalidWindowError,
)
from src.Hawkes.utils.pydantic_schemas import (
    Backend,
    BackendKind,
    Chain,
    Event,
    EventSet,
    Params,
    PriorSpec,
    SamplerConfig,
    SimWindow,
)

__all__ = [
    "BackendError",
    "BatchEvaluationError",
    "BenchmarkDriftError",
    "ChainFormatError",
    "ConfigError",
    "DataMismatchError",
    "EventParseError",
    "HawkesError",
    "InvalidParamsError",
    "InvalidWindowError",
    "Backend",
    "BackendKind",
    "Chain",
    "Event",
    "EventSet",
    "Params",
    "PriorSpec",
    "SamplerConfig",
    "SimWindow",
]
