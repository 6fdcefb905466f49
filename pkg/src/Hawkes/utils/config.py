# src/Hawkes/utils/config.py

import os

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Literal, Optional

from dotenv import load_dotenv
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.Hawkes.utils.errors import ConfigError
from src.Hawkes.utils.pydantic_schemas import PriorSpec, SamplerConfig

load_dotenv()


# ======================================================================
# EVENT FILE SPEC
# ======================================================================
class ColumnMap(BaseModel):
    """Header names in the event file for each canonical column."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    x: str = "x"
    y: str = "y"
    t: str = "t"
    parent: Optional[str] = "parent"


class EventFileSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    path: str
    delimiter: str = ","
    columns: ColumnMap = ColumnMap()
    distance_unit: Literal["m", "km"] = "km"
    time_unit: Literal["s", "min", "h", "d"] = "d"
    time_format: Literal["numeric", "iso8601"] = "numeric"
    # numeric times: value subtracted before conversion; None means the earliest event
    window_start: Optional[float] = None
    # iso8601 times: calendar start of the window; None means the earliest event
    window_origin: Optional[str] = None
    window_end_days: Optional[float] = None
    dedup_radius_m: float = Field(default=0.0, ge=0)
    dedup_window_s: float = Field(default=0.0, ge=0)
    exclude_holidays: bool = False
    holiday_margin_days: int = Field(default=1, ge=0)

    @field_validator("delimiter")
    @classmethod
    def _single_character(cls, value: str) -> str:
        if len(value) != 1:
            raise ValueError(f"delimiter must be one character, got {value!r}")
        return value


# ======================================================================
# OUTPUT
# ======================================================================
class OutputSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    directory: str = "runs"
    prefix: str = "chain"
    thin_to: int = Field(default=1000, ge=1)
    smoothing_bandwidth_days: float = Field(default=30.0, gt=0)
    grid_size: int = Field(default=512, ge=2)
    memory_cap_entries: int = Field(default=10**8, ge=1)
    per_draw_dump: Optional[str] = None


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    data: EventFileSpec
    priors: PriorSpec = PriorSpec()
    sampler: SamplerConfig = SamplerConfig()
    output: OutputSection = OutputSection()


# ======================================================================
# LOADING
# ======================================================================
def load_run_config(path) -> RunConfig:
    """
    Read and validate a TOML run configuration.

    Relative ``[data] path`` and ``[output] directory`` are resolved against
    the config file's folder.
    """
    path = Path(path)
    logger.info(f"Loading run configuration from {path}")
    try:
        with open(path, "rb") as f:
            document = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e

    for section, key in (("data", "path"), ("output", "directory")):
        table = document.get(section)
        if isinstance(table, dict) and isinstance(table.get(key), str) and not Path(table[key]).is_absolute():
            table[key] = str(path.parent / table[key])

    try:
        return RunConfig.model_validate(document)
    except ValidationError as e:
        logger.error(f"Invalid configuration {path}: {e}")
        raise ConfigError(f"{path}: {e}") from e


def thread_cap() -> Optional[int]:
    """Global worker cap from STHAWKES_THREADS, or None when unset."""
    raw = os.getenv("STHAWKES_THREADS")
    if not raw:
        return None
    try:
        value = int(raw)
    except ValueError as e:
        raise ConfigError(f"STHAWKES_THREADS must be an integer, got {raw!r}") from e
    if value < 1:
        raise ConfigError(f"STHAWKES_THREADS must be >= 1, got {value}")
    return value
