import math
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

PARAMETER_NAMES = ("mu0", "theta", "omega", "h_inv")


def _readonly(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


# ======================================================================
# EVENT SCHEMAS
# ======================================================================
class Event(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float
    y: float
    t: float

    @model_validator(mode="after")
    def _check(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.t)):
            raise ValueError("event coordinates must be finite")
        if self.t < 0:
            raise ValueError(f"event time must be >= 0, got {self.t}")
        return self


class EventSet(BaseModel):
    """
    Time-sorted events in canonical units (km, days from window start).

    Stored column-wise; ``events[i]`` yields an Event.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    window_end: float
    origin: Optional[datetime] = None
    time_offset: float = 0.0
    ids: Optional[np.ndarray] = None
    parent: Optional[np.ndarray] = None

    @model_validator(mode="before")
    @classmethod
    def _coerce(cls, data: Any):
        data = dict(data)
        for key in ("x", "y", "t"):
            data[key] = _readonly(data[key])
        for key in ("ids", "parent"):
            if data.get(key) is not None:
                data[key] = _readonly(data[key], dtype=np.int64)
        if data.get("window_end") is None and data["t"].size:
            data["window_end"] = float(data["t"].max())
        return data

    @model_validator(mode="after")
    def _check(self):
        n = self.t.size
        if n < 1:
            raise ValueError("an event set needs at least one event")
        if self.t.ndim != 1 or self.x.shape != self.t.shape or self.y.shape != self.t.shape:
            raise ValueError("x, y and t must be 1-d arrays of equal length")
        for key in ("ids", "parent"):
            extra = getattr(self, key)
            if extra is not None and extra.shape != self.t.shape:
                raise ValueError(f"{key} must have one entry per event")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.t))):
            raise ValueError("event coordinates must be finite")
        if self.t[0] < 0:
            raise ValueError("event times must be >= 0")
        if np.any(np.diff(self.t) < 0):
            raise ValueError("event times must be nondecreasing")
        if not math.isfinite(self.window_end) or self.window_end < self.t[-1]:
            raise ValueError(
                f"window_end {self.window_end} precedes the last event at {self.t[-1]}"
            )
        return self

    def __len__(self) -> int:
        return int(self.t.size)

    def __getitem__(self, index: int) -> Event:
        return Event(x=float(self.x[index]), y=float(self.y[index]), t=float(self.t[index]))

    @classmethod
    def from_events(cls, events: List[Event], window_end: Optional[float] = None) -> "EventSet":
        ordered = sorted(events, key=lambda e: e.t)
        return cls(
            x=[e.x for e in ordered],
            y=[e.y for e in ordered],
            t=[e.t for e in ordered],
            window_end=window_end,
        )

    def subset(self, keep: np.ndarray) -> "EventSet":
        """Events where ``keep`` is true, metadata and window carried over."""
        keep = np.asarray(keep, dtype=bool)
        return EventSet(
            x=self.x[keep],
            y=self.y[keep],
            t=self.t[keep],
            window_end=self.window_end,
            origin=self.origin,
            time_offset=self.time_offset,
            ids=None if self.ids is None else self.ids[keep],
            parent=None if self.parent is None else self.parent[keep],
        )


# ======================================================================
# MODEL PARAMETERS
# ======================================================================
class Params(BaseModel):
    """
    Theta = (mu0, tau_x, tau_t, theta, omega, h) in canonical units.

    theta = 0 is accepted as the pure-background model; every other
    parameter must be strictly positive.
    """
    model_config = ConfigDict(frozen=True)

    mu0: float
    tau_x: float
    tau_t: float
    theta: float
    omega: float
    h: float

    @model_validator(mode="after")
    def _check(self):
        values = self.model_dump()
        for name, value in values.items():
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        for name in ("mu0", "tau_x", "tau_t", "omega", "h"):
            if values[name] <= 0:
                raise ValueError(f"{name} must be > 0, got {values[name]}")
        if self.theta < 0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")
        return self

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.mu0, self.tau_x, self.tau_t, self.theta, self.omega, self.h],
            dtype=np.float64,
        )


# ======================================================================
# COMPUTE BACKEND
# ======================================================================
class BackendKind(str, Enum):
    SERIAL = "serial"
    VECTORIZED = "simd"
    THREADED = "threads"
    THREADED_VECTORIZED = "threads+simd"


SUPPORTED_LANE_WIDTHS = (1, 2, 4, 8)


class Backend(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: BackendKind = BackendKind.SERIAL
    thread_count: int = Field(default=1, ge=1)
    lane_width: int = 4

    @field_validator("lane_width")
    @classmethod
    def _check_lanes(cls, value: int) -> int:
        if value not in SUPPORTED_LANE_WIDTHS:
            raise ValueError(f"lane_width must be one of {SUPPORTED_LANE_WIDTHS}, got {value}")
        return value

    @property
    def vectorized(self) -> bool:
        return self.kind in (BackendKind.VECTORIZED, BackendKind.THREADED_VECTORIZED)

    @property
    def threaded(self) -> bool:
        return self.kind in (BackendKind.THREADED, BackendKind.THREADED_VECTORIZED)

    @property
    def threads(self) -> int:
        return self.thread_count if self.threaded else 1

    @property
    def lanes(self) -> int:
        return self.lane_width if self.vectorized else 1

    @property
    def label(self) -> str:
        return f"{self.kind.value}(threads={self.threads},lanes={self.lanes})"


# ======================================================================
# ENGINE RESULTS
# ======================================================================
class LikelihoodResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    log_lik: float
    per_event: Optional[np.ndarray] = None
    valid: bool


class ExcitationVector(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    pi: np.ndarray
    mu: np.ndarray
    xi: np.ndarray


class PosteriorExcitation(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    mean_pi: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    quantiles: Tuple[float, float] = (0.025, 0.975)
    draw_indices: np.ndarray
    per_draw: Optional[np.ndarray] = None
    per_draw_path: Optional[str] = None


# ======================================================================
# SIMULATION
# ======================================================================
class SimWindow(BaseModel):
    model_config = ConfigDict(frozen=True)

    xmin: float = 0.0
    xmax: float = 10.0
    ymin: float = 0.0
    ymax: float = 10.0
    t_end: float = 365.0

    @model_validator(mode="after")
    def _check(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("simulation window needs positive area")
        if not self.t_end > 0:
            raise ValueError("simulation window needs positive duration")
        return self

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)


class SimTruth(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    events: EventSet
    parent_index: np.ndarray
    true_params: Params


# ======================================================================
# SAMPLER
# ======================================================================
class TruncatedNormalPrior(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    mean: float = 0.0
    sd: float = Field(default=10.0, gt=0)
    lower_bound: float = 0.0


class PriorSpec(BaseModel):
    """Truncated-normal priors on the sampled coordinates (mu0, theta, omega, 1/h)."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    mu0: TruncatedNormalPrior = TruncatedNormalPrior(sd=1.0)
    theta: TruncatedNormalPrior = TruncatedNormalPrior(sd=10.0)
    omega: TruncatedNormalPrior = TruncatedNormalPrior(sd=10.0)
    h_inv: TruncatedNormalPrior = TruncatedNormalPrior(sd=10.0)

    def _column(self, field: str) -> np.ndarray:
        return np.array([getattr(getattr(self, name), field) for name in PARAMETER_NAMES])

    def means(self) -> np.ndarray:
        return self._column("mean")

    def sds(self) -> np.ndarray:
        return self._column("sd")

    def lower_bounds(self) -> np.ndarray:
        return self._column("lower_bound")


class SamplerConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    iterations: int = Field(default=10_000, ge=1)
    burn_in: int = Field(default=1_000, ge=0)
    seed: int = Field(default=0, ge=0)
    target_acceptance: float = 0.44
    initial_theta: Tuple[float, float, float, float] = (1.0, 0.1, 1.0, 1.0)
    initial_proposal_sd: float = Field(default=1.0, gt=0)
    initial_bound: float = Field(default=5.0, ge=5.0)
    adapt: bool = True
    tau_x: float = Field(default=1.6, gt=0)
    tau_t: float = Field(default=14.0, gt=0)
    backend: Backend = Backend()
    chain_count: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check(self):
        if self.burn_in >= self.iterations:
            raise ValueError(f"burn_in ({self.burn_in}) must be < iterations ({self.iterations})")
        if not 0.0 < self.target_acceptance < 1.0:
            raise ValueError("target_acceptance must lie in (0, 1)")
        if any(not (v > 0 and math.isfinite(v)) for v in self.initial_theta):
            raise ValueError("initial_theta must be strictly positive")
        return self


class SamplerState(BaseModel):
    model_config = ConfigDict(frozen=True)

    theta: Tuple[float, ...]
    v: Tuple[float, ...]
    b: Tuple[float, ...]
    l: Tuple[int, ...]
    a: Tuple[int, ...]
    cached_log_post: float
    last_coordinate: int = -1
    last_accepted: bool = False

    @model_validator(mode="after")
    def _check(self):
        if any(not value > 0 for value in self.theta):
            raise ValueError("sampler state must stay strictly positive")
        if any(not value > 0 for value in self.v):
            raise ValueError("proposal standard deviations must be positive")
        return self


class AdaptationRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    iteration: int
    coordinate: int
    bound_before: float
    bound_after: float
    ratio: float
    proposal_sd: float


class Chain(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    chain_index: int = 0
    seed: int
    config: SamplerConfig
    priors: PriorSpec
    n_events: int
    initial_theta: Tuple[float, float, float, float]
    draws: np.ndarray
    log_post: np.ndarray
    scanned: np.ndarray
    accepted: np.ndarray
    final_proposal_sd: Tuple[float, float, float, float]
    adaptations: List[AdaptationRecord] = []

    @model_validator(mode="after")
    def _check(self):
        s = self.draws.shape[0]
        if self.draws.ndim != 2 or self.draws.shape[1] != len(PARAMETER_NAMES):
            raise ValueError("draws must be an S x 4 matrix")
        for name in ("log_post", "scanned", "accepted"):
            if getattr(self, name).shape != (s,):
                raise ValueError(f"{name} must have one entry per draw")
        return self

    @property
    def burn_in(self) -> int:
        return self.config.burn_in

    def retained(self) -> np.ndarray:
        """Draws after burn-in."""
        return self.draws[self.burn_in:]

    def to_params(self, row) -> Params:
        mu0, theta, omega, h_inv = (float(v) for v in row)
        return Params(
            mu0=mu0,
            tau_x=self.config.tau_x,
            tau_t=self.config.tau_t,
            theta=theta,
            omega=omega,
            h=1.0 / h_inv,
        )

    def retained_params(self) -> List[Params]:
        return [self.to_params(row) for row in self.retained()]

    def acceptance_rates(self, last: int = 2000) -> np.ndarray:
        """Per-coordinate acceptance over the final ``last`` scans of each coordinate."""
        rates = np.full(len(PARAMETER_NAMES), np.nan)
        for d in range(len(PARAMETER_NAMES)):
            hits = self.accepted[self.scanned == d][-last:]
            if hits.size:
                rates[d] = hits.mean()
        return rates


# ======================================================================
# DIAGNOSTICS
# ======================================================================
class EssEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    ess: float
    degenerate: bool = False


class SmoothedCurve(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: np.ndarray
    values: np.ndarray
    bandwidth: float


class ParameterSummary(BaseModel):
    name: str
    unit: str
    mean: float
    sd: float
    hpd_lo: float
    hpd_hi: float
    ess: float
    degenerate: bool = False


class Summary(BaseModel):
    rows: List[ParameterSummary]
    n_draws: int
    n_chains: int
    mass: float = 0.95

    def as_dict(self) -> Dict[str, ParameterSummary]:
        return {row.name: row for row in self.rows}


# ======================================================================
# BENCHMARKS
# ======================================================================
class TimingRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    backend: str
    n_events: int
    repeats: int = Field(ge=3)
    warmups: int = Field(ge=1)
    median_seconds: float
    min_seconds: float
    hardware: str
    log_lik: float

    @model_validator(mode="after")
    def _check(self):
        if self.min_seconds > self.median_seconds:
            raise ValueError("min time cannot exceed the median")
        return self
