"""
Posterior summaries: effective sample size, HPD intervals, reporting-unit
parameter tables and kernel smoothing of excitation probabilities over time.
"""
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from numpy.fft import irfft, rfft

from src.Hawkes.utils.pydantic_schemas import (
    Chain,
    EssEstimate,
    EventSet,
    ParameterSummary,
    SmoothedCurve,
    Summary,
)
from src.Hawkes.utils.units import days_to_minutes, km_to_m

MIN_ESS_SAMPLES = 10
MIN_HPD_SAMPLES = 20
DEFAULT_BANDWIDTH_DAYS = 30.0
DEFAULT_GRID_SIZE = 512
# grid points x events evaluated at once while smoothing
_SMOOTHING_BLOCK = 2_000_000


# ======================================================================
# EFFECTIVE SAMPLE SIZE
# ======================================================================
def autocorrelation(samples: np.ndarray) -> np.ndarray:
    """Normalised autocorrelation at every lag, via zero-padded FFT."""
    x = np.asarray(samples, dtype=np.float64)
    n = x.size
    centered = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    spectrum = rfft(centered, size)
    acov = irfft(spectrum * np.conjugate(spectrum), size)[:n] / n
    return acov / acov[0]


def effective_sample_size(samples) -> EssEstimate:
    """
    ESS with Geyer's initial positive sequence: sum autocorrelation pairs
    rho(2k) + rho(2k+1) until the first non-positive pair, keeping the pair
    sums monotone.  Capped at the sample count.
    """
    x = np.asarray(samples, dtype=np.float64)
    n = x.size
    if n < MIN_ESS_SAMPLES:
        raise ValueError(f"need at least {MIN_ESS_SAMPLES} samples for an ESS, got {n}")
    if np.ptp(x) == 0.0:
        return EssEstimate(ess=float(n), degenerate=True)

    rho = autocorrelation(x)
    n_pairs = n // 2
    pairs = rho[0:2 * n_pairs:2] + rho[1:2 * n_pairs:2]

    total = 0.0
    previous = math.inf
    for pair in pairs:
        if pair <= 0.0:
            break
        pair = min(pair, previous)
        total += pair
        previous = pair

    tau = max(-1.0 + 2.0 * total, 1.0)
    return EssEstimate(ess=min(float(n), n / tau))


# ======================================================================
# HPD INTERVALS
# ======================================================================
def hpd_interval(samples, mass: float = 0.95) -> Tuple[float, float]:
    """Shortest interval holding ceil(mass * S) of the sorted samples."""
    if not 0.0 < mass < 1.0:
        raise ValueError(f"mass must lie in (0, 1), got {mass}")
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    if n < MIN_HPD_SAMPLES:
        raise ValueError(f"need at least {MIN_HPD_SAMPLES} samples for an HPD interval, got {n}")

    # tolerance keeps mass * n from rounding up past an exact integer
    k = min(n, math.ceil(mass * n - 1e-9))
    widths = x[k - 1:] - x[: n - k + 1]
    start = int(np.argmin(widths))
    return float(x[start]), float(x[start + k - 1])


# ======================================================================
# SMOOTHING
# ======================================================================
def smooth_probabilities_over_time(
    events: EventSet,
    mean_pi,
    bandwidth: float = DEFAULT_BANDWIDTH_DAYS,
    grid_size: int = DEFAULT_GRID_SIZE,
    grid: Optional[np.ndarray] = None,
) -> SmoothedCurve:
    """Nadaraya-Watson estimate of pi(t) with a Gaussian kernel, on a uniform time grid."""
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth}")
    values = np.asarray(mean_pi, dtype=np.float64)
    if values.shape != (len(events),):
        raise ValueError(f"expected {len(events)} probabilities, got {values.shape}")

    t = events.t
    if grid is None:
        grid = np.linspace(t.min(), t.max(), grid_size)
    grid = np.asarray(grid, dtype=np.float64)

    smoothed = np.empty(grid.size)
    step = max(1, _SMOOTHING_BLOCK // t.size)
    for start in range(0, grid.size, step):
        z = (grid[start:start + step, None] - t[None, :]) / bandwidth
        log_w = -0.5 * z * z
        weights = np.exp(log_w - log_w.max(axis=1, keepdims=True))
        smoothed[start:start + step] = (weights @ values) / weights.sum(axis=1)

    return SmoothedCurve(grid=grid, values=np.clip(smoothed, 0.0, 1.0), bandwidth=bandwidth)


# ======================================================================
# CHAIN SUMMARIES
# ======================================================================
# (name, unit, transform of the sampled (mu0, theta, omega, h_inv) columns)
REPORTED_QUANTITIES: List[Tuple[str, str, Callable[[np.ndarray], np.ndarray]]] = [
    ("mu0", "1", lambda d: d[:, 0]),
    ("theta", "1", lambda d: d[:, 1]),
    ("omega", "1/day", lambda d: d[:, 2]),
    ("h_inv", "1/km", lambda d: d[:, 3]),
    ("temporal_bandwidth_min", "min", lambda d: days_to_minutes(1.0 / d[:, 2])),
    ("spatial_bandwidth_m", "m", lambda d: km_to_m(1.0 / d[:, 3])),
]


def summarize_samples(name: str, unit: str, per_chain: Sequence[np.ndarray], mass: float = 0.95) -> ParameterSummary:
    pooled = np.concatenate(per_chain)
    lo, hi = hpd_interval(pooled, mass)

    ess = 0.0
    degenerate = False
    for samples in per_chain:
        if samples.size < MIN_ESS_SAMPLES:
            continue
        estimate = effective_sample_size(samples)
        ess += estimate.ess
        degenerate = degenerate or estimate.degenerate

    return ParameterSummary(
        name=name,
        unit=unit,
        mean=float(pooled.mean()),
        sd=float(pooled.std(ddof=1)),
        hpd_lo=lo,
        hpd_hi=hi,
        ess=min(ess, float(pooled.size)),
        degenerate=degenerate,
    )


def summarize_chains(chains: Sequence[Chain], mass: float = 0.95) -> Summary:
    """Pool post-burn-in draws across chains; ESS is summed over chains."""
    if not chains:
        raise ValueError("no chains to summarize")
    retained = [chain.retained() for chain in chains]
    n_draws = sum(r.shape[0] for r in retained)
    logger.info(f"Summarizing {n_draws} retained draws from {len(chains)} chain(s)")

    rows = [
        summarize_samples(name, unit, [transform(r) for r in retained], mass)
        for name, unit, transform in REPORTED_QUANTITIES
    ]
    return Summary(rows=rows, n_draws=n_draws, n_chains=len(chains), mass=mass)


