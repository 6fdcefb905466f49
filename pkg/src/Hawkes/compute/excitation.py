"""
Self-excitation probabilities pi_n = xi_n / (mu_n + xi_n), the chance that
event n was triggered by an earlier event rather than by the background.

Uses the same pair kernel as the likelihood, so mu_n + xi_n is the lambda_n
the likelihood sees.
"""
import tempfile
from typing import Optional, Sequence

import numpy as np
from loguru import logger
from numba import njit

from src.Hawkes.compute.backends import PairKernel, PairReduceSpec, pair_reduce
from src.Hawkes.compute.likelihood import ensure_valid_params
from src.Hawkes.utils.errors import BatchEvaluationError, HawkesError
from src.Hawkes.utils.pydantic_schemas import (
    Backend,
    EventSet,
    ExcitationVector,
    Params,
    PosteriorExcitation,
)

DEFAULT_THIN_TO = 1000
DEFAULT_MEMORY_CAP = 10**8
# columns per chunk when taking quantiles of an on-disk draw matrix
_QUANTILE_CHUNK = 4096


@njit(nogil=True, cache=True)
def _excitation_share(n, s_background, s_trigger, x, y, t, p, window_end):
    if s_trigger == 0.0:
        return 0.0
    return s_trigger / (p[0] * s_background + s_trigger)


EXCITATION_KERNEL = PairKernel(
    name="excitation_probabilities",
    finalize_fn=_excitation_share,
)


def excitation_probabilities(events: EventSet, params: Params, backend: Backend) -> ExcitationVector:
    ensure_valid_params(params)
    result = pair_reduce(
        events,
        PairReduceSpec(
            kernel=EXCITATION_KERNEL,
            params=params.as_array(),
            window_end=events.window_end,
            reduce_targets=False,
        ),
        backend,
    )
    return ExcitationVector(
        pi=result.finals,
        mu=params.mu0 * result.sums[:, 0],
        xi=result.sums[:, 1],
    )


def thin_indices(n_draws: int, thin_to: int) -> np.ndarray:
    """Evenly spaced draw indices, at most ``thin_to`` of them."""
    if thin_to < 1:
        raise ValueError(f"thin_to must be >= 1, got {thin_to}")
    if n_draws <= thin_to:
        return np.arange(n_draws)
    return np.unique(np.round(np.linspace(0, n_draws - 1, thin_to)).astype(np.int64))


def posterior_excitation(
    events: EventSet,
    draws: Sequence[Params],
    backend: Backend,
    thin_to: int = DEFAULT_THIN_TO,
    per_draw_path: Optional[str] = None,
    memory_cap: int = DEFAULT_MEMORY_CAP,
    quantiles=(0.025, 0.975),
) -> PosteriorExcitation:
    """
    pi for an evenly thinned subset of posterior draws, with per-event means
    and quantiles.

    The S x N draw matrix stays in memory when S*N <= memory_cap and no
    ``per_draw_path`` is given; otherwise it is streamed to a .npy file.
    """
    if not draws:
        raise ValueError("draws must not be empty")

    indices = thin_indices(len(draws), thin_to)
    shape = (indices.size, len(events))

    on_disk = per_draw_path is not None or shape[0] * shape[1] > memory_cap
    if on_disk:
        if per_draw_path is None:
            per_draw_path = tempfile.NamedTemporaryFile(suffix=".npy", delete=False).name
            logger.warning(
                f"{shape[0]}x{shape[1]} draw matrix exceeds the memory cap; streaming to {per_draw_path}"
            )
        buffer = np.lib.format.open_memmap(per_draw_path, mode="w+", dtype=np.float64, shape=shape)
    else:
        buffer = np.empty(shape, dtype=np.float64)

    logger.info(f"Computing excitation probabilities for {shape[0]} of {len(draws)} draws...")
    for row, index in enumerate(indices):
        try:
            buffer[row] = excitation_probabilities(events, draws[index], backend).pi
        except (HawkesError, ValueError) as e:
            logger.error(f"Excitation probabilities failed for draw {index}: {e}")
            raise BatchEvaluationError(int(index), e) from e

    mean_pi = np.asarray(buffer.mean(axis=0))
    lower = np.empty(shape[1])
    upper = np.empty(shape[1])
    for start in range(0, shape[1], _QUANTILE_CHUNK):
        stop = min(start + _QUANTILE_CHUNK, shape[1])
        lower[start:stop], upper[start:stop] = np.quantile(
            np.asarray(buffer[:, start:stop]), quantiles, axis=0
        )

    if on_disk:
        buffer.flush()
        del buffer
        per_draw = None
    else:
        per_draw = buffer

    return PosteriorExcitation(
        mean_pi=mean_pi,
        lower=lower,
        upper=upper,
        quantiles=tuple(quantiles),
        draw_indices=indices,
        per_draw=per_draw,
        per_draw_path=per_draw_path,
    )
