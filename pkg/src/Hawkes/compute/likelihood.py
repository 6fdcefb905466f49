"""
Log-likelihood of the spatiotemporal Hawkes process:

    l(Theta) = sum_n [ log(lambda_n) - Lambda_n ]

Evaluated with one pair reduction: the block kernel sums background and
trigger rates per target, the finalizer turns them into l_n.  A target whose
rate is <= 0 or non-finite makes the whole evaluation invalid (log-lik -inf)
instead of raising, so samplers can reject such proposals.  mu0 > 0 keeps the
n' = n background self-term in every lambda_n, which bounds underflow.
"""
import math
from typing import List

from loguru import logger
from numba import njit

from src.Hawkes.compute.backends import PairKernel, PairReduceSpec, pair_reduce
from src.Hawkes.core.kernels import compensator_core
from src.Hawkes.utils.errors import BatchEvaluationError, HawkesError, InvalidParamsError
from src.Hawkes.utils.pydantic_schemas import Backend, EventSet, LikelihoodResult, Params


@njit(nogil=True, cache=True)
def _event_log_likelihood(n, s_background, s_trigger, x, y, t, p, window_end):
    rate = p[0] * s_background + s_trigger
    if not (rate > 0.0) or not math.isfinite(rate):
        return -math.inf
    return math.log(rate) - compensator_core(t[n], window_end, p[0], p[2], p[3], p[4])


LIKELIHOOD_KERNEL = PairKernel(
    name="log_likelihood",
    finalize_fn=_event_log_likelihood,
)


def ensure_valid_params(params: Params) -> None:
    """Re-check parameters that may have bypassed validation (model_construct)."""
    values = params.as_array()
    if not all(math.isfinite(v) for v in values):
        raise InvalidParamsError(f"parameters must be finite: {params}")
    if params.theta < 0 or any(v <= 0 for i, v in enumerate(values) if i != 3):
        raise InvalidParamsError(f"parameters must be positive: {params}")


def log_likelihood(
    events: EventSet,
    params: Params,
    backend: Backend,
    keep_per_event: bool = False,
) -> LikelihoodResult:
    ensure_valid_params(params)
    result = pair_reduce(
        events,
        PairReduceSpec(
            kernel=LIKELIHOOD_KERNEL,
            params=params.as_array(),
            window_end=events.window_end,
        ),
        backend,
    )

    valid = math.isfinite(result.total)
    if not valid:
        logger.debug(f"Likelihood invalid at {params}")
    return LikelihoodResult(
        log_lik=result.total if valid else -math.inf,
        per_event=result.finals if keep_per_event else None,
        valid=valid,
    )


def log_likelihood_batch(
    events: EventSet,
    params_list: List[Params],
    backend: Backend,
    keep_per_event: bool = False,
) -> List[LikelihoodResult]:
    if not params_list:
        raise ValueError("params_list must not be empty")

    results = []
    for index, params in enumerate(params_list):
        try:
            results.append(log_likelihood(events, params, backend, keep_per_event))
        except (HawkesError, ValueError) as e:
            logger.error(f"Likelihood evaluation {index} failed: {e}")
            raise BatchEvaluationError(index, e) from e
    return results
