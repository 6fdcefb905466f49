"""
Random-scan adaptive Metropolis-Hastings over (mu0, theta, omega, 1/h).

Each iteration picks one coordinate uniformly, proposes from a normal
truncated below at 0, and accepts with the exact truncated-normal Hastings
correction.  Proposal SDs are rescaled at the end of every adaptation
interval, and the interval bound grows as b <- b**1.1 so adaptation
diminishes.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger
from pydantic import ValidationError
from scipy.special import log_ndtr, ndtr, ndtri

from src.Hawkes.compute.likelihood import log_likelihood
from src.Hawkes.utils.errors import InvalidParamsError
from src.Hawkes.utils.pydantic_schemas import (
    PARAMETER_NAMES,
    AdaptationRecord,
    Backend,
    Chain,
    EventSet,
    Params,
    PriorSpec,
    SamplerConfig,
    SamplerState,
)

N_COORDINATES = len(PARAMETER_NAMES)
ADAPTATION_GROWTH = 1.1
MIN_SCALE, MAX_SCALE = 0.5, 2.0


# ======================================================================
# DENSITIES AND PROPOSALS
# ======================================================================
def prior_log_density(theta, priors: PriorSpec) -> float:
    """Sum of log truncated-normal densities; -inf outside the support."""
    values = np.asarray(theta, dtype=np.float64)
    lower = priors.lower_bounds()
    if np.any(~np.isfinite(values)) or np.any(values <= lower):
        return -math.inf

    means, sds = priors.means(), priors.sds()
    z = (values - means) / sds
    log_normal = -0.5 * z * z - 0.5 * math.log(2.0 * math.pi) - np.log(sds)
    # log(1 - Phi((lb - m)/sd)) == log Phi((m - lb)/sd)
    log_mass = log_ndtr((means - lower) / sds)
    return float(np.sum(log_normal - log_mass))


def truncation_log_correction(current: float, proposal: float, sd: float) -> float:
    """log q(current | proposal) - log q(proposal | current) for the zero-truncated normal."""
    return float(log_ndtr(current / sd) - log_ndtr(proposal / sd))


def propose_coordinate(state: SamplerState, d: int, rng: np.random.Generator) -> Tuple[float, float]:
    """
    Inverse-CDF draw from Normal(theta_d, v_d) restricted to (0, inf).

    Returns (proposal, log Hastings correction).
    """
    current = state.theta[d]
    sd = state.v[d]
    mass = float(ndtr(current / sd))
    while True:
        u = rng.random()
        proposal = current - sd * float(ndtri(u * mass))
        if proposal > 0.0 and math.isfinite(proposal):
            break
    return proposal, truncation_log_correction(current, proposal, sd)


def to_params(theta, config: SamplerConfig) -> Params:
    mu0, excitation, omega, h_inv = (float(v) for v in theta)
    return Params(
        mu0=mu0,
        tau_x=config.tau_x,
        tau_t=config.tau_t,
        theta=excitation,
        omega=omega,
        h=1.0 / h_inv,
    )


def log_posterior(theta, events: EventSet, priors: PriorSpec, config: SamplerConfig) -> float:
    log_prior = prior_log_density(theta, priors)
    if not math.isfinite(log_prior):
        return -math.inf
    try:
        params = to_params(theta, config)
    except (ValidationError, InvalidParamsError, ZeroDivisionError):
        return -math.inf
    result = log_likelihood(events, params, config.backend)
    if not result.valid:
        return -math.inf
    return log_prior + result.log_lik


# ======================================================================
# TRANSITIONS
# ======================================================================
def mh_step(
    state: SamplerState,
    events: EventSet,
    priors: PriorSpec,
    config: SamplerConfig,
    rng: np.random.Generator,
) -> SamplerState:
    """One random-scan Metropolis-Hastings transition; one likelihood evaluation."""
    d = int(rng.integers(N_COORDINATES))
    proposal, correction = propose_coordinate(state, d, rng)

    candidate = list(state.theta)
    candidate[d] = proposal
    candidate_log_post = log_posterior(candidate, events, priors, config)

    log_ratio = candidate_log_post - state.cached_log_post + correction
    u = rng.random()
    accepted = math.isfinite(candidate_log_post) and u < math.exp(min(log_ratio, 0.0))

    if not accepted:
        return state.model_copy(update={"last_coordinate": d, "last_accepted": False})

    a = list(state.a)
    a[d] += 1
    return state.model_copy(
        update={
            "theta": tuple(candidate),
            "cached_log_post": candidate_log_post,
            "a": tuple(a),
            "last_coordinate": d,
            "last_accepted": True,
        }
    )


def adapt_step(state: SamplerState, d: int, target: float = 0.44) -> SamplerState:
    """Count one scan of coordinate d; rescale v_d when its interval completes."""
    l = list(state.l)
    l[d] += 1
    interval = math.ceil(state.b[d])
    if l[d] < interval:
        return state.model_copy(update={"l": tuple(l)})

    ratio = (state.a[d] / interval) / target
    ratio = min(max(ratio, MIN_SCALE), MAX_SCALE)

    v, b, a = list(state.v), list(state.b), list(state.a)
    v[d] *= ratio
    b[d] = b[d] ** ADAPTATION_GROWTH
    l[d] = 0
    a[d] = 0
    return state.model_copy(update={"v": tuple(v), "b": tuple(b), "l": tuple(l), "a": tuple(a)})


# ======================================================================
# SAMPLER
# ======================================================================
def derive_seed(seed: int, chain_index: int) -> int:
    """Independent per-chain seed from the run seed."""
    sequence = np.random.SeedSequence(seed, spawn_key=(chain_index,))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


class AdaptiveMetropolisSampler:
    def __init__(
        self,
        events: EventSet,
        priors: PriorSpec,
        config: SamplerConfig,
        chain_index: int = 0,
    ):
        self.events = events
        self.priors = priors
        self.config = config
        self.chain_index = chain_index
        self.seed = derive_seed(config.seed, chain_index)
        self.rng = np.random.default_rng(self.seed)

    def initial_state(self) -> SamplerState:
        theta = tuple(float(v) for v in self.config.initial_theta)
        return SamplerState(
            theta=theta,
            v=(self.config.initial_proposal_sd,) * N_COORDINATES,
            b=(self.config.initial_bound,) * N_COORDINATES,
            l=(0,) * N_COORDINATES,
            a=(0,) * N_COORDINATES,
            cached_log_post=log_posterior(theta, self.events, self.priors, self.config),
        )

    def run(self) -> Chain:
        config = self.config
        iterations = config.iterations
        draws = np.empty((iterations, N_COORDINATES))
        log_post = np.empty(iterations)
        scanned = np.empty(iterations, dtype=np.int64)
        accepted = np.empty(iterations, dtype=bool)
        adaptations: List[AdaptationRecord] = []

        state = self.initial_state()
        if not math.isfinite(state.cached_log_post):
            logger.warning(f"Chain {self.chain_index}: initial state has zero posterior density")

        report_every = max(1, iterations // 10)
        for s in range(iterations):
            state = mh_step(state, self.events, self.priors, config, self.rng)
            d = state.last_coordinate

            if config.adapt:
                before = state
                state = adapt_step(state, d, config.target_acceptance)
                if state.b[d] != before.b[d]:
                    interval = math.ceil(before.b[d])
                    adaptations.append(
                        AdaptationRecord(
                            iteration=s,
                            coordinate=d,
                            bound_before=before.b[d],
                            bound_after=state.b[d],
                            ratio=state.v[d] / before.v[d],
                            proposal_sd=state.v[d],
                        )
                    )
                    logger.debug(
                        f"Chain {self.chain_index}: {PARAMETER_NAMES[d]} interval of {interval} "
                        f"done, proposal sd -> {state.v[d]:.4g}"
                    )

            draws[s] = state.theta
            log_post[s] = state.cached_log_post
            scanned[s] = d
            accepted[s] = state.last_accepted

            if (s + 1) % report_every == 0:
                logger.info(
                    f"Chain {self.chain_index}: {s + 1}/{iterations} iterations, "
                    f"log posterior {state.cached_log_post:.3f}"
                )

        return Chain(
            chain_index=self.chain_index,
            seed=self.seed,
            config=config,
            priors=self.priors,
            n_events=len(self.events),
            initial_theta=tuple(float(v) for v in config.initial_theta),
            draws=draws,
            log_post=log_post,
            scanned=scanned,
            accepted=accepted,
            final_proposal_sd=tuple(state.v),
            adaptations=adaptations,
        )


def run_chain(
    events: EventSet,
    priors: PriorSpec,
    config: SamplerConfig,
    chain_index: int = 0,
) -> Chain:
    logger.info(f"Step 1: Running chain {chain_index} for {config.iterations} iterations on {len(events)} events...")
    try:
        chain = AdaptiveMetropolisSampler(events, priors, config, chain_index).run()
    except Exception as e:
        logger.error(f"Chain {chain_index} failed: {e}")
        raise
    logger.success(f"Chain {chain_index} finished, acceptance {chain.accepted.mean():.3f}")
    return chain


def partition_threads(backend: Backend, chain_count: int, thread_cap: Optional[int] = None) -> Tuple[int, Backend]:
    """
    Split the worker budget across chains.

    Returns (chains run at once, backend for each chain).
    """
    # a single-threaded backend can still run chains side by side up to the cap
    budget = backend.thread_count if backend.threaded else (thread_cap or 1)
    if thread_cap is not None:
        budget = min(budget, thread_cap)
    concurrent = max(1, min(chain_count, budget))
    per_chain = max(1, budget // concurrent)
    return concurrent, backend.model_copy(update={"thread_count": per_chain})


def run_chains(
    events: EventSet,
    priors: PriorSpec,
    config: SamplerConfig,
    thread_cap: Optional[int] = None,
) -> List[Chain]:
    """chain_count independent chains with derived seeds, in chain order."""
    concurrent, backend = partition_threads(config.backend, config.chain_count, thread_cap)
    chain_config = config.model_copy(update={"backend": backend})
    logger.info(
        f"Running {config.chain_count} chain(s), {concurrent} at a time on {backend.label}"
    )

    if concurrent == 1:
        return [run_chain(events, priors, chain_config, c) for c in range(config.chain_count)]

    with ThreadPoolExecutor(max_workers=concurrent, thread_name_prefix="chain") as pool:
        futures = [
            pool.submit(run_chain, events, priors, chain_config, c)
            for c in range(config.chain_count)
        ]
        return [future.result() for future in futures]
