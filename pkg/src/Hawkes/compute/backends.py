"""
Transformation-reduction execution for pairwise event kernels.

For every target n the block kernel accumulates two running sums over all
sources m (background and trigger), applies a per-target finalizer, and adds
the finalized values of its block in index order.  Nothing of size N^2 is
ever stored.

Execution strategies:
    serial        one block, one lane
    simd          one block, `lane_width` lanes of sources per step
    threads       contiguous target blocks on a thread pool, one lane
    threads+simd  both

A lane step fills fixed-size arrays with the exponent arguments of
`lane_width` sources, takes exp over each array in one tight loop (compiled
with approximate-function fastmath only, so numba maps it to SVML vector
calls when the runtime is present), then adds the lanes into their own
accumulators.  Sums never get reassociation flags.

Block b of B owns targets [b*floor(N/B), (b+1)*floor(N/B)); the last block runs
to N.  Lanes are summed left to right when the inner loop exits, then the
scalar tail (N mod lane_width sources) is added.  Per-block totals are
combined in block order, so results depend only on (kind, threads, lanes).
"""
import atexit
import math
import threading
import weakref
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from llvmlite import binding as llvm
from loguru import logger
from numba import config as numba_config
from numba import njit
from pydantic import BaseModel, ConfigDict

from src.Hawkes.core.kernels import pair_coefficients, pair_exponents
from src.Hawkes.utils.errors import BackendError
from src.Hawkes.utils.pydantic_schemas import (
    SUPPORTED_LANE_WIDTHS,
    Backend,
    BackendKind,
    EventSet,
)

# CPU features that provide at least this many float64 lanes
_LANE_FEATURES = {
    2: ("sse2", "neon"),
    4: ("avx",),
    8: ("avx512f",),
}


# ======================================================================
# REDUCTION SPECS
# ======================================================================
class PairKernel(BaseModel):
    """
    Compiled pieces of a per-target reduction.

    coefficients_fn(p) -> float64 array c, with c[0] and c[1] the background
        and trigger scales
    exponents_fn(dx, dy, dt, c) -> (arg0, arg1, weight), one source's
        contribution being c[0]*exp(arg0) and c[1]*exp(arg1)*weight
    finalize_fn(n, s0, s1, x, y, t, p, window_end) -> float
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    finalize_fn: Any
    coefficients_fn: Any = pair_coefficients
    exponents_fn: Any = pair_exponents


class PairReduceSpec(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kernel: PairKernel
    params: np.ndarray
    window_end: float
    reduce_targets: bool = True


class PairReduceResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    sums: np.ndarray
    finals: np.ndarray
    total: Optional[float] = None


# ======================================================================
# KERNEL FACTORY
# ======================================================================
@njit(nogil=True, cache=True, fastmath={"afn"})
def _exp_lanes(values):
    for k in range(values.shape[0]):
        values[k] = math.exp(values[k])


def _build_block_kernel(kernel: PairKernel, lanes: int):
    coefficients_fn = kernel.coefficients_fn
    exponents_fn = kernel.exponents_fn
    finalize_fn = kernel.finalize_fn

    @njit(nogil=True)
    def block_kernel(x, y, t, p, window_end, lo, hi, sums, finals):
        n_events = t.shape[0]
        full = n_events - n_events % lanes
        c = coefficients_fn(p)
        scale0 = c[0]
        scale1 = c[1]
        arg0 = np.empty(lanes)
        arg1 = np.empty(lanes)
        weight = np.empty(lanes)
        acc0 = np.empty(lanes)
        acc1 = np.empty(lanes)
        total = 0.0
        for n in range(lo, hi):
            xn = x[n]
            yn = y[n]
            tn = t[n]
            for k in range(lanes):
                acc0[k] = 0.0
                acc1[k] = 0.0
            for base in range(0, full, lanes):
                for k in range(lanes):
                    m = base + k
                    a0, a1, w = exponents_fn(xn - x[m], yn - y[m], tn - t[m], c)
                    arg0[k] = a0
                    arg1[k] = a1
                    weight[k] = w
                _exp_lanes(arg0)
                _exp_lanes(arg1)
                for k in range(lanes):
                    acc0[k] += scale0 * arg0[k]
                    acc1[k] += scale1 * arg1[k] * weight[k]
            s0 = 0.0
            s1 = 0.0
            for k in range(lanes):
                s0 += acc0[k]
                s1 += acc1[k]
            for m in range(full, n_events):
                a0, a1, w = exponents_fn(xn - x[m], yn - y[m], tn - t[m], c)
                s0 += scale0 * math.exp(a0)
                s1 += scale1 * math.exp(a1) * w
            sums[n, 0] = s0
            sums[n, 1] = s1
            value = finalize_fn(n, s0, s1, x, y, t, p, window_end)
            finals[n] = value
            total += value
        return total

    return block_kernel


_KERNELS: Dict[Tuple[str, int], Any] = {}
_KERNELS_LOCK = threading.Lock()


def _kernel_for(kernel: PairKernel, lanes: int):
    key = (kernel.name, lanes)
    with _KERNELS_LOCK:
        compiled = _KERNELS.get(key)
        if compiled is None:
            compiled = _build_block_kernel(kernel, lanes)
            _KERNELS[key] = compiled
    return compiled


@njit(nogil=True, cache=True)
def _lane_sum(values, lo, hi, lanes):
    acc = np.zeros(lanes)
    full = lo + (hi - lo) - (hi - lo) % lanes
    for base in range(lo, full, lanes):
        for k in range(lanes):
            acc[k] += values[base + k]
    total = 0.0
    for k in range(lanes):
        total += acc[k]
    for i in range(full, hi):
        total += values[i]
    return total


# ======================================================================
# THREAD POOLS
# ======================================================================
# Pools belong to the thread that submits to them: chains running side by
# side each get their own `thread_count` workers.
_LOCAL = threading.local()
_LIVE_POOLS: "weakref.WeakSet[ThreadPoolExecutor]" = weakref.WeakSet()
_POOLS_LOCK = threading.Lock()


def _pool(threads: int) -> ThreadPoolExecutor:
    pools = getattr(_LOCAL, "pools", None)
    if pools is None:
        pools = _LOCAL.pools = {}
    pool = pools.get(threads)
    if pool is None:
        pool = ThreadPoolExecutor(max_workers=threads, thread_name_prefix=f"pair-reduce-{threads}")
        pools[threads] = pool
        with _POOLS_LOCK:
            _LIVE_POOLS.add(pool)
    return pool


@atexit.register
def _shutdown_pools() -> None:
    with _POOLS_LOCK:
        pools = list(_LIVE_POOLS)
    for pool in pools:
        pool.shutdown(wait=False)


# ======================================================================
# BACKEND RESOLUTION
# ======================================================================
@lru_cache(maxsize=1)
def supported_lane_widths() -> Tuple[int, ...]:
    """Lane widths the host CPU supports for float64."""
    try:
        features = llvm.get_host_cpu_features()
    except RuntimeError:
        return (1,)
    widths = [1]
    for width, names in _LANE_FEATURES.items():
        if any(features.get(name, False) for name in names):
            widths.append(width)
    return tuple(widths)


_FALLBACK_NOTICES = set()


def check_backend(backend: Backend) -> None:
    if backend.thread_count < 1:
        raise BackendError(f"thread_count must be >= 1, got {backend.thread_count}")
    if backend.lane_width not in SUPPORTED_LANE_WIDTHS:
        raise BackendError(
            f"lane_width must be one of {SUPPORTED_LANE_WIDTHS}, got {backend.lane_width}"
        )


def effective_lanes(backend: Backend) -> int:
    lanes = backend.lanes
    if lanes > 1 and lanes not in supported_lane_widths():
        if lanes not in _FALLBACK_NOTICES:
            _FALLBACK_NOTICES.add(lanes)
            logger.warning(f"Host CPU lacks {lanes}-wide float64 lanes; falling back to lane_width=1")
        return 1
    if lanes > 1 and not numba_config.USING_SVML and "svml" not in _FALLBACK_NOTICES:
        _FALLBACK_NOTICES.add("svml")
        logger.info("SVML runtime not loaded; lane steps evaluate exp one source at a time")
    return lanes


def block_bounds(n_items: int, blocks: int) -> List[Tuple[int, int]]:
    blocks = max(1, min(blocks, n_items))
    size = n_items // blocks
    bounds = [(b * size, (b + 1) * size) for b in range(blocks - 1)]
    bounds.append(((blocks - 1) * size, n_items))
    return bounds


# ======================================================================
# OPERATIONS
# ======================================================================
def pair_reduce(events: EventSet, spec: PairReduceSpec, backend: Backend) -> PairReduceResult:
    """Run one transformation-reduction over all (target, source) pairs."""
    check_backend(backend)
    lanes = effective_lanes(backend)
    kernel = _kernel_for(spec.kernel, lanes)

    n_events = len(events)
    x, y, t = events.x, events.y, events.t
    p = np.ascontiguousarray(spec.params, dtype=np.float64)
    sums = np.empty((n_events, 2), dtype=np.float64)
    finals = np.empty(n_events, dtype=np.float64)

    bounds = block_bounds(n_events, backend.threads)
    if len(bounds) == 1:
        partials = [kernel(x, y, t, p, spec.window_end, 0, n_events, sums, finals)]
    else:
        futures = [
            _pool(len(bounds)).submit(kernel, x, y, t, p, spec.window_end, lo, hi, sums, finals)
            for lo, hi in bounds
        ]
        partials = [future.result() for future in futures]

    total = None
    if spec.reduce_targets:
        total = 0.0
        for partial in partials:
            total += partial
    return PairReduceResult(sums=sums, finals=finals, total=total)


def reduce_all(values, backend: Backend) -> float:
    """Sum values: contiguous blocks per thread in index order, then one pass over the partials."""
    check_backend(backend)
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("reduce_all needs at least one value")
    lanes = effective_lanes(backend)

    bounds = block_bounds(values.size, backend.threads)
    if len(bounds) == 1:
        return float(_lane_sum(values, 0, values.size, lanes))

    futures = [_pool(len(bounds)).submit(_lane_sum, values, lo, hi, lanes) for lo, hi in bounds]
    total = 0.0
    for future in futures:
        total += future.result()
    return float(total)


def parse_backend(kind: str, threads: int = 1, lanes: int = 4) -> Backend:
    """Backend from CLI-style names (serial | simd | threads | threads+simd)."""
    try:
        backend_kind = BackendKind(kind)
    except ValueError as e:
        raise BackendError(f"unknown backend '{kind}'") from e
    return Backend(kind=backend_kind, thread_count=threads, lane_width=lanes)
