"""
Timing harness for one likelihood evaluation: untimed warmups, then timed
repeats on identical inputs, reporting the median and the minimum.
"""
import os
import platform
import time
from typing import Dict, List, Optional, Sequence

import numpy as np
from llvmlite import binding as llvm
from loguru import logger

from src.Hawkes.compute.likelihood import log_likelihood
from src.Hawkes.simulation.simulator import generate_benchmark_cloud
from src.Hawkes.utils.errors import BenchmarkDriftError
from src.Hawkes.utils.pydantic_schemas import Backend, EventSet, Params, SimWindow, TimingRecord

BENCH_PARAMS = Params(mu0=1.0, tau_x=1.6, tau_t=14.0, theta=0.15, omega=1.0, h=0.1)


def hardware_descriptor() -> str:
    try:
        cpu = llvm.get_host_cpu_name()
    except RuntimeError:
        cpu = platform.processor() or "unknown"
    return f"{platform.system()}-{platform.machine()} cpu={cpu} logical_cores={os.cpu_count()}"


def time_likelihood(
    events: EventSet,
    params: Params,
    backend: Backend,
    repeats: int = 3,
    warmups: int = 1,
) -> TimingRecord:
    if repeats < 3:
        raise ValueError(f"repeats must be >= 3, got {repeats}")
    if warmups < 1:
        raise ValueError(f"warmups must be >= 1, got {warmups}")

    for _ in range(warmups):
        log_likelihood(events, params, backend)

    seconds, results = [], []
    for _ in range(repeats):
        start = time.perf_counter()
        result = log_likelihood(events, params, backend)
        seconds.append(time.perf_counter() - start)
        results.append(float(result.log_lik).hex())

    if len(set(results)) != 1:
        logger.error(f"Likelihood drifted across repeats on {backend.label}: {results}")
        raise BenchmarkDriftError(f"{backend.label} returned {len(set(results))} distinct values over {repeats} repeats")

    return TimingRecord(
        backend=backend.label,
        n_events=len(events),
        repeats=repeats,
        warmups=warmups,
        median_seconds=float(np.median(seconds)),
        min_seconds=float(min(seconds)),
        hardware=hardware_descriptor(),
        log_lik=float.fromhex(results[0]),
    )


def run_benchmark(
    sizes: Sequence[int],
    backends: Sequence[Backend],
    repeats: int = 3,
    warmups: int = 1,
    seed: int = 0,
    window: Optional[SimWindow] = None,
    params: Params = BENCH_PARAMS,
) -> List[Dict]:
    """
    One row per (size, backend): median seconds and speedup over the serial
    backend on the same generated cloud.
    """
    if not sizes or any(n < 1 for n in sizes):
        raise ValueError(f"sizes must be positive, got {list(sizes)}")
    window = window or SimWindow()
    serial = Backend()

    rows = []
    for size in sizes:
        logger.info(f"Benchmarking N={size}...")
        events = generate_benchmark_cloud(size, window, np.random.default_rng(seed))

        records = {b.label: time_likelihood(events, params, b, repeats, warmups) for b in backends}
        baseline = records.get(serial.label) or time_likelihood(events, params, serial, repeats, warmups)

        for backend in backends:
            record = records[backend.label]
            rows.append(
                {
                    "size": size,
                    "backend": record.backend,
                    "seconds": record.median_seconds,
                    "min_seconds": record.min_seconds,
                    "speedup": baseline.median_seconds / record.median_seconds,
                }
            )
            logger.info(f"  {record.backend}: {record.median_seconds:.4f}s")
    return rows
