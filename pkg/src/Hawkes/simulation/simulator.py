"""
Synthetic data: branching (cluster) simulation of the self-exciting process
and uniform random clouds for benchmarks.

Immigrants come from a homogeneous Poisson process on the window.  Every
event then has Poisson(theta) children, each displaced by Exponential(omega)
in time and an isotropic Gaussian(sd h) in space.  Children past t_end are
dropped; children outside the spatial rectangle are kept.
"""
import numpy as np
from loguru import logger

from src.Hawkes.utils.errors import HawkesError, InvalidParamsError
from src.Hawkes.utils.pydantic_schemas import EventSet, Params, SimTruth, SimWindow


def simulate_cluster_process(
    params: Params,
    window: SimWindow,
    background_rate_per_area: float,
    rng: np.random.Generator,
) -> SimTruth:
    """
    parent_index[n] is 0 for an immigrant, otherwise the 1-based position of
    the parent in the time-sorted output.
    """
    if params.theta >= 1.0:
        raise InvalidParamsError(f"theta must be < 1 for a subcritical cascade, got {params.theta}")
    if not background_rate_per_area > 0:
        raise InvalidParamsError(f"background rate must be > 0, got {background_rate_per_area}")

    n_immigrants = int(rng.poisson(background_rate_per_area * window.area * window.t_end))
    xs = [rng.uniform(window.xmin, window.xmax, n_immigrants)]
    ys = [rng.uniform(window.ymin, window.ymax, n_immigrants)]
    ts = [rng.uniform(0.0, window.t_end, n_immigrants)]
    parents = [np.full(n_immigrants, -1, dtype=np.int64)]

    generation = np.arange(n_immigrants)
    gen_x, gen_y, gen_t = xs[0], ys[0], ts[0]
    total = n_immigrants
    depth = 0
    while generation.size:
        counts = rng.poisson(params.theta, generation.size)
        source = np.repeat(np.arange(generation.size), counts)
        n_children = source.size
        if n_children == 0:
            break

        child_t = gen_t[source] + rng.exponential(1.0 / params.omega, n_children)
        child_x = gen_x[source] + rng.normal(0.0, params.h, n_children)
        child_y = gen_y[source] + rng.normal(0.0, params.h, n_children)

        keep = child_t < window.t_end
        gen_t, gen_x, gen_y = child_t[keep], child_x[keep], child_y[keep]
        parents.append(generation[source[keep]])
        xs.append(gen_x)
        ys.append(gen_y)
        ts.append(gen_t)

        generation = np.arange(total, total + gen_t.size)
        total += gen_t.size
        depth += 1

    if total == 0:
        raise HawkesError("simulation produced no events; raise the background rate or the window")

    x, y, t = np.concatenate(xs), np.concatenate(ys), np.concatenate(ts)
    parent = np.concatenate(parents)

    order = np.argsort(t, kind="stable")
    rank = np.empty(total, dtype=np.int64)
    rank[order] = np.arange(total)
    sorted_parent = parent[order]
    parent_index = np.where(sorted_parent < 0, 0, rank[np.maximum(sorted_parent, 0)] + 1)

    logger.info(
        f"Simulated {total} events ({n_immigrants} immigrants, {total - n_immigrants} offspring, "
        f"{depth} generations)"
    )
    events = EventSet(
        x=x[order],
        y=y[order],
        t=t[order],
        window_end=window.t_end,
        parent=parent_index,
    )
    return SimTruth(events=events, parent_index=parent_index, true_params=params)


def generate_benchmark_cloud(n: int, window: SimWindow, rng: np.random.Generator) -> EventSet:
    """n events uniform on the window, sorted by time."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    x = rng.uniform(window.xmin, window.xmax, n)
    y = rng.uniform(window.ymin, window.ymax, n)
    t = rng.uniform(0.0, window.t_end, n)
    order = np.argsort(t, kind="stable")
    return EventSet(x=x[order], y=y[order], t=t[order], window_end=window.t_end)
