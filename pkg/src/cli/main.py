"""
sthawkes command line: fit | probs | simulate | bench | summarize | validate.

Commands talk to each other only through files.  Exit status is 0 on
success, 1 on invalid input or a failed check, 2 when an input file is missing.
"""
import argparse
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from loguru import logger
from pydantic import ValidationError

from src.Hawkes.bench.timing import hardware_descriptor, run_benchmark
from src.Hawkes.compute.backends import parse_backend
from src.Hawkes.compute.excitation import posterior_excitation
from src.Hawkes.diagnostics.reports import render_bench, render_summary, render_validation
from src.Hawkes.diagnostics.summaries import smooth_probabilities_over_time, summarize_chains
from src.Hawkes.samplers.AdaptiveSampler import run_chains
from src.Hawkes.simulation.simulator import generate_benchmark_cloud, simulate_cluster_process
from src.Hawkes.utils.config import EventFileSpec, RunConfig, load_run_config, thread_cap
from src.Hawkes.utils.errors import DataMismatchError, HawkesError
from src.Hawkes.utils.io_tools import (
    read_chain,
    read_events,
    write_chain,
    write_curve,
    write_events,
    write_excitation_table,
    write_summary_table,
    write_table,
)
from src.Hawkes.utils.log_config import configure_logging
from src.Hawkes.utils.pydantic_schemas import Backend, Params, SamplerConfig, SimWindow
from src.cli.validation import DEFAULT_ORACLE_SIZES, run_validation

BACKEND_CHOICES = ["serial", "simd", "threads", "threads+simd"]
LANE_CHOICES = [1, 2, 4, 8]
EXIT_OK, EXIT_FAILURE, EXIT_MISSING_FILE = 0, 1, 2


# ======================================================================
# PARSER
# ======================================================================
def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration; flags given here override it")
    common.add_argument("--seed", type=int, help="seed for every random draw of the command")
    common.add_argument(
        "--threads",
        type=int,
        help="worker threads for threaded backends; STHAWKES_THREADS caps this",
    )
    common.add_argument("--backend", choices=BACKEND_CHOICES, help="compute backend for pair reductions")
    common.add_argument("--lanes", type=int, choices=LANE_CHOICES, help="vector lane width for simd backends")
    common.add_argument(
        "--log-level",
        default=None,
        help="loguru level (DEBUG, INFO, WARNING, ...); defaults to STHAWKES_LOG_LEVEL or INFO",
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="sthawkes",
        description="Bayesian inference for spatiotemporal Hawkes processes.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        return commands.add_parser(
            name, parents=[common], help=help_text, description=help_text,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )

    fit = add("fit", "run the adaptive sampler and write chain files plus a summary")
    fit.add_argument("--chains", type=int, help="number of independent chains (overrides [sampler] chain_count)")
    fit.add_argument("--iterations", type=int, help="MCMC iterations per chain (overrides [sampler])")
    fit.add_argument("--burn-in", type=int, help="leading draws discarded from summaries (overrides [sampler])")
    fit.add_argument("--output-dir", help="directory for chain files and tables (overrides [output] directory)")

    probs = add("probs", "posterior self-excitation probabilities for every event")
    probs.add_argument("chain_files", nargs="+", metavar="CHAIN", help="chain files written by fit")
    probs.add_argument("--events", help="event file; defaults to [data] path of --config")
    probs.add_argument("--thin-to", type=int, help="use at most this many evenly spaced retained draws (default 1000)")
    probs.add_argument("--output", required=True, help="CSV with per-event mean and 2.5%%/97.5%% quantiles of pi")
    probs.add_argument("--per-draw", help="also write the draws x events matrix of pi to this .npy file")
    probs.add_argument("--curve", help="CSV of the time-smoothed posterior mean of pi")
    probs.add_argument("--bandwidth", type=float, help="smoothing bandwidth in days (default 30)")
    probs.add_argument("--grid-size", type=int, help="points on the smoothing time grid (default 512)")

    simulate = add("simulate", "write a synthetic event file")
    simulate.add_argument("--mode", choices=["cluster", "cloud"], default="cluster", help="branching process or uniform cloud")
    simulate.add_argument("--output", required=True, help="event CSV to write (cluster mode adds a parent column)")
    simulate.add_argument("--n", type=int, default=1000, help="event count for cloud mode")
    simulate.add_argument("--width", type=float, default=10.0, help="window width in km")
    simulate.add_argument("--height", type=float, default=10.0, help="window height in km")
    simulate.add_argument("--duration", type=float, default=365.0, help="window length in days")
    simulate.add_argument("--background-rate", type=float, default=0.05, help="immigrants per km^2 per day (cluster mode)")
    simulate.add_argument("--theta", type=float, default=0.15, help="expected offspring per event, < 1")
    simulate.add_argument("--omega", type=float, default=1.0, help="offspring delay rate per day")
    simulate.add_argument("--h", type=float, default=0.1, help="offspring displacement sd in km")
    simulate.add_argument("--mu0", type=float, default=1.0, help="background weight recorded as truth")
    simulate.add_argument("--tau-x", type=float, default=1.6, help="background spatial bandwidth recorded as truth (km)")
    simulate.add_argument("--tau-t", type=float, default=14.0, help="background temporal bandwidth recorded as truth (days)")

    bench = add("bench", "time one likelihood evaluation per size and backend")
    bench.add_argument("--sizes", type=int, nargs="+", default=[1000, 2000], help="event counts to generate")
    bench.add_argument("--backends", nargs="+", choices=BACKEND_CHOICES, default=["serial"], help="backends to time")
    bench.add_argument("--repeats", type=int, default=3, help="timed repetitions per cell (>= 3)")
    bench.add_argument("--warmups", type=int, default=1, help="untimed repetitions per cell (>= 1)")
    bench.add_argument("--output", help="CSV timing table (size, backend, seconds, min_seconds, speedup)")

    summarize = add("summarize", "posterior summary of existing chain files")
    summarize.add_argument("chain_files", nargs="+", metavar="CHAIN", help="chain files written by fit")
    summarize.add_argument("--mass", type=float, default=0.95, help="HPD probability mass")
    summarize.add_argument("--output", help="CSV summary table")

    validate = add("validate", "oracle, backend and quadrature checks on small instances")
    validate.add_argument("--instances", type=int, default=50, help="random oracle instances")
    validate.add_argument(
        "--sizes", type=int, nargs="+", default=list(DEFAULT_ORACLE_SIZES), help="event counts cycled over the oracle instances"
    )
    validate.add_argument("--backend-events", type=int, default=2000, help="event count for the backend agreement check")

    return parser


# ======================================================================
# HELPERS
# ======================================================================
def _load_config(args) -> Optional[RunConfig]:
    return load_run_config(args.config) if args.config else None


def resolve_backend(args, config: Optional[RunConfig]) -> Backend:
    """--backend/--threads/--lanes over [sampler.backend], bounded by STHAWKES_THREADS."""
    base = config.sampler.backend if config else Backend()
    kind = args.backend or base.kind.value
    threads = args.threads or base.thread_count
    if args.threads is None and args.backend in ("threads", "threads+simd") and base.thread_count == 1:
        threads = os.cpu_count() or 1
    cap = thread_cap()
    if cap is not None:
        threads = min(threads, cap)
    lanes = args.lanes or base.lane_width
    return parse_backend(kind, threads, lanes)


def _read_chain_files(paths: List[str]):
    chains = [read_chain(p) for p in paths]
    logger.info(f"Loaded {len(chains)} chain file(s)")
    return chains


# ======================================================================
# COMMANDS
# ======================================================================
def cmd_fit(args) -> int:
    if not args.config:
        raise HawkesError("fit needs --config")
    config = _load_config(args)
    backend = resolve_backend(args, config)

    update = {"backend": backend}
    for flag, field in (("seed", "seed"), ("chains", "chain_count"), ("iterations", "iterations"), ("burn_in", "burn_in")):
        if getattr(args, flag) is not None:
            update[field] = getattr(args, flag)
    sampler = SamplerConfig.model_validate({**config.sampler.model_dump(), **update})

    logger.info("Step 1: Reading events...")
    events = read_events(config.data.path, config.data)

    logger.info("Step 2: Sampling...")
    chains = run_chains(events, config.priors, sampler, thread_cap=thread_cap() or args.threads)

    logger.info("Step 3: Writing chains and summary...")
    out_dir = Path(args.output_dir or config.output.directory)
    for chain in chains:
        write_chain(chain, out_dir / f"{config.output.prefix}_{chain.chain_index}.json")

    summary = summarize_chains(chains)
    write_summary_table(out_dir / f"{config.output.prefix}_summary.csv", summary)
    sys.stdout.write(render_summary(summary, chains))
    logger.success(f"Fit complete; outputs in {out_dir}")
    return EXIT_OK


def cmd_probs(args) -> int:
    config = _load_config(args)
    backend = resolve_backend(args, config)

    if args.events:
        spec = config.data.model_copy(update={"path": args.events}) if config else EventFileSpec(path=args.events)
    elif config:
        spec = config.data
    else:
        raise HawkesError("probs needs --events or a --config with a [data] section")

    output = config.output if config else None
    thin_to = args.thin_to or (output.thin_to if output else 1000)
    bandwidth = args.bandwidth or (output.smoothing_bandwidth_days if output else 30.0)
    grid_size = args.grid_size or (output.grid_size if output else 512)
    memory_cap = output.memory_cap_entries if output else 10**8
    per_draw = args.per_draw or (output.per_draw_dump if output else None)

    chains = _read_chain_files(args.chain_files)
    events = read_events(spec.path, spec)
    for path, chain in zip(args.chain_files, chains):
        if chain.n_events != len(events):
            raise DataMismatchError(
                f"{path} was fitted to {chain.n_events} events but {spec.path} holds {len(events)}"
            )

    draws = [params for chain in chains for params in chain.retained_params()]
    if not draws:
        raise HawkesError("chains hold no draws after burn-in")

    logger.info("Step 1: Computing posterior excitation probabilities...")
    posterior = posterior_excitation(
        events, draws, backend, thin_to=thin_to, per_draw_path=per_draw, memory_cap=memory_cap
    )
    write_excitation_table(args.output, events, posterior)

    if args.curve:
        logger.info("Step 2: Smoothing posterior means over time...")
        curve = smooth_probabilities_over_time(events, posterior.mean_pi, bandwidth, grid_size)
        write_curve(args.curve, curve)

    logger.success(f"Mean posterior excitation probability {posterior.mean_pi.mean():.4f}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    window = SimWindow(xmin=0.0, xmax=args.width, ymin=0.0, ymax=args.height, t_end=args.duration)

    if args.mode == "cloud":
        events = generate_benchmark_cloud(args.n, window, rng)
    else:
        params = Params(
            mu0=args.mu0, tau_x=args.tau_x, tau_t=args.tau_t,
            theta=args.theta, omega=args.omega, h=args.h,
        )
        events = simulate_cluster_process(params, window, args.background_rate, rng).events

    write_events(events, args.output)
    logger.success(f"Simulated {len(events)} events into {args.output}")
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _load_config(args)
    base = resolve_backend(args, config)
    threads = base.thread_count if base.thread_count > 1 else (os.cpu_count() or 1)
    cap = thread_cap()
    if cap is not None:
        threads = min(threads, cap)
    backends = [parse_backend(kind, threads, base.lane_width) for kind in args.backends]

    rows = run_benchmark(
        args.sizes, backends, args.repeats, args.warmups, seed=args.seed if args.seed is not None else 0
    )
    if args.output:
        write_table(args.output, ["size", "backend", "seconds", "min_seconds", "speedup"], rows)
    sys.stdout.write(render_bench(rows, hardware_descriptor()))
    return EXIT_OK


def cmd_summarize(args) -> int:
    chains = _read_chain_files(args.chain_files)
    summary = summarize_chains(chains, args.mass)
    if args.output:
        write_summary_table(args.output, summary)
    sys.stdout.write(render_summary(summary, chains))
    return EXIT_OK


def cmd_validate(args) -> int:
    config = _load_config(args)
    base = resolve_backend(args, config)
    threads = base.thread_count if base.thread_count > 1 else min(4, os.cpu_count() or 1)
    cap = thread_cap()
    if cap is not None:
        threads = min(threads, cap)
    backends = [parse_backend(kind, threads, base.lane_width) for kind in BACKEND_CHOICES]

    report = run_validation(
        backends,
        oracle_sizes=args.sizes,
        oracle_instances=args.instances,
        backend_events=args.backend_events,
        seed=args.seed if args.seed is not None else 0,
    )
    sys.stdout.write(render_validation(report.checks, report.passed))
    return EXIT_OK if report.passed else EXIT_FAILURE


COMMANDS = {
    "fit": cmd_fit,
    "probs": cmd_probs,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
    "summarize": cmd_summarize,
    "validate": cmd_validate,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as e:
        logger.error(f"File not found: {e.filename or e}")
        return EXIT_MISSING_FILE
    except (HawkesError, ValidationError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILURE


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
