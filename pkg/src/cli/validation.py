"""
Self-checks behind `sthawkes validate`: the compiled engine against plain
double-loop oracles, every backend against serial, the closed-form
compensator against quadrature and the trigger's total mass against theta.
"""
import math
from typing import Callable, List, Optional, Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel
from scipy import integrate

from src.Hawkes.compute.excitation import excitation_probabilities
from src.Hawkes.compute.likelihood import log_likelihood
from src.Hawkes.core.kernels import compensator_term, trigger_rate_core
from src.Hawkes.utils.pydantic_schemas import Backend, EventSet, Params

ORACLE_TOLERANCE = 1e-10
BACKEND_TOLERANCE = 1e-10
QUADRATURE_TOLERANCE = 1e-6
# pairs of values both below this are equal for reporting; subnormals carry no relative precision
NEGLIGIBLE = 1e-290
DEFAULT_ORACLE_SIZES = (2, 3, 10, 100, 1000)


class CheckResult(BaseModel):
    name: str
    passed: bool
    worst_error: float
    tolerance: float
    detail: str = ""


class ValidationReport(BaseModel):
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)


def relative_error(value: float, reference: float) -> float:
    if value == reference:
        return 0.0
    if math.isnan(value) or math.isnan(reference):
        return math.inf
    scale = max(abs(value), abs(reference))
    if scale < NEGLIGIBLE:
        return 0.0
    return abs(value - reference) / scale


# ======================================================================
# ORACLES
# ======================================================================
def oracle_rates(events: EventSet, params: Params):
    """(mu_n, xi_n) by direct double loop."""
    mu0, tx, tt, th, om, h = params.as_array()
    x, y, t = events.x.tolist(), events.y.tolist(), events.t.tolist()
    mus, xis = [], []
    for n in range(len(t)):
        background = 0.0
        trigger = 0.0
        for m in range(len(t)):
            dx, dy, dt = x[n] - x[m], y[n] - y[m], t[n] - t[m]
            background += (
                math.exp(-0.5 * (dx / tx) ** 2) / (math.sqrt(2 * math.pi) * tx)
                * math.exp(-0.5 * (dy / tx) ** 2) / (math.sqrt(2 * math.pi) * tx)
                * math.exp(-0.5 * (dt / tt) ** 2) / (math.sqrt(2 * math.pi) * tt)
            )
            if dt > 0:
                trigger += th * om * math.exp(-om * dt) * math.exp(-(dx * dx + dy * dy) / (2 * h * h)) / (2 * math.pi * h * h)
        mus.append(mu0 * background)
        xis.append(trigger)
    return mus, xis


def oracle_log_likelihood(events: EventSet, params: Params) -> float:
    mu0, _, tt, th, om, _ = params.as_array()
    T = events.window_end
    mus, xis = oracle_rates(events, params)
    total = 0.0
    for n, t_n in enumerate(events.t.tolist()):
        phi = lambda z: 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))
        compensator = mu0 * (phi((T - t_n) / tt) - phi(-t_n / tt)) + th * (1.0 - math.exp(-om * (T - t_n)))
        total += math.log(mus[n] + xis[n]) - compensator
    return total


def oracle_excitation(events: EventSet, params: Params) -> List[float]:
    mus, xis = oracle_rates(events, params)
    return [0.0 if xi == 0.0 else xi / (mu + xi) for mu, xi in zip(mus, xis)]


def random_instance(n_events: int, rng: np.random.Generator):
    t = np.sort(rng.uniform(0.0, 30.0, n_events))
    events = EventSet(
        x=rng.uniform(0.0, 5.0, n_events),
        y=rng.uniform(0.0, 5.0, n_events),
        t=t,
        window_end=float(t[-1]) + rng.uniform(0.0, 5.0),
    )
    params = Params(
        mu0=rng.uniform(0.1, 2.0),
        tau_x=rng.uniform(0.5, 2.0),
        tau_t=rng.uniform(1.0, 20.0),
        theta=rng.uniform(0.0, 0.9),
        omega=rng.uniform(0.1, 5.0),
        h=rng.uniform(0.05, 1.0),
    )
    return events, params


# ======================================================================
# CHECKS
# ======================================================================
def check_oracle(
    likelihood_fn: Callable,
    excitation_fn: Callable,
    backend: Backend,
    sizes: Sequence[int],
    instances: int,
    rng: np.random.Generator,
) -> List[CheckResult]:
    worst_lik = 0.0
    worst_pi = 0.0
    for i in range(instances):
        events, params = random_instance(sizes[i % len(sizes)], rng)
        worst_lik = max(
            worst_lik,
            relative_error(likelihood_fn(events, params, backend).log_lik, oracle_log_likelihood(events, params)),
        )
        pis = excitation_fn(events, params, backend).pi
        for value, reference in zip(pis.tolist(), oracle_excitation(events, params)):
            worst_pi = max(worst_pi, relative_error(value, reference))

    detail = f"{instances} instances, N in {list(sizes)}"
    return [
        CheckResult(name="likelihood vs oracle", passed=worst_lik <= ORACLE_TOLERANCE, worst_error=worst_lik, tolerance=ORACLE_TOLERANCE, detail=detail),
        CheckResult(name="excitation vs oracle", passed=worst_pi <= ORACLE_TOLERANCE, worst_error=worst_pi, tolerance=ORACLE_TOLERANCE, detail=detail),
    ]


def check_backends(
    likelihood_fn: Callable,
    backends: Sequence[Backend],
    n_events: int,
    rng: np.random.Generator,
) -> CheckResult:
    events, params = random_instance(n_events, rng)
    reference = likelihood_fn(events, params, Backend()).log_lik
    worst = 0.0
    labels = []
    for backend in backends:
        worst = max(worst, relative_error(likelihood_fn(events, params, backend).log_lik, reference))
        labels.append(backend.label)
    return CheckResult(
        name="backend agreement",
        passed=worst <= BACKEND_TOLERANCE,
        worst_error=worst,
        tolerance=BACKEND_TOLERANCE,
        detail=f"N={n_events}, {', '.join(labels)}",
    )


def check_compensator(instances: int, rng: np.random.Generator) -> CheckResult:
    """
    Sum of closed-form terms against quadrature over [0, T] of the spatially
    integrated intensity (both spatial kernels integrate to 1).
    """
    worst = 0.0
    for _ in range(instances):
        events, params = random_instance(5, rng)
        mu0, _, tt, th, om, _ = params.as_array()
        times = events.t.tolist()
        T = events.window_end

        def rate(s):
            value = 0.0
            for t_m in times:
                value += mu0 * math.exp(-0.5 * ((s - t_m) / tt) ** 2) / (math.sqrt(2 * math.pi) * tt)
                if s > t_m:
                    value += th * om * math.exp(-om * (s - t_m))
            return value

        numeric, _ = integrate.quad(rate, 0.0, T, points=times, limit=500, epsabs=0.0, epsrel=1e-12)
        closed = sum(compensator_term(events[n], T, params) for n in range(len(events)))
        worst = max(worst, relative_error(closed, numeric))
    return CheckResult(
        name="compensator vs quadrature",
        passed=worst <= QUADRATURE_TOLERANCE,
        worst_error=worst,
        tolerance=QUADRATURE_TOLERANCE,
        detail=f"{instances} instances, N=5",
    )


def check_trigger_mass(rng: np.random.Generator) -> CheckResult:
    """Integrate the trigger over the plane and (0, inf); the mass must equal theta."""
    theta = rng.uniform(0.05, 0.9)
    omega = rng.uniform(0.5, 3.0)
    h = rng.uniform(0.1, 1.0)
    reach = 12.0 * h

    def spatial_mass(dt):
        value, _ = integrate.dblquad(
            lambda dy, dx: trigger_rate_core(dx, dy, dt, theta, omega, h),
            -reach, reach, -reach, reach,
            epsabs=0.0, epsrel=1e-10,
        )
        return value

    mass, _ = integrate.quad(spatial_mass, 0.0, math.inf, epsabs=0.0, epsrel=1e-9)
    error = relative_error(mass, theta)
    return CheckResult(
        name="trigger mass equals theta",
        passed=error <= QUADRATURE_TOLERANCE,
        worst_error=error,
        tolerance=QUADRATURE_TOLERANCE,
        detail=f"theta={theta:.4f} omega={omega:.4f} h={h:.4f}",
    )


def run_validation(
    backends: Sequence[Backend],
    likelihood_fn: Callable = log_likelihood,
    excitation_fn: Callable = excitation_probabilities,
    oracle_sizes: Sequence[int] = DEFAULT_ORACLE_SIZES,
    oracle_instances: int = 50,
    backend_events: int = 2000,
    seed: int = 0,
) -> ValidationReport:
    """
    ``likelihood_fn`` and ``excitation_fn`` are injectable so a deliberately
    broken engine can be shown to fail.
    """
    rng = np.random.default_rng(seed)
    checks = []

    logger.info("Step 1: Comparing the engine with double-loop oracles...")
    checks.extend(check_oracle(likelihood_fn, excitation_fn, Backend(), oracle_sizes, oracle_instances, rng))

    logger.info("Step 2: Comparing backends with serial...")
    checks.append(check_backends(likelihood_fn, backends, backend_events, rng))

    logger.info("Step 3: Integrating the intensity numerically...")
    checks.append(check_compensator(5, rng))

    logger.info("Step 4: Integrating the trigger kernel...")
    checks.append(check_trigger_mass(rng))

    report = ValidationReport(checks=checks)
    for check in checks:
        if not check.passed:
            logger.error(f"{check.name}: error {check.worst_error:.3e} above {check.tolerance:.0e}")
    if report.passed:
        logger.success("All validation checks passed")
    return report
