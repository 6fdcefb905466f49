"""
Scalar building blocks of the spatiotemporal Hawkes intensity.

The intensity at event n is

    lambda_n = mu0 * sum_m background(n, m) + sum_m trigger(n, m)

with an isotropic Gaussian kernel-density background over all events
(the m = n self-term included) and a trigger that is exponential in time
and Gaussian in space.  The trigger carries theta * omega * exp(-omega dt),
a unit-mass exponential density scaled by theta, so each event contributes
exactly theta expected offspring and the closed-form compensator below is
the true integral of the intensity.

The numba functions take plain floats and arrays so backends can inline
them into their pair loops; the Python wrappers take the pydantic types.
Parameter arrays are ordered (mu0, tau_x, tau_t, theta, omega, h).
"""
import math

import numpy as np
from numba import njit

from src.Hawkes.utils.errors import InvalidWindowError
from src.Hawkes.utils.pydantic_schemas import Event, Params

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
INV_2PI = 1.0 / (2.0 * math.pi)
INV_2PI_POW_1_5 = INV_2PI * INV_SQRT_2PI
SQRT1_2 = math.sqrt(0.5)


# ======================================================================
# COMPILED KERNELS
# ======================================================================
@njit(nogil=True, cache=True)
def gaussian_density(z):
    return INV_SQRT_2PI * math.exp(-0.5 * z * z)


@njit(nogil=True, cache=True)
def normal_cdf_core(z):
    return 0.5 * math.erfc(-z * SQRT1_2)


@njit(nogil=True, cache=True)
def background_rate_core(dx, dy, dt, tau_x, tau_t):
    # phi(dx/tau_x) phi(dy/tau_x) phi(dt/tau_t) / (tau_x^2 tau_t), one exp
    inv_tx2 = 1.0 / (tau_x * tau_x)
    inv_tt = 1.0 / tau_t
    q = (dx * dx + dy * dy) * inv_tx2 + dt * dt * inv_tt * inv_tt
    return INV_2PI_POW_1_5 * inv_tx2 * inv_tt * math.exp(-0.5 * q)


@njit(nogil=True, cache=True)
def trigger_rate_core(dx, dy, dt, theta, omega, h):
    # strict causality: simultaneous events never excite each other
    causal = dt > 0.0
    lag = max(dt, 0.0)
    inv_h2 = 1.0 / (h * h)
    return causal * (theta * omega * INV_2PI * inv_h2) * math.exp(-omega * lag - 0.5 * (dx * dx + dy * dy) * inv_h2)


@njit(nogil=True, cache=True)
def compensator_core(t_n, window_end, mu0, tau_t, theta, omega):
    background = mu0 * (normal_cdf_core((window_end - t_n) / tau_t) - normal_cdf_core(-t_n / tau_t))
    return background - theta * math.expm1(-omega * (window_end - t_n))


@njit(nogil=True, cache=True)
def pair_coefficients(p):
    """
    Per-evaluation constants of the pair rates:
    (background scale, trigger scale, 1/tau_x^2, 1/tau_t, 1/h^2, omega).
    """
    c = np.empty(6)
    c[2] = 1.0 / (p[1] * p[1])
    c[3] = 1.0 / p[2]
    c[4] = 1.0 / (p[5] * p[5])
    c[5] = p[4]
    c[0] = INV_2PI_POW_1_5 * c[2] * c[3]
    c[1] = p[3] * p[4] * INV_2PI * c[4]
    return c


@njit(nogil=True, cache=True)
def pair_exponents(dx, dy, dt, c):
    """
    Exponent arguments of one (target, source) pair and its causal weight.

    background = c[0] * exp(arg0), trigger = c[1] * exp(arg1) * weight.
    No branches; arg1 stays <= 0 for non-causal pairs, so the masked exp
    is finite.
    """
    r2 = dx * dx + dy * dy
    q = r2 * c[2] + dt * dt * c[3] * c[3]
    weight = 1.0 if dt > 0.0 else 0.0
    lag = dt if dt > 0.0 else 0.0
    return -0.5 * q, -c[5] * lag - 0.5 * r2 * c[4], weight


# ======================================================================
# PYTHON API
# ======================================================================
def gaussian_kernel_1d(z: float) -> float:
    """Standard normal density."""
    return float(gaussian_density(float(z)))


def normal_cdf(z: float) -> float:
    """Standard normal CDF."""
    return float(normal_cdf_core(float(z)))


def background_pair_rate(target: Event, source: Event, params: Params) -> float:
    """One summand of the background smoother; the caller applies mu0 to the total."""
    return float(
        background_rate_core(
            target.x - source.x,
            target.y - source.y,
            target.t - source.t,
            params.tau_x,
            params.tau_t,
        )
    )


def trigger_pair_rate(target: Event, source: Event, params: Params) -> float:
    return float(
        trigger_rate_core(
            target.x - source.x,
            target.y - source.y,
            target.t - source.t,
            params.theta,
            params.omega,
            params.h,
        )
    )


def compensator_term(event: Event, window_end: float, params: Params) -> float:
    """Integral of event's background and trigger mass over [0, window_end]."""
    if window_end < event.t:
        raise InvalidWindowError(f"window_end {window_end} precedes event time {event.t}")
    return float(
        compensator_core(event.t, window_end, params.mu0, params.tau_t, params.theta, params.omega)
    )
