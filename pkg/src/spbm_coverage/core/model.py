"""Closed-form constants, radius schedules and Poisson sampling.

The constants here are the ones of the coverage limit theorem and of the
mean witness limit; `constant_c0` is computed from its own closed form so the
identity c_0 alpha^(1-d) / (k-1)! = c_{d,k,Y} can be checked without
circularity.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special, stats

from .laws import ModelConfigError, RadiusLaw
from .streams import RngStream, as_generator
from .types import Box, MarkedPointSet, ScalingSchedule

logger = logging.getLogger(__name__)


def theta(d: int) -> float:
    """Volume of the d-dimensional unit ball, pi^(d/2) / Gamma(1 + d/2)."""
    if d < 1:
        raise ModelConfigError(f"dimension must be positive, got {d}")
    return float(math.pi ** (d / 2) / special.gamma(1 + d / 2))


def alpha(d: int, law: RadiusLaw) -> float:
    """Mean ball volume per unit radius scale, theta_d E[Y^d]."""
    return theta(d) * law.moment(d)


def clamped_loglog(t: float) -> float:
    """log log t, clamped to 0 for t <= e."""
    if t <= math.e:
        return 0.0
    return math.log(math.log(t))


def schedule_rhs(t: float, sched: ScalingSchedule) -> float:
    """Right-hand side of alpha t r_t^d = (...) before the clamp at zero."""
    if t <= 1:
        raise ModelConfigError(f"schedules are defined for t > 1, got {t}")
    log_t = math.log(t)
    loglog = clamped_loglog(t)
    shift = sched.d + sched.k - 2
    rhs = log_t + shift * loglog + sched.beta
    if sched.variant == "corrected":
        rhs += shift**2 * loglog / log_t
    return rhs


def scaling_radius(t: float, sched: ScalingSchedule, law: RadiusLaw) -> float:
    """Radius scale r_t solving alpha t r_t^d = RHS v 0."""
    rhs = max(schedule_rhs(t, sched), 0.0)
    return (rhs / (alpha(sched.d, law) * t)) ** (1.0 / sched.d)


def hall_janson_radius(t: float, sched: ScalingSchedule, law: RadiusLaw) -> float:
    """r_t of the classical schedule, whatever variant `sched` names."""
    return scaling_radius(t, sched.model_copy(update={"variant": "hall_janson"}), law)


def moment_conditions(law: RadiusLaw, d: int) -> dict[str, bool]:
    """Whether the moment hypotheses of the rate bound hold for `law`."""
    return law.moment_conditions(d)


def constant_cdkY(d: int, k: int, law: RadiusLaw) -> float:
    """Limit constant c_{d,k,Y} of the coverage theorem."""
    if d < 2 or k < 1:
        raise ModelConfigError(f"need d >= 2 and k >= 1, got d={d}, k={k}")
    ratio = math.sqrt(math.pi) * special.gamma(1 + d / 2) / special.gamma((d + 1) / 2)
    moments = law.moment(d - 1) ** d / law.moment(d) ** (d - 1)
    return float(
        ratio ** (d - 1) * moments / (math.factorial(d) * math.factorial(k - 1))
    )


def limit_probability(sched: ScalingSchedule, law: RadiusLaw, area: float) -> float:
    """Limiting coverage probability exp(-c_{d,k,Y} |A| e^-beta)."""
    c = constant_cdkY(sched.d, sched.k, law)
    return math.exp(-c * area * math.exp(-sched.beta))


def _g_prefactor(d: int) -> float:
    return float(
        math.pi ** ((d * d - 1) / 2)
        / (math.factorial(d) * special.gamma((1 + d) / 2) ** (d - 1))
    )


def closed_form_G(d: int, radii: ArrayLike) -> float | NDArray[np.float64]:
    """G(s_1, ..., s_d) = pi^((d^2-1)/2) / (d! Gamma((1+d)/2)^(d-1)) prod s_i^(d-1).

    `radii` may carry leading batch axes; the last axis must have length d.
    """
    s = np.asarray(radii, dtype=float)
    if s.shape[-1] != d:
        raise ModelConfigError(f"expected {d} radii, got shape {s.shape}")
    value = _g_prefactor(d) * np.prod(s ** (d - 1), axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def constant_c0(d: int, law: RadiusLaw) -> float:
    """c_0 = E[G(Y_1, ..., Y_d)] for independent marks."""
    return _g_prefactor(d) * law.moment(d - 1) ** d


def truncation_exponent(d: int, law: RadiusLaw) -> float:
    """Default zeta: half of E[min(Y, 1/2)^d] / (8 d E[Y^d])."""
    return 0.5 * law.clipped_moment(d, 0.5) / (8 * d * law.moment(d))


def truncation_level(t: float, zeta: float) -> float:
    return t**zeta


def vacancy_probability(t: float, r: float, law: RadiusLaw, k: int, d: int) -> float:
    """P[x in V_k(xi_t, r)], i.e. fewer than k balls cover a fixed point."""
    mean_cover = alpha(d, law) * t * r**d
    return float(stats.poisson.cdf(k - 1, mean_cover))


def predicted_mean_witnesses(
    t: float, sched: ScalingSchedule, law: RadiusLaw, volume: float
) -> tuple[float, float]:
    """Finite-t and limiting mean of the witness count F_t(D).

    Returns:
        (finite_t, limit) where finite_t evaluates
        t^d e^(-a) a^(k-1) r^(d(d-1)) |D| c_0 / (k-1)!  with a = alpha t r_t^d,
        and limit = c_{d,k,Y} |D| e^(-beta).

    """
    d, k = sched.d, sched.k
    limit = constant_cdkY(d, k, law) * volume * math.exp(-sched.beta)
    r = scaling_radius(t, sched, law)
    if r == 0.0:
        return 0.0, limit
    a = alpha(d, law) * t * r**d
    log_value = (
        d * math.log(t)
        - a
        + (k - 1) * math.log(a)
        + d * (d - 1) * math.log(r)
        + math.log(volume * constant_c0(d, law))
        - math.lgamma(k)
    )
    return math.exp(log_value), limit


def threshold_statistic(
    threshold: float, t: float, sched: ScalingSchedule, law: RadiusLaw, volume: float
) -> float:
    """alpha t R^d - log t - (d+k-2) loglog t - log(c_{d,k,Y} |A|).

    Converges in law to a standard Gumbel variable.
    """
    d, k = sched.d, sched.k
    if math.isinf(threshold):
        return math.inf
    return (
        alpha(d, law) * t * threshold**d
        - math.log(t)
        - (d + k - 2) * clamped_loglog(t)
        - math.log(constant_cdkY(d, k, law) * volume)
    )


def sample_process(
    window: Box,
    t: float,
    law: RadiusLaw,
    r: float,
    rng: RngStream | np.random.Generator,
    truncate_at: float | None = None,
) -> MarkedPointSet:
    """Sample the marked Poisson process around `window`.

    Centres are drawn on the window grown by r * (largest reachable mark), so
    no ball centred outside the sampled region can reach the window and
    coverage of the window matches the infinite process exactly.

    Args:
        window: The region of interest A.
        t: Intensity.
        law: Mark distribution.
        r: Radius scale that fixes the margin (use the largest scale the
            caller will evaluate).
        rng: Stream address or generator.
        truncate_at: When set, points with mark above this level are dropped.

    Raises:
        ModelConfigError: If t or r is negative, or the margin is undefined.

    """
    if t < 0 or r < 0:
        raise ModelConfigError(f"t and r must be non-negative (t={t}, r={r})")
    reach = law.upper_bound if truncate_at is None else min(law.upper_bound, truncate_at)
    if not math.isfinite(reach):
        raise ModelConfigError("unbounded law without truncation: margin undefined")
    margin = r * reach
    sampled = window.expand(margin)
    gen = as_generator(rng)

    n = int(gen.poisson(t * sampled.volume)) if t > 0 else 0
    lo, hi = sampled.lo_array, sampled.hi_array
    centers = lo + (hi - lo) * gen.random((n, window.dim))
    marks = law.sample(gen, n)

    points = MarkedPointSet(centers=centers, marks=marks, window=window, margin=margin)
    logger.debug(f"Sampled {n} points (t={t:g}, margin={margin:.4g})")
    if truncate_at is not None:
        return points.restrict_marks(truncate_at)
    return points
