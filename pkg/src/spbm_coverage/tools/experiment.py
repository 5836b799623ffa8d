"""Monte Carlo drivers for the coverage limit, its Gumbel form and the rate.

Each replication draws its process from its own stream
(master_seed, replication, (t_index,)), so a study's output depends only on
its configuration, never on the worker count. Resamples after an unreliable
verdict use child streams of that address.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Literal

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from ..config import LabSettings
from ..core.coverage import (
    UncoverableError,
    boundary_volume,
    count_witnesses,
    coverage_threshold,
    is_covered,
)
from ..core.model import (
    alpha,
    constant_cdkY,
    hall_janson_radius,
    limit_probability,
    sample_process,
    scaling_radius,
    threshold_statistic,
    truncation_exponent,
    truncation_level,
)
from ..core.streams import RngStream
from ..core.types import (
    CoverageVerdict,
    ExperimentConfig,
    ExperimentReport,
    GeomTolerance,
    MarkedPointSet,
    RateFit,
    ReportRow,
    ThresholdSample,
    VacancyWitness,
)

logger = logging.getLogger(__name__)

Mode = Literal["coverage", "witness", "threshold"]


class ExperimentError(Exception):
    """Raised when a study cannot run with the given configuration."""

    pass


@dataclass(frozen=True)
class ReplicationSettings:
    """Numerical knobs shared by every replication of a study."""

    eps_geo: float = 1e-9
    bisection_tol: float = 1e-9
    max_resamples: int = 10
    degeneracy_budget: float = 0.01

    @classmethod
    def from_settings(cls, settings: LabSettings) -> ReplicationSettings:
        return cls(
            eps_geo=settings.eps_geo,
            bisection_tol=settings.bisection_tol,
            max_resamples=settings.max_resamples,
            degeneracy_budget=settings.degeneracy_budget,
        )

    @property
    def tolerance(self) -> GeomTolerance:
        return GeomTolerance(eps_geo=self.eps_geo)


@dataclass(frozen=True)
class ReplicationOutcome:
    covered: bool | None = None
    witnesses: int | None = None
    threshold: float | None = None
    resamples: int = 0
    exhausted: bool = False
    beyond_bracket: bool = False


def frame_radius(cfg: ExperimentConfig, t: float, mode: Mode) -> float:
    """Radius scale that fixes the sampling margin at intensity t.

    The largest r_t of both schedule variants, so studies of either variant
    see the same realisation of the process for a given stream.
    """
    r = max(
        scaling_radius(t, cfg.schedule, cfg.law),
        hall_janson_radius(t, cfg.schedule, cfg.law),
    )
    if r == 0.0:
        d = cfg.schedule.d
        r = (max(math.log(t), 1.0) / (alpha(d, cfg.law) * t)) ** (1.0 / d)
    if mode == "threshold":
        r *= cfg.bracket_factor
    return r


def _sample(
    cfg: ExperimentConfig, t_index: int, replication: int, attempt: int, mode: Mode
) -> MarkedPointSet:
    t = cfg.t_values[t_index]
    stream = RngStream(
        master_seed=cfg.master_seed, stream_index=replication, lineage=(t_index,)
    )
    if attempt:
        stream = stream.child(attempt)
    return sample_process(cfg.region, t, cfg.law, frame_radius(cfg, t, mode), stream)


def _truncation(cfg: ExperimentConfig, t: float) -> float:
    zeta = cfg.zeta if cfg.zeta is not None else truncation_exponent(cfg.schedule.d, cfg.law)
    return truncation_level(t, zeta)


def _interior_count(verdict: CoverageVerdict) -> int:
    return sum(1 for w in verdict.witnesses if w.kind == "interior_local_min")


def _replicate(
    cfg: ExperimentConfig,
    t_index: int,
    replication: int,
    mode: Mode,
    settings: ReplicationSettings,
) -> ReplicationOutcome:
    """Run one replication, resampling while the coverage verdict is unreliable.

    When the truncation level keeps every mark, the witness count is read off
    the full coverage verdict instead of a second pass over the tuples.
    """
    t = cfg.t_values[t_index]
    k = cfg.schedule.k
    A = cfg.region
    tol = settings.tolerance
    r_t = scaling_radius(t, cfg.schedule, cfg.law)
    wants_witnesses = mode == "witness" or (mode == "coverage" and cfg.track_witnesses)
    level = _truncation(cfg, t)

    for attempt in range(settings.max_resamples + 1):
        process = _sample(cfg, t_index, replication, attempt, mode)
        if r_t <= 0:
            if mode == "witness":
                return ReplicationOutcome(witnesses=0, resamples=attempt)
            covered = False
            witnesses = 0 if wants_witnesses else None
        else:
            shared = wants_witnesses and mode != "witness" and process.max_mark <= level
            witnesses = None
            if wants_witnesses and not shared:
                witnesses = count_witnesses(
                    process.restrict_marks(level), r_t, A, k, tol
                ).count
            if mode == "witness":
                return ReplicationOutcome(witnesses=witnesses, resamples=attempt)

            verdict = is_covered(
                process, r_t, A, k, tol, witness_limit=None if shared else 1
            )
            if not verdict.reliable:
                logger.debug(
                    f"t={t:g} rep={replication}: unreliable verdict, resampling"
                )
                continue
            covered = verdict.covered
            if shared:
                witnesses = _interior_count(verdict)

        threshold = None
        beyond = False
        if mode == "threshold":
            r_max = cfg.bracket_factor * r_t if r_t > 0 else None
            try:
                threshold = coverage_threshold(
                    process, A, k, settings.bisection_tol, tol, r_max=r_max
                )
            except UncoverableError:
                threshold = math.inf
            beyond = r_max is not None and threshold > r_max
        return ReplicationOutcome(
            covered=covered,
            witnesses=witnesses,
            threshold=threshold,
            resamples=attempt,
            beyond_bracket=beyond,
        )

    logger.warning(
        f"t={t:g} rep={replication}: resamples exhausted, counted as not covered"
    )
    return ReplicationOutcome(
        covered=False, resamples=settings.max_resamples + 1, exhausted=True
    )


def _run_replications(
    cfg: ExperimentConfig, t_index: int, mode: Mode, settings: ReplicationSettings
) -> list[ReplicationOutcome]:
    return Parallel(n_jobs=cfg.workers)(
        delayed(_replicate)(cfg, t_index, rep, mode, settings)
        for rep in range(cfg.replications)
    )


def _mean_and_error(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        return float(arr.mean()), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def _build_row(
    cfg: ExperimentConfig,
    t: float,
    outcomes: list[ReplicationOutcome],
    elapsed: float,
) -> ReportRow:
    sched, law, A = cfg.schedule, cfg.law, cfg.region
    M = len(outcomes)
    limit = limit_probability(sched, law, A.volume)
    row = ReportRow(
        t=t,
        r_t=scaling_radius(t, sched, law),
        limit_prob=limit,
        predicted_mean_F=constant_cdkY(sched.d, sched.k, law)
        * A.volume
        * math.exp(-sched.beta),
        wall_time_s=elapsed if cfg.record_timings else None,
        degenerate_resamples=sum(o.resamples for o in outcomes),
    )
    covered = [o.covered for o in outcomes if o.covered is not None]
    if covered:
        p_hat = sum(covered) / M
        row.p_hat = p_hat
        row.std_err = math.sqrt(p_hat * (1 - p_hat) / M)
        row.abs_error = abs(p_hat - limit)
    counts = [float(o.witnesses) for o in outcomes if o.witnesses is not None]
    if counts:
        row.mean_F, row.F_std_err = _mean_and_error(counts)
    return row


def _budget_warnings(
    cfg: ExperimentConfig,
    t: float,
    outcomes: list[ReplicationOutcome],
    settings: ReplicationSettings,
) -> list[str]:
    warnings = []
    resamples = sum(o.resamples for o in outcomes)
    if resamples > settings.degeneracy_budget * len(outcomes):
        warnings.append(
            f"t={t:g}: {resamples} degenerate resamples over {len(outcomes)} "
            f"replications exceed the {settings.degeneracy_budget:.2%} budget"
        )
    exhausted = sum(o.exhausted for o in outcomes)
    if exhausted:
        warnings.append(f"t={t:g}: {exhausted} replications exhausted their resamples")
    beyond = sum(o.beyond_bracket for o in outcomes)
    if beyond:
        warnings.append(
            f"t={t:g}: {beyond} thresholds exceed the sampled bracket "
            f"{cfg.bracket_factor:g} * r_t; balls outside the sampling margin were not drawn"
        )
    for w in warnings:
        logger.warning(w)
    return warnings


def _study(
    cfg: ExperimentConfig, mode: Mode, settings: ReplicationSettings | None
) -> tuple[ExperimentReport, list[list[ReplicationOutcome]]]:
    settings = settings or ReplicationSettings()
    report = ExperimentReport(config=cfg)
    per_t = []
    for t_index, t in enumerate(cfg.t_values):
        logger.info(f"{mode} study: t={t:g}, {cfg.replications} replications")
        start = time.perf_counter()
        outcomes = _run_replications(cfg, t_index, mode, settings)
        elapsed = time.perf_counter() - start
        report.rows.append(_build_row(cfg, t, outcomes, elapsed))
        report.warnings.extend(_budget_warnings(cfg, t, outcomes, settings))
        per_t.append(outcomes)
    return report, per_t


def estimate_coverage_probability(
    cfg: ExperimentConfig, settings: ReplicationSettings | None = None
) -> ExperimentReport:
    """Estimate P[A is k-covered at r_t] for every t and compare with the limit."""
    report, _ = _study(cfg, "coverage", settings)
    return report


def gumbel_ks_statistic(samples: list[float]) -> float:
    """Kolmogorov-Smirnov distance of the samples to the standard Gumbel law."""
    return float(stats.kstest(np.asarray(samples, dtype=float), stats.gumbel_r.cdf).statistic)


def threshold_statistic_sample(
    cfg: ExperimentConfig, settings: ReplicationSettings | None = None
) -> ExperimentReport:
    """Normalised coverage thresholds per replication and their KS distance to Gumbel."""
    report, per_t = _study(cfg, "threshold", settings)
    volume = cfg.region.volume
    for row, outcomes in zip(report.rows, per_t):
        samples = [
            threshold_statistic(o.threshold, row.t, cfg.schedule, cfg.law, volume)
            for o in outcomes
            if o.threshold is not None
        ]
        if not samples:
            continue
        ks = gumbel_ks_statistic(samples)
        row.ks_stat = ks
        report.threshold_samples.append(ThresholdSample(t=row.t, samples=samples, ks_stat=ks))
    if cfg.replications < 100:
        report.warnings.append(
            f"{cfg.replications} replications give a coarse KS statistic (100+ advised)"
        )
    return report


def mean_witness_study(
    cfg: ExperimentConfig, settings: ReplicationSettings | None = None
) -> ExperimentReport:
    """Mean witness count F(A) over the truncated process against its limit."""
    report, _ = _study(cfg, "witness", settings)
    return report


def fit_rate(
    t_values: list[float], abs_errors: list[float], std_errs: list[float]
) -> RateFit:
    """Regress log(abs_error + floor) on log(1 / log t), floor = 3 * std_err.

    The slope is indeterminate when every error sits at or below its floor.
    """
    t = np.asarray(t_values, dtype=float)
    err = np.asarray(abs_errors, dtype=float)
    floors = 3 * np.asarray(std_errs, dtype=float)
    fit = RateFit(
        indeterminate=bool(np.all(err <= floors)),
        errors=err.tolist(),
        floors=floors.tolist(),
    )
    if fit.indeterminate or t.size < 2:
        return fit

    y = np.log(np.maximum(err + floors, np.finfo(float).tiny))
    log_t = np.log(t)
    main = stats.linregress(np.log(1 / log_t), y)
    fit.slope = float(main.slope)
    fit.intercept = float(main.intercept)
    loglog = np.log(log_t, where=log_t > 1, out=np.zeros_like(log_t))
    if np.all(loglog > 0):
        fit.slope_loglog = float(stats.linregress(np.log(loglog / log_t), y).slope)
    return fit


def rate_study(
    cfg: ExperimentConfig, settings: ReplicationSettings | None = None
) -> ExperimentReport:
    """Coverage error against t, with the fitted decay exponent.

    Raises:
        ExperimentError: With fewer than 4 intensities or a range under 2 decades.

    """
    if len(cfg.t_values) < 4:
        raise ExperimentError("rate study needs at least 4 intensities")
    if cfg.t_values[-1] < 100 * cfg.t_values[0]:
        raise ExperimentError("rate study intensities must span at least 2 decades")
    report, _ = _study(cfg, "coverage", settings)
    fit = fit_rate(
        [row.t for row in report.rows],
        [row.abs_error or 0.0 for row in report.rows],
        [row.std_err or 0.0 for row in report.rows],
    )
    fit.boundary_terms = [boundary_volume(cfg.region, row.r_t) for row in report.rows]
    report.rate_fit = fit
    if fit.indeterminate:
        report.warnings.append("every error lies below its noise floor: slope indeterminate")
    return report


def replication_witnesses(
    cfg: ExperimentConfig,
    t_index: int = 0,
    replication: int = 0,
    settings: ReplicationSettings | None = None,
) -> list[VacancyWitness]:
    """Every witness of the exact checker on one replication's first draw."""
    settings = settings or ReplicationSettings()
    t = cfg.t_values[t_index]
    r_t = scaling_radius(t, cfg.schedule, cfg.law)
    if r_t == 0.0:
        return []
    process = _sample(cfg, t_index, replication, 0, "coverage")
    return is_covered(process, r_t, cfg.region, cfg.schedule.k, settings.tolerance).witnesses


def run_experiment(
    cfg: ExperimentConfig, settings: ReplicationSettings | None = None
) -> ExperimentReport:
    """Dispatch to the driver named by `cfg.study`."""
    drivers = {
        "coverage": estimate_coverage_probability,
        "threshold": threshold_statistic_sample,
        "witness": mean_witness_study,
        "rate": rate_study,
    }
    try:
        return drivers[cfg.study](cfg, settings)
    except ExperimentError as e:
        logger.error(f"Study '{cfg.study}' failed: {e}")
        raise
