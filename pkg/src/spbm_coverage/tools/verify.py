"""Cross-validation suites behind `spbm-cli verify`.

Each suite returns a SuiteResult whose checks carry their own margins; a
suite passes iff every check passes.
"""

import logging
import math

import numpy as np

from ..core.coverage import is_covered
from ..core.geom import downward_directions, falsifier_batch, h_batch
from ..core.laws import DeterministicLaw, RadiusLaw, UniformLaw
from ..core.model import alpha, constant_c0, constant_cdkY, closed_form_G
from ..core.streams import RngStream
from ..core.types import (
    Box,
    CheckResult,
    GeomTolerance,
    GridSpec,
    Indicator,
    MarkedPointSet,
    MCEstimate,
    SuiteResult,
)
from .oracle import grid_coverage_oracle, mc_constant_c0, mc_integral_G

logger = logging.getLogger(__name__)

_PREDICATE_CHUNK = 4096
G_CASES: tuple[tuple[int, tuple[float, ...]], ...] = (
    (2, (1.0, 1.0)),
    (2, (2.0, 3.0)),
    (3, (1.0, 1.0, 1.0)),
)


def verify_predicates(
    n: int,
    d: int,
    seed: int,
    n_dirs: int = 256,
    tol: GeomTolerance | None = None,
) -> SuiteResult:
    """Compare the cone solve with the hyperplane falsifier on random tuples.

    Centres are uniform in [0, 1]^d, marks uniform in [0.5, 1.5], r = 1.
    Degenerate tuples and tuples whose falsifier margin lies within 10 * tol
    of zero are excluded from the comparison. A scaling-covariance check
    h^(r)(x, a) = h^(1)(x / r, a) runs on the same tuples.
    """
    tol = tol or GeomTolerance()
    gen = RngStream(master_seed=seed, stream_index=d).generator()
    compared = excluded = disagreements = covariance_breaks = 0
    closest = math.inf

    for lo in range(0, n, _PREDICATE_CHUNK):
        size = min(_PREDICATE_CHUNK, n - lo)
        centers = gen.random((size, d, d))
        marks = 0.5 + gen.random((size, d))
        codes, upper = h_batch(centers, marks, 1.0, tol.eps_geo)

        scaled, _ = h_batch(centers / 0.7, marks, 1.0, tol.eps_geo)
        reference, _ = h_batch(centers, marks, 0.7, tol.eps_geo)
        covariance_breaks += int(np.count_nonzero(scaled != reference))

        usable = ~np.isnan(upper[:, 0]) & (codes != Indicator.DEGENERATE)
        if not usable.any():
            continue
        margin, _ = falsifier_batch(
            upper[usable], centers[usable], downward_directions(gen, n_dirs, d)
        )
        band = np.abs(margin) < 10 * tol.eps_geo
        falsifier_holds = margin < -tol.eps_geo
        cone_holds = codes[usable] == Indicator.ONE
        excluded += int(band.sum())
        compared += int((~band).sum())
        disagreements += int(np.count_nonzero((cone_holds != falsifier_holds) & ~band))
        if (~band).any():
            closest = min(closest, float(np.abs(margin[~band]).min()))

    logger.info(
        f"Predicates d={d}: {compared} compared, {excluded} in band, "
        f"{disagreements} disagreements"
    )
    return SuiteResult(
        suite="predicates",
        checks=[
            CheckResult(
                name=f"cone vs hyperplane (d={d})",
                passed=disagreements == 0 and compared > 0,
                margin=closest if math.isfinite(closest) else None,
                detail=f"{compared} compared, {excluded} in tolerance band, "
                f"{disagreements} disagreements",
            ),
            CheckResult(
                name=f"scaling covariance (d={d})",
                passed=covariance_breaks == 0,
                margin=float(covariance_breaks),
                detail=f"{covariance_breaks} of {n} tuples changed under rescaling",
            ),
        ],
    )


def _relative_gap(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def _streams(seed: int, index: int, runs: int) -> list[RngStream]:
    base = RngStream(master_seed=seed, stream_index=index)
    return [base if run == 0 else base.child(run) for run in range(runs)]


def _mc_check(name: str, estimates: list[MCEstimate], exact: float) -> CheckResult:
    """Score independent estimates against `exact` at 3 sigma.

    A single run passes within 3 sigma; a batch passes when at least 99% of
    its runs do.
    """
    scores = [
        abs(est.estimate - exact) / est.std_err if est.std_err > 0 else math.inf
        for est in estimates
    ]
    within = sum(z <= 3.0 for z in scores)
    runs = len(scores)
    passed = within == runs if runs == 1 else within >= 0.99 * runs
    first = estimates[0]
    detail = f"{first.estimate:.6g} +/- {first.std_err:.2g} vs {exact:.6g}"
    if runs > 1:
        detail = f"{within}/{runs} runs within 3 sigma; first {detail}"
    return CheckResult(name=name, passed=passed, margin=max(scores), detail=detail)


def verify_constants(d: int | None, n: int, seed: int, runs: int = 1) -> SuiteResult:
    """Closed-form anchors, the c_0 / c_{d,k,Y} identity and Monte Carlo G.

    Args:
        d: Restrict the Monte Carlo cases to this dimension (None runs all).
        n: Samples per Monte Carlo estimate.
        seed: Master seed of the estimates.
        runs: Independent estimates per Monte Carlo case. With more than one
            run a case passes when at least 99% of them land within 3 sigma.

    """
    if runs < 1:
        raise ValueError(f"runs must be at least 1, got {runs}")
    checks: list[CheckResult] = []
    det1 = DeterministicLaw(value=1.0)
    anchors = [
        ("c_{2,1,1} = 1", constant_cdkY(2, 1, det1), 1.0),
        ("c_{3,1,1} = 3 pi^2 / 32", constant_cdkY(3, 1, det1), 3 * math.pi**2 / 32),
        ("c_0(d=2, det:1) = pi", constant_c0(2, det1), math.pi),
        ("G(1, 1) = pi", float(closed_form_G(2, (1.0, 1.0))), math.pi),
    ]
    for name, got, want in anchors:
        gap = _relative_gap(got, want)
        checks.append(CheckResult(name=name, passed=gap <= 1e-12, margin=gap))

    laws: list[RadiusLaw] = [det1, UniformLaw(low=0.0, high=1.0)]
    for dim in (2, 3, 4):
        for k in (1, 2, 3):
            for law in laws:
                lhs = constant_c0(dim, law) * alpha(dim, law) ** (1 - dim) / math.factorial(k - 1)
                gap = _relative_gap(lhs, constant_cdkY(dim, k, law))
                checks.append(
                    CheckResult(
                        name=f"identity d={dim} k={k} {law.spec()}",
                        passed=gap <= 1e-12,
                        margin=gap,
                    )
                )

    for index, (dim, radii) in enumerate(G_CASES):
        if d is not None and dim != d:
            continue
        estimates = [mc_integral_G(dim, radii, n, s) for s in _streams(seed, index, runs)]
        checks.append(
            _mc_check(f"MC G{radii} (d={dim})", estimates, float(closed_form_G(dim, radii)))
        )

    if d is None or d == 2:
        unif = UniformLaw(low=0.0, high=1.0)
        estimates = [
            mc_constant_c0(2, unif, n, s) for s in _streams(seed, len(G_CASES), runs)
        ]
        checks.append(_mc_check("MC c_0(d=2, unif:0:1) = pi / 4", estimates, math.pi / 4))
    return SuiteResult(suite="constants", checks=checks)


def _oracle_instance(seed: int, index: int) -> tuple[MarkedPointSet, float, int]:
    gen = RngStream(master_seed=seed, stream_index=index).generator()
    A = Box.unit(2)
    n = int(gen.integers(1, 51))
    process = MarkedPointSet(
        centers=-0.2 + 1.4 * gen.random((n, 2)),
        marks=0.5 + gen.random(n),
        window=A,
        margin=0.2,
    )
    k = int(gen.integers(1, 3))
    r = float(0.1 + 0.4 * gen.random())
    return process, r, k


def verify_oracle(
    instances: int,
    seed: int,
    resolution: int = 1024,
    tol: GeomTolerance | None = None,
) -> SuiteResult:
    """Compare the exact checker with the grid oracle on random planar instances.

    An instance is ambiguous when the exact checker finds a vacancy that
    growing every radius by half a grid diagonal removes: the oracle cannot
    be expected to see it. Any other mismatch is a strict disagreement.
    """
    tol = tol or GeomTolerance()
    A = Box.unit(2)
    grid = GridSpec(resolution=resolution, box=A)
    cell_half_diagonal = math.sqrt(2) / (2 * (resolution - 1))
    agree = ambiguous = strict = 0
    failures: list[int] = []

    for i in range(instances):
        process, r, k = _oracle_instance(seed, i)
        exact = is_covered(process, r, A, k, tol, witness_limit=1).covered
        oracle = grid_coverage_oracle(process, r, A, k, grid).covered
        if exact == oracle:
            agree += 1
            continue
        if not exact:
            grown = r + cell_half_diagonal / process.min_mark
            if is_covered(process, grown, A, k, tol, witness_limit=1).covered:
                ambiguous += 1
                continue
        strict += 1
        failures.append(i)
        logger.warning(f"Oracle instance {i}: exact={exact}, grid={oracle}")

    rate = agree / instances if instances else 1.0
    return SuiteResult(
        suite="oracle",
        checks=[
            CheckResult(
                name="no strict disagreements",
                passed=strict == 0,
                margin=float(strict),
                detail=f"failing instances: {failures[:10]}" if failures else "",
            ),
            CheckResult(
                name="agreement rate >= 99%",
                passed=rate >= 0.99,
                margin=rate,
                detail=f"{agree} agree, {ambiguous} within one grid cell",
            ),
        ],
    )
