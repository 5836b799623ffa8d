"""Brute-force validators for the exact checker and the closed-form constants."""

from __future__ import annotations

import logging
import math

import numpy as np

from ..core.geom import h_batch
from ..core.grid import SpatialHash
from ..core.laws import RadiusLaw
from ..core.model import closed_form_G
from ..core.streams import RngStream, as_generator
from ..core.types import (
    Box,
    GeomTolerance,
    GridSpec,
    Indicator,
    MarkedPointSet,
    MCEstimate,
    OracleVerdict,
)

logger = logging.getLogger(__name__)

_NODE_CHUNK = 1 << 16
_SAMPLE_CHUNK = 1 << 16


def grid_coverage_oracle(
    process: MarkedPointSet, r: float, A: Box, k: int, grid: GridSpec
) -> OracleVerdict:
    """Evaluate the coverage depth at every node of a regular lattice over A.

    Nodes are visited in C order (last axis fastest); the first node of depth
    below k is reported. Resolution-limited by construction.

    Raises:
        ValueError: If the lattice box differs from A.

    """
    if grid.box != A:
        raise ValueError("grid box must equal the region under test")
    axes = [np.linspace(lo, hi, grid.resolution) for lo, hi in zip(A.lo, A.hi)]
    n_nodes = grid.resolution**A.dim
    radii = process.radii(r)
    hashed = SpatialHash(process.centers, float(radii.max()) if len(process) else 1.0)

    min_depth = None
    min_loc: tuple[float, ...] = tuple(A.lo)
    first_vacant: tuple[float, ...] | None = None
    for lo in range(0, n_nodes, _NODE_CHUNK):
        flat = np.arange(lo, min(lo + _NODE_CHUNK, n_nodes))
        index = np.unravel_index(flat, (grid.resolution,) * A.dim)
        nodes = np.column_stack([ax[i] for ax, i in zip(axes, index)])
        depth = hashed.count_covering(nodes, radii)
        arg = int(np.argmin(depth))
        if min_depth is None or depth[arg] < min_depth:
            min_depth = int(depth[arg])
            min_loc = tuple(nodes[arg].tolist())
        if first_vacant is None:
            vacant = np.flatnonzero(depth < k)
            if vacant.size:
                first_vacant = tuple(nodes[vacant[0]].tolist())

    return OracleVerdict(
        covered=first_vacant is None,
        first_vacant=first_vacant,
        min_depth=min_depth if min_depth is not None else 0,
        min_depth_location=min_loc,
    )


def mc_integral_G(
    d: int,
    radii: tuple[float, ...] | list[float],
    N: int,
    rng: RngStream | np.random.Generator,
    tol: GeomTolerance | None = None,
) -> MCEstimate:
    """Monte Carlo estimate of G(a_1, ..., a_d).

    G is (1/d!) times the integral of h^(1) over the positions of balls
    2..d with ball 1 fixed at the origin. Ball i is sampled uniformly in
    [-(a_1 + a_i), a_1 + a_i]^d, outside of which it cannot meet ball 1.
    Degenerate outcomes count as zero.
    """
    a = np.asarray(radii, dtype=float)
    if a.shape != (d,) or np.any(a <= 0):
        raise ValueError(f"need {d} positive radii, got {radii}")
    if N < 2:
        raise ValueError("need at least two samples")
    tol = tol or GeomTolerance()
    gen = as_generator(rng)
    half = a[0] + a[1:]
    volume = float(np.prod((2 * half) ** d))

    hits = 0
    degenerate = 0
    for lo in range(0, N, _SAMPLE_CHUNK):
        n = min(_SAMPLE_CHUNK, N - lo)
        offsets = (2 * gen.random((n, d - 1, d)) - 1) * half[None, :, None]
        centers = np.concatenate([np.zeros((n, 1, d)), offsets], axis=1)
        codes, _ = h_batch(centers, np.broadcast_to(a, (n, d)), 1.0, tol.eps_geo)
        hits += int(np.count_nonzero(codes == Indicator.ONE))
        degenerate += int(np.count_nonzero(codes == Indicator.DEGENERATE))

    p = hits / N
    scale = volume / math.factorial(d)
    return MCEstimate(
        estimate=scale * p,
        std_err=scale * math.sqrt(p * (1 - p) / (N - 1)),
        samples=N,
        degenerate=degenerate,
    )


def mc_constant_c0(
    d: int,
    law: RadiusLaw,
    N: int,
    rng: RngStream | np.random.Generator,
    independent: bool = False,
) -> MCEstimate:
    """Monte Carlo estimate of c_0 = E[G(Y_1, ..., Y_d)].

    The cheap path averages the closed form of G over sampled marks. The
    independent path never uses the closed form: each draw samples fresh
    marks and fresh positions in the support box of those marks, so its
    variance already includes the mark variability.
    """
    if N < 2:
        raise ValueError("need at least two samples")
    gen = as_generator(rng)
    if not independent:
        marks = law.sample(gen, N * d).reshape(N, d)
        values = np.asarray(closed_form_G(d, marks), dtype=float)
        return MCEstimate(
            estimate=float(values.mean()),
            std_err=float(values.std(ddof=1) / math.sqrt(N)),
            samples=N,
        )

    tol = GeomTolerance()
    total = 0.0
    total_sq = 0.0
    degenerate = 0
    for lo in range(0, N, _SAMPLE_CHUNK):
        n = min(_SAMPLE_CHUNK, N - lo)
        marks = law.sample(gen, n * d).reshape(n, d)
        half = marks[:, :1] + marks[:, 1:]
        offsets = (2 * gen.random((n, d - 1, d)) - 1) * half[:, :, None]
        centers = np.concatenate([np.zeros((n, 1, d)), offsets], axis=1)
        codes, _ = h_batch(centers, marks, 1.0, tol.eps_geo)
        weight = np.prod((2 * half) ** d, axis=1) / math.factorial(d)
        values = np.where(codes == Indicator.ONE, weight, 0.0)
        total += float(values.sum())
        total_sq += float((values**2).sum())
        degenerate += int(np.count_nonzero(codes == Indicator.DEGENERATE))

    mean = total / N
    var = max(total_sq / N - mean**2, 0.0) * N / (N - 1)
    return MCEstimate(
        estimate=mean, std_err=math.sqrt(var / N), samples=N, degenerate=degenerate
    )
