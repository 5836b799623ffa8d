"""Geometric kernel: sphere intersections and the local-minimum predicates.

The batch functions work on stacks of P configurations at once and are what
the coverage checker calls; the scalar wrappers validate their input and
return the result models used by tests and the verification suites.

Every tolerance is applied after translating to the first centre and dividing
by the largest radius of the configuration, so `eps_geo` is dimensionless.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .streams import RngStream, as_generator
from .types import GeomTolerance, Indicator, IntersectionResult, MarkedPointSet

logger = logging.getLogger(__name__)

# Status codes of `intersect_batch`
EMPTY = 0
PAIR = 1
DEGENERATE = 2


class GeometryInputError(ValueError):
    """Raised when point or tuple shapes do not match the ambient dimension."""

    pass


@dataclass(frozen=True)
class ConeVerdict:
    """Cone condition result; truthy iff the condition holds."""

    holds: bool
    degenerate: bool
    coefficients: tuple[float, ...] | None = None

    def __bool__(self) -> bool:
        return self.holds


@dataclass(frozen=True)
class FalsifierVerdict:
    """Hyperplane test result.

    Attributes:
        holds: False when a direction violating the hyperplane condition was found
        margin: Best score over tried directions (>= -tol means falsified)
        witness: The best direction tried

    """

    holds: bool
    margin: float
    witness: tuple[float, ...] | None = None

    def __bool__(self) -> bool:
        return self.holds


# --- Batch kernel ---


def generalized_cross(vectors: NDArray[np.float64]) -> NDArray[np.float64]:
    """Vector orthogonal to the n-1 rows of each (n-1, n) block.

    Its norm is the (n-1)-volume spanned by the rows, so it vanishes exactly
    when they are linearly dependent.
    """
    P, m, n = vectors.shape
    if m != n - 1:
        raise GeometryInputError(f"need n-1 vectors in R^n, got shape {vectors.shape}")
    if m == 0:
        return np.ones((P, 1))
    out = np.empty((P, n))
    for j in range(n):
        minor = np.delete(vectors, j, axis=2)
        out[:, j] = (-1) ** j * np.linalg.det(minor)
    return out


def _lex_greater(a: NDArray[np.float64], b: NDArray[np.float64]) -> NDArray[np.bool_]:
    differs = a != b
    first = np.argmax(differs, axis=1)
    rows = np.arange(a.shape[0])
    return differs.any(axis=1) & (a[rows, first] > b[rows, first])


def intersect_batch(
    centers: NDArray[np.float64], radii: NDArray[np.float64], eps: float
) -> tuple[NDArray[np.int8], NDArray[np.float64], NDArray[np.float64]]:
    """Intersect n sphere boundaries in R^n for a stack of configurations.

    Subtracting the first sphere equation from the others leaves n-1 linear
    equations whose solution is a line; the points are where that line meets
    the first sphere.

    Args:
        centers: (P, n, n) array, one row per centre.
        radii: (P, n) positive radii.
        eps: Dimensionless tolerance for singular systems and tangency.

    Returns:
        (status, lower, upper) with status in {EMPTY, PAIR, DEGENERATE} and
        points of shape (P, n); points are NaN unless status == PAIR.

    """
    P, n, _ = centers.shape
    status = np.full(P, DEGENERATE, dtype=np.int8)
    lower = np.full((P, n), np.nan)
    upper = np.full((P, n), np.nan)
    if P == 0:
        return status, lower, upper

    origin = centers[:, 0, :]
    scale = radii.max(axis=1)
    rel = (centers - origin[:, None, :]) / scale[:, None, None]
    rho2 = (radii / scale[:, None]) ** 2

    offsets = rel[:, 1:, :]
    normal = generalized_cross(offsets)
    normal_sq = np.einsum("pi,pi->p", normal, normal)
    singular = normal_sq <= eps

    foot = np.zeros((P, n))
    if n > 1:
        w = 0.5 * (rho2[:, :1] - rho2[:, 1:] + np.einsum("pij,pij->pi", offsets, offsets))
        gram = offsets @ offsets.transpose(0, 2, 1)
        gram[singular] = np.eye(n - 1)
        coef = np.linalg.solve(gram, w[..., None])[..., 0]
        foot = np.einsum("pi,pij->pj", coef, offsets)

    h2 = rho2[:, 0] - np.einsum("pi,pi->p", foot, foot)
    status[~singular & (h2 < -eps)] = EMPTY
    pair = ~singular & (h2 > eps)
    status[pair] = PAIR
    if not pair.any():
        return status, lower, upper

    step = np.sqrt(h2[pair] / normal_sq[pair])[:, None] * normal[pair]
    a = origin[pair] + scale[pair, None] * (foot[pair] + step)
    b = origin[pair] + scale[pair, None] * (foot[pair] - step)
    swap = (a[:, -1] > b[:, -1]) | ((a[:, -1] == b[:, -1]) & _lex_greater(a, b))
    lower[pair] = np.where(swap[:, None], b, a)
    upper[pair] = np.where(swap[:, None], a, b)
    return status, lower, upper


def cone_batch(
    q: NDArray[np.float64], centers: NDArray[np.float64], eps: float
) -> tuple[NDArray[np.bool_], NDArray[np.bool_], NDArray[np.float64]]:
    """Solve sum_i b_i (q - x_i) = e_d for a stack of configurations.

    Returns:
        (holds, degenerate, b): holds iff the system is regular and every
        b_i > eps; degenerate when the system is singular, q sits on a centre
        or some |b_i| <= eps while no b_j < -eps.

    """
    P, d = q.shape
    spokes = q[:, None, :] - centers
    lengths = np.linalg.norm(spokes, axis=2)
    longest = lengths.max(axis=1, initial=0.0)
    touching = (lengths <= eps * np.maximum(longest, 1e-300)[:, None]).any(axis=1)
    unit = spokes / np.where(lengths > 0, lengths, 1.0)[..., None]

    # columns are the unit spokes
    system = unit.transpose(0, 2, 1)
    singular = touching | (np.abs(np.linalg.det(system)) <= eps)
    system[singular] = np.eye(d)
    target = np.zeros((P, d, 1))
    target[:, -1, 0] = 1.0
    b = np.linalg.solve(system, target)[..., 0]
    b[singular] = np.nan

    finite = np.nan_to_num(b, nan=0.0)
    # a clearly negative coefficient decides the cone regardless of zeros
    excluded = (finite < -eps).any(axis=1)
    degenerate = singular | (~excluded & (np.abs(finite) <= eps).any(axis=1))
    holds = ~degenerate & (np.nan_to_num(b, nan=-1.0) > eps).all(axis=1)
    return holds, degenerate, b


def h_batch(
    centers: NDArray[np.float64],
    marks: NDArray[np.float64],
    r: float,
    eps: float,
) -> tuple[NDArray[np.int8], NDArray[np.float64]]:
    """Local-minimum indicator h for a stack of d-tuples.

    Returns:
        (codes, upper) where codes are `Indicator` values and `upper` holds the
        upper intersection points (NaN where the spheres do not form a pair).

    """
    status, _, upper = intersect_batch(centers, r * marks, eps)
    codes = np.zeros(status.shape, dtype=np.int8)
    codes[status == DEGENERATE] = Indicator.DEGENERATE
    pair = status == PAIR
    if pair.any():
        holds, degenerate, _ = cone_batch(upper[pair], centers[pair], eps)
        sub = np.where(holds, Indicator.ONE, Indicator.ZERO).astype(np.int8)
        sub[degenerate] = Indicator.DEGENERATE
        codes[pair] = sub
    return codes, upper


# --- Scalar API ---


def _check_tuple(centers: ArrayLike, d: int | None = None) -> NDArray[np.float64]:
    arr = np.asarray(centers, dtype=float)
    if arr.ndim != 2:
        raise GeometryInputError(f"centers must be a 2-d array, got shape {arr.shape}")
    n, dim = arr.shape
    if dim < 2 or n != dim or (d is not None and dim != d):
        expected = d if d is not None else dim
        raise GeometryInputError(
            f"expected {expected} centres in R^{expected}, got shape {arr.shape}"
        )
    return arr


def sphere_intersection(
    centers: ArrayLike, radii: ArrayLike, tol: GeomTolerance | None = None
) -> IntersectionResult:
    """Both points where d sphere boundaries in R^d meet, ordered lower first."""
    tol = tol or GeomTolerance()
    c = _check_tuple(centers)
    rad = np.asarray(radii, dtype=float)
    if rad.shape != (c.shape[0],) or np.any(rad <= 0):
        raise GeometryInputError(f"need {c.shape[0]} positive radii, got {rad}")
    status, lower, upper = intersect_batch(c[None], rad[None], tol.eps_geo)
    if status[0] == PAIR:
        return IntersectionResult(
            kind="pair", lower=tuple(lower[0].tolist()), upper=tuple(upper[0].tolist())
        )
    return IntersectionResult(kind="empty" if status[0] == EMPTY else "degenerate")


def cone_condition(
    q: ArrayLike, centers: ArrayLike, tol: GeomTolerance | None = None
) -> ConeVerdict:
    """Whether e_d lies in the open cone spanned by q - x_1, ..., q - x_d."""
    tol = tol or GeomTolerance()
    qa = np.asarray(q, dtype=float)
    c = _check_tuple(centers, qa.shape[0] if qa.ndim == 1 else None)
    holds, degenerate, b = cone_batch(qa[None], c[None], tol.eps_geo)
    coefficients = None if np.isnan(b[0]).any() else tuple(b[0].tolist())
    return ConeVerdict(bool(holds[0]), bool(degenerate[0]), coefficients)


def downward_directions(rng: np.random.Generator, n: int, d: int) -> NDArray[np.float64]:
    """n uniform unit vectors of the lower half-sphere {f : f_d <= 0}."""
    f = rng.standard_normal((n, d))
    f /= np.linalg.norm(f, axis=1, keepdims=True)
    f[:, -1] = -np.abs(f[:, -1])
    return f


def _scores(
    directions: NDArray[np.float64], spokes: NDArray[np.float64]
) -> NDArray[np.float64]:
    """min(min_i <f, u_i>, -f_d): non-negative iff f violates the hyperplane condition."""
    inner = np.einsum("pmj,pij->pmi", directions, spokes).min(axis=2)
    return np.minimum(inner, -directions[..., -1])


def _extreme_rays(spokes: NDArray[np.float64]) -> NDArray[np.float64]:
    """Edges of the cones {f : <f, u_i> >= 0, f_d <= 0}, both orientations.

    Returns (P, R, d); rays of dependent normals are left at zero.
    """
    P, d, _ = spokes.shape
    down = np.zeros((P, 1, d))
    down[..., -1] = -1.0
    normals = np.concatenate([spokes, down], axis=1)
    rays = np.stack(
        [
            generalized_cross(normals[:, list(s)])
            for s in itertools.combinations(range(d + 1), d - 1)
        ],
        axis=1,
    )
    norms = np.linalg.norm(rays, axis=2, keepdims=True)
    rays = rays / np.where(norms > 0, norms, 1.0)
    return np.concatenate([rays, -rays], axis=1)


def falsifier_batch(
    q: NDArray[np.float64],
    centers: NDArray[np.float64],
    directions: NDArray[np.float64],
    with_extreme_rays: bool = True,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Best hyperplane-violation score per configuration.

    Args:
        q: (P, d) candidate points, distinct from their centres.
        centers: (P, d, d) centres.
        directions: (m, d) shared trial directions with f_d <= 0.
        with_extreme_rays: Also try the edges of each violating cone and
            the centroid of the edges that lie in it.

    Returns:
        (margin, witness): the best score (>= -tol means the condition is
        falsified) and the direction attaining it.

    """
    P, d = q.shape
    spokes = q[:, None, :] - centers
    spokes /= np.linalg.norm(spokes, axis=2, keepdims=True)
    trials = np.broadcast_to(directions, (P, *directions.shape))
    if with_extreme_rays:
        rays = _extreme_rays(spokes)
        feasible = (_scores(rays, spokes) >= -1e-12) & (np.linalg.norm(rays, axis=2) > 0.5)
        centroid = (rays * feasible[..., None]).sum(axis=1, keepdims=True)
        norms = np.linalg.norm(centroid, axis=2, keepdims=True)
        centroid = centroid / np.where(norms > 0, norms, 1.0)
        trials = np.concatenate([trials, rays, centroid], axis=1)
    scores = _scores(trials, spokes)
    scores[np.linalg.norm(trials, axis=2) < 0.5] = -np.inf
    best = np.argmax(scores, axis=1)
    rows = np.arange(P)
    return scores[rows, best], trials[rows, best]


def hyperplane_falsifier(
    q: ArrayLike,
    centers: ArrayLike,
    n_dirs: int,
    rng: RngStream | np.random.Generator,
    tol: GeomTolerance | None = None,
    with_extreme_rays: bool = True,
) -> FalsifierVerdict:
    """Randomised test of the hyperplane form of the local-minimum condition.

    The condition fails iff some unit f with <f, e_d> <= 0 has
    <f, q - x_i> >= 0 for every i. Random downward directions are tried, and
    with `with_extreme_rays` also the edges of the violating cone, which is
    where a thin violating region lives. A False verdict is certain up to
    tolerance; True is probabilistic.

    Raises:
        GeometryInputError: If n_dirs < 1 or the shapes do not match.

    """
    tol = tol or GeomTolerance()
    if n_dirs < 1:
        raise GeometryInputError(f"n_dirs must be positive, got {n_dirs}")
    qa = np.asarray(q, dtype=float)
    if qa.ndim != 1:
        raise GeometryInputError(f"q must be a point, got shape {qa.shape}")
    c = _check_tuple(centers, qa.shape[0])
    if np.any(np.all(qa == c, axis=1)):
        raise GeometryInputError("q coincides with a centre")

    directions = downward_directions(as_generator(rng), n_dirs, qa.shape[0])
    margin, witness = falsifier_batch(qa[None], c[None], directions, with_extreme_rays)
    return FalsifierVerdict(
        holds=bool(margin[0] < -tol.eps_geo),
        margin=float(margin[0]),
        witness=tuple(witness[0].tolist()),
    )


def h_indicator(
    centers: ArrayLike,
    marks: ArrayLike,
    r: float,
    tol: GeomTolerance | None = None,
) -> Indicator:
    """h^(r) for one d-tuple of marked points.

    ONE iff the d spheres of radius r * a_i meet in exactly two points and the
    upper point is a local minimum of the complement of the union of balls.
    """
    tol = tol or GeomTolerance()
    c = _check_tuple(centers)
    m = np.asarray(marks, dtype=float)
    if m.shape != (c.shape[0],):
        raise GeometryInputError(f"need {c.shape[0]} marks, got shape {m.shape}")
    if r <= 0 or np.any(m <= 0):
        raise GeometryInputError("r and marks must be positive")
    codes, _ = h_batch(c[None], m[None], r, tol.eps_geo)
    return Indicator(int(codes[0]))


def point_depth(q: ArrayLike, points: MarkedPointSet, r: float) -> int:
    """Number of closed balls B(x, r a) that contain q."""
    qa = np.asarray(q, dtype=float)
    if qa.shape != (points.dim,):
        raise GeometryInputError(f"q must have {points.dim} coordinates")
    dist = np.linalg.norm(points.centers - qa, axis=1)
    return int(np.count_nonzero(dist <= points.radii(r)))
