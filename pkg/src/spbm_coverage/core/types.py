"""Core Data Structures and Types."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import IntEnum
from typing import ClassVar, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .laws import RadiusLawField

# --- Geometry ---


class GeomTolerance(BaseModel):
    """Absolute tolerance for singular systems and tangency tests.

    The kernel applies it after translating to the first centre and
    rescaling by the largest radius, so the value is dimensionless.
    """

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, extra="forbid")

    eps_geo: float = Field(default=1e-9, gt=0)


class Indicator(IntEnum):
    """Outcome of the local-minimum indicator h."""

    ZERO = 0
    ONE = 1
    DEGENERATE = 2


class IntersectionResult(BaseModel):
    """Intersection of d sphere boundaries in R^d.

    Attributes:
        kind: "pair" when exactly two points exist, "empty" when the spheres
            do not meet, "degenerate" for tangency or affinely dependent centres
        lower: The lower point p (None unless kind == "pair")
        upper: The upper point q (None unless kind == "pair")

    """

    kind: Literal["empty", "pair", "degenerate"]
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None


# --- Regions ---


@dataclass(frozen=True)
class BoxFace:
    """A face of a box, described by the coordinates it pins."""

    fixed_axes: tuple[int, ...]
    fixed_values: tuple[float, ...]
    free_axes: tuple[int, ...]
    face_id: str


class Box(BaseModel):
    """Closed axis-aligned box [lo_1, hi_1] x ... x [lo_d, hi_d]."""

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, extra="forbid")

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    @model_validator(mode="after")
    def check_bounds(self) -> Box:
        if len(self.lo) != len(self.hi) or not self.lo:
            raise ValueError("lo and hi must be non-empty and of equal length")
        if any(h < lo for lo, h in zip(self.lo, self.hi)):
            raise ValueError(f"box upper corner {self.hi} lies below {self.lo}")
        return self

    @classmethod
    def unit(cls, d: int) -> Box:
        return cls(lo=(0.0,) * d, hi=(1.0,) * d)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def lo_array(self) -> NDArray[np.float64]:
        return np.asarray(self.lo, dtype=float)

    @property
    def hi_array(self) -> NDArray[np.float64]:
        return np.asarray(self.hi, dtype=float)

    @property
    def sides(self) -> NDArray[np.float64]:
        return self.hi_array - self.lo_array

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.sides))

    def expand(self, margin: float) -> Box:
        """Return the box grown by `margin` on every side."""
        return Box(
            lo=tuple(v - margin for v in self.lo), hi=tuple(v + margin for v in self.hi)
        )

    def distance(self, points: ArrayLike) -> NDArray[np.float64]:
        """Euclidean distance from each row of `points` to the box (0 inside)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        gap = np.maximum(np.maximum(self.lo_array - pts, pts - self.hi_array), 0.0)
        return np.linalg.norm(gap, axis=1)

    def contains(self, points: ArrayLike, dilation: float = 0.0) -> NDArray[np.bool_]:
        """Membership in the closed box, or in its dilation by a ball."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if dilation == 0.0:
            return np.all((pts >= self.lo_array) & (pts <= self.hi_array), axis=1)
        return self.distance(pts) <= dilation

    def vertices(self) -> NDArray[np.float64]:
        corners = itertools.product(*zip(self.lo, self.hi))
        return np.array(list(corners), dtype=float)

    def faces(self) -> list[BoxFace]:
        """All faces of dimension d-1 down to 1, highest dimension first."""
        d = self.dim
        faces: list[BoxFace] = []
        for n_fixed in range(1, d):
            for axes in itertools.combinations(range(d), n_fixed):
                free = tuple(a for a in range(d) if a not in axes)
                for sides in itertools.product((0, 1), repeat=n_fixed):
                    values = tuple(
                        self.hi[a] if s else self.lo[a] for a, s in zip(axes, sides)
                    )
                    label = ",".join(
                        f"x{a}={'hi' if s else 'lo'}" for a, s in zip(axes, sides)
                    )
                    faces.append(BoxFace(axes, values, free, label))
        return faces


# --- Point process ---


class MarkedPointSet(BaseModel):
    """A realisation of the marked Poisson process.

    Attributes:
        centers: (n, d) array of ball centres
        marks: (n,) array of positive radius multipliers
        window: The region the process was generated for
        margin: Extra width around `window` that centres were drawn from
        truncation_level: When set, every mark is at most this value

    """

    model_config: ClassVar[ConfigDict] = ConfigDict(
        arbitrary_types_allowed=True, frozen=True
    )

    centers: np.ndarray
    marks: np.ndarray
    window: Box
    margin: float = Field(default=0.0, ge=0)
    truncation_level: float | None = Field(default=None, gt=0)

    @field_validator("centers", "marks", mode="before")
    @classmethod
    def as_float_array(cls, v: ArrayLike) -> np.ndarray:
        return np.asarray(v, dtype=float)

    @model_validator(mode="after")
    def check_shapes(self) -> MarkedPointSet:
        d = self.window.dim
        if self.centers.size == 0:
            object.__setattr__(self, "centers", self.centers.reshape(0, d))
        if self.centers.ndim != 2 or self.centers.shape[1] != d:
            raise ValueError(f"centers must have shape (n, {d})")
        if self.marks.shape != (self.centers.shape[0],):
            raise ValueError("marks must be one per centre")
        if np.any(self.marks <= 0):
            raise ValueError("marks must be strictly positive")
        reach = self.window.expand(self.margin)
        if not np.all(reach.contains(self.centers)):
            raise ValueError("centres must lie in the window expanded by the margin")
        if self.truncation_level is not None and np.any(
            self.marks > self.truncation_level
        ):
            raise ValueError("marks exceed the truncation level")
        return self

    @classmethod
    def from_pairs(
        cls,
        pairs: list[tuple[tuple[float, ...], float]],
        window: Box | None = None,
        margin: float = 0.0,
    ) -> MarkedPointSet:
        """Build a point set from explicit (center, mark) pairs.

        Without a window, the bounding box of the centres is used.
        """
        if window is None and not pairs:
            raise ValueError("an empty point set needs an explicit window")
        centers = np.array([c for c, _ in pairs], dtype=float)
        marks = np.array([m for _, m in pairs], dtype=float)
        if window is None:
            window = Box(lo=tuple(centers.min(axis=0)), hi=tuple(centers.max(axis=0)))
        return cls(centers=centers, marks=marks, window=window, margin=margin)

    def __len__(self) -> int:
        return int(self.centers.shape[0])

    @property
    def dim(self) -> int:
        return self.window.dim

    @property
    def max_mark(self) -> float:
        return float(self.marks.max()) if len(self) else 0.0

    @property
    def min_mark(self) -> float:
        return float(self.marks.min()) if len(self) else 0.0

    def radii(self, r: float) -> NDArray[np.float64]:
        return r * self.marks

    def restrict_marks(self, level: float) -> MarkedPointSet:
        """Drop every point whose mark exceeds `level`."""
        keep = self.marks <= level
        return MarkedPointSet(
            centers=self.centers[keep],
            marks=self.marks[keep],
            window=self.window,
            margin=self.margin,
            truncation_level=level,
        )


# --- Scaling ---

ScheduleVariant = Literal["hall_janson", "corrected"]


class ScalingSchedule(BaseModel):
    """Parameters of the radius schedule t -> r_t.

    Attributes:
        d: Ambient dimension (at least 2)
        k: Coverage multiplicity
        beta: Location shift of the limit law
        variant: "hall_janson" for the classical schedule, "corrected" for the
            schedule with the extra (d+k-2)^2 loglog t / log t term

    """

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, extra="forbid")

    d: int = Field(ge=2)
    k: int = Field(default=1, ge=1)
    beta: float = 0.0
    variant: ScheduleVariant = "corrected"


# --- Coverage ---

WitnessKind = Literal["interior_local_min", "face_critical", "vertex"]


class VacancyWitness(BaseModel):
    """A candidate point whose adjacent cell is covered fewer than k times.

    Attributes:
        kind: Interior local minimum, critical point on a face of the box,
            or a box vertex
        location: Coordinates of the candidate
        tuple_indices: Indices of the balls whose spheres define the point
        depth: Number of other balls covering the point
        face: Face identifier for face witnesses (e.g. "x0=lo,x2=hi")

    """

    kind: WitnessKind
    location: tuple[float, ...]
    tuple_indices: tuple[int, ...]
    depth: int = Field(ge=0)
    face: str | None = None


class CoverageVerdict(BaseModel):
    """Outcome of an exact k-coverage decision."""

    covered: bool
    witnesses: list[VacancyWitness] = Field(default_factory=list)
    witness_total: int = 0
    degenerate_events: int = 0
    reliable: bool = True


class WitnessTally(BaseModel):
    """Witness count F(D) together with the witnesses themselves."""

    count: int
    witnesses: list[VacancyWitness] = Field(default_factory=list)
    degenerate_events: int = 0


# --- Oracles ---


class GridSpec(BaseModel):
    """Lattice used by the brute-force coverage oracle."""

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, extra="forbid")

    resolution: int = Field(ge=2)
    box: Box


class OracleVerdict(BaseModel):
    covered: bool
    first_vacant: tuple[float, ...] | None = None
    min_depth: int
    min_depth_location: tuple[float, ...]


class MCEstimate(BaseModel):
    """Monte Carlo estimate with its standard error."""

    estimate: float
    std_err: float
    samples: int
    degenerate: int = 0


class CheckResult(BaseModel):
    name: str
    passed: bool
    margin: float | None = None
    detail: str = ""


class SuiteResult(BaseModel):
    """Outcome of a verification suite (passed iff every check passed)."""

    suite: str
    checks: list[CheckResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


# --- Experiments ---

StudyKind = Literal["coverage", "threshold", "witness", "rate"]


class ExperimentConfig(BaseModel):
    """Monte Carlo study parameters.

    Attributes:
        study: Which driver to run
        schedule: Radius schedule
        law: Mark distribution
        region: The box A whose coverage is studied
        t_values: Intensities, strictly increasing and > 1
        replications: Replications per intensity (M)
        master_seed: Root of every random stream of the study
        workers: Parallel worker processes
        zeta: Truncation exponent for the witness count (default: half the
            admissible bound)
        bracket_factor: Upper bisection bracket for thresholds, as a multiple
            of r_t
        track_witnesses: Also count witnesses during coverage studies
        record_timings: Record wall-clock time per row (off by default so
            reruns give identical CSV bodies)

    """

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, extra="forbid")

    study: StudyKind = "coverage"
    schedule: ScalingSchedule
    law: RadiusLawField
    region: Box
    t_values: list[float] = Field(min_length=1)
    replications: int = Field(ge=1)
    master_seed: int = Field(ge=0, lt=2**64)
    workers: int = Field(default=1, ge=1)
    zeta: float | None = Field(default=None, gt=0)
    bracket_factor: float = Field(default=2.0, gt=1)
    track_witnesses: bool = True
    record_timings: bool = False

    @field_validator("t_values")
    @classmethod
    def check_t_values(cls, v: list[float]) -> list[float]:
        if any(t <= 1 or not math.isfinite(t) for t in v):
            raise ValueError("every t must be a finite value above 1")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("t_values must be strictly increasing")
        return v

    @model_validator(mode="after")
    def check_dimensions(self) -> ExperimentConfig:
        if self.region.dim != self.schedule.d:
            raise ValueError(
                f"region has dimension {self.region.dim}, schedule has d={self.schedule.d}"
            )
        if self.schedule.d not in (2, 3):
            raise ValueError("exact coverage studies support d in {2, 3}")
        if self.region.volume <= 0:
            raise ValueError("region must have positive volume")
        return self


class ReportRow(BaseModel):
    """One row of an experiment report (one intensity t)."""

    model_config: ClassVar[ConfigDict] = ConfigDict(ser_json_inf_nan="constants")

    t: float
    r_t: float
    p_hat: float | None = None
    std_err: float | None = None
    limit_prob: float
    abs_error: float | None = None
    mean_F: float | None = None
    F_std_err: float | None = None
    predicted_mean_F: float
    ks_stat: float | None = None
    wall_time_s: float | None = None
    degenerate_resamples: int = 0


class ThresholdSample(BaseModel):
    """Normalised coverage-threshold statistics at one intensity."""

    model_config: ClassVar[ConfigDict] = ConfigDict(ser_json_inf_nan="constants")

    t: float
    samples: list[float]
    ks_stat: float


class RateFit(BaseModel):
    """Log-log regression of the coverage error against 1/log t.

    Attributes:
        slope: Fitted exponent against 1/log t (None when indeterminate)
        intercept: Fitted intercept
        slope_loglog: Exponent against loglog t / log t
        indeterminate: True when every error sits below its noise floor
        errors: abs_error per t
        floors: 3 * std_err per t
        boundary_terms: Volume of A' minus A'' per t

    """

    slope: float | None = None
    intercept: float | None = None
    slope_loglog: float | None = None
    indeterminate: bool
    errors: list[float]
    floors: list[float]
    boundary_terms: list[float] = Field(default_factory=list)


class ExperimentReport(BaseModel):
    """Study output: resolved config, one row per t and any warnings."""

    model_config: ClassVar[ConfigDict] = ConfigDict(ser_json_inf_nan="constants")

    config: ExperimentConfig
    rows: list[ReportRow] = Field(default_factory=list)
    threshold_samples: list[ThresholdSample] = Field(default_factory=list)
    rate_fit: RateFit | None = None
    warnings: list[str] = Field(default_factory=list)
