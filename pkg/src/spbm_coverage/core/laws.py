"""Mark distributions Q of the radius multiplier Y.

Every supported law has bounded support in (0, inf), so all moments exist in
closed form and the sampling window margin is exact.
"""

from __future__ import annotations

import logging
from typing import Annotated, Any, ClassVar, Literal

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)


class ModelConfigError(ValueError):
    """Raised for invalid law or schedule parameters."""

    pass


class _BoundedLaw(BaseModel):
    """Shared behaviour of the bounded-support laws."""

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, extra="forbid")

    def moment(self, m: float) -> float:
        raise NotImplementedError

    def clipped_moment(self, m: float, cap: float) -> float:
        """Return E[min(Y, cap)^m]."""
        raise NotImplementedError

    @property
    def upper_bound(self) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, n: int) -> NDArray[np.float64]:
        raise NotImplementedError

    def spec(self) -> str:
        """Compact text form accepted by `parse_law`."""
        raise NotImplementedError

    def moment_conditions(self, d: int) -> dict[str, bool]:
        """Check the moment hypotheses of the rate theorem for dimension d.

        For bounded laws E[Y^{d+eps}] is evaluated at eps = 1.
        """
        checks = {
            "E[Y^(2d-2)]": self.moment(2 * d - 2),
            "E[Y^(d+eps)]": self.moment(d + 1),
        }
        return {name: 0 < v < float("inf") for name, v in checks.items()}


class DeterministicLaw(_BoundedLaw):
    """Y is the constant `value`."""

    kind: Literal["det"] = "det"
    value: float = Field(gt=0)

    def moment(self, m: float) -> float:
        return self.value**m

    def clipped_moment(self, m: float, cap: float) -> float:
        return min(self.value, cap) ** m

    @property
    def upper_bound(self) -> float:
        return self.value

    def sample(self, rng: np.random.Generator, n: int) -> NDArray[np.float64]:
        return np.full(n, self.value, dtype=float)

    def spec(self) -> str:
        return f"det:{self.value:g}"


class UniformLaw(_BoundedLaw):
    """Y is uniform on (low, high]; low = 0 is allowed since Q({0}) = 0."""

    kind: Literal["unif"] = "unif"
    low: float = Field(ge=0)
    high: float = Field(gt=0)

    @model_validator(mode="after")
    def check_interval(self) -> UniformLaw:
        if self.high <= self.low:
            raise ValueError(f"empty interval ({self.low}, {self.high}]")
        return self

    def _power_integral(self, m: float, lo: float, hi: float) -> float:
        return (hi ** (m + 1) - lo ** (m + 1)) / (m + 1)

    def moment(self, m: float) -> float:
        width = self.high - self.low
        return self._power_integral(m, self.low, self.high) / width

    def clipped_moment(self, m: float, cap: float) -> float:
        if cap >= self.high:
            return self.moment(m)
        if cap <= self.low:
            return cap**m
        width = self.high - self.low
        below = self._power_integral(m, self.low, cap)
        return (below + cap**m * (self.high - cap)) / width

    @property
    def upper_bound(self) -> float:
        return self.high

    def sample(self, rng: np.random.Generator, n: int) -> NDArray[np.float64]:
        # 1 - U lies in (0, 1], keeping marks strictly positive when low = 0
        return self.low + (self.high - self.low) * (1.0 - rng.random(n))

    def spec(self) -> str:
        return f"unif:{self.low:g}:{self.high:g}"


class DiscreteLaw(_BoundedLaw):
    """Y takes `values[i]` with probability proportional to `weights[i]`."""

    kind: Literal["disc"] = "disc"
    values: tuple[float, ...] = Field(min_length=1)
    weights: tuple[float, ...] = Field(min_length=1)

    @model_validator(mode="after")
    def check_atoms(self) -> DiscreteLaw:
        if len(self.values) != len(self.weights):
            raise ValueError("values and weights must have equal length")
        if any(v <= 0 for v in self.values):
            raise ValueError("atoms must be strictly positive")
        if any(w < 0 for w in self.weights) or sum(self.weights) <= 0:
            raise ValueError("weights must be non-negative with a positive sum")
        return self

    @property
    def probabilities(self) -> NDArray[np.float64]:
        w = np.asarray(self.weights, dtype=float)
        return w / w.sum()

    def moment(self, m: float) -> float:
        return float(np.dot(self.probabilities, np.asarray(self.values) ** m))

    def clipped_moment(self, m: float, cap: float) -> float:
        clipped = np.minimum(np.asarray(self.values), cap)
        return float(np.dot(self.probabilities, clipped**m))

    @property
    def upper_bound(self) -> float:
        return max(v for v, w in zip(self.values, self.weights) if w > 0)

    def sample(self, rng: np.random.Generator, n: int) -> NDArray[np.float64]:
        return rng.choice(np.asarray(self.values, dtype=float), size=n, p=self.probabilities)

    def spec(self) -> str:
        atoms = ",".join(f"{v:g}@{w:g}" for v, w in zip(self.values, self.weights))
        return f"disc:{atoms}"


RadiusLaw = DeterministicLaw | UniformLaw | DiscreteLaw


def parse_law(text: str) -> RadiusLaw:
    """Parse the compact law syntax.

    Accepted forms: ``det:<c>``, ``unif:<a>:<b>``, ``disc:<v1>@<w1>,<v2>@<w2>,...``.

    Raises:
        ModelConfigError: If the text is malformed or the parameters invalid.

    """
    kind, _, body = text.strip().partition(":")
    try:
        if kind == "det":
            return DeterministicLaw(value=float(body))
        if kind == "unif":
            low, high = body.split(":")
            return UniformLaw(low=float(low), high=float(high))
        if kind == "disc":
            atoms = [atom.split("@") for atom in body.split(",")]
            return DiscreteLaw(
                values=tuple(float(v) for v, _ in atoms),
                weights=tuple(float(w) for _, w in atoms),
            )
    except ValueError as e:
        logger.debug(f"Rejected law '{text}': {e}")
        raise ModelConfigError(f"invalid law '{text}': {e}") from e
    raise ModelConfigError(
        f"unknown law '{text}' (expected det:<c>, unif:<a>:<b> or disc:<v>@<w>,...)"
    )


def _coerce_law(value: Any) -> Any:
    if isinstance(value, str):
        return parse_law(value)
    return value


RadiusLawField = Annotated[
    RadiusLaw, Field(discriminator="kind"), BeforeValidator(_coerce_law)
]
