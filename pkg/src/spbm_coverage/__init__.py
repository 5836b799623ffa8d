"""Spherical Poisson Boolean model coverage lab."""

__version__ = "0.1.0"

from .core.coverage import coverage_threshold, count_witnesses, is_covered
from .core.model import sample_process, scaling_radius

__all__ = [
    "count_witnesses",
    "coverage_threshold",
    "is_covered",
    "sample_process",
    "scaling_radius",
    "__version__",
]
