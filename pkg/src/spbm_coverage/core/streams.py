"""Reproducible random streams.

Each stream is addressed by (master_seed, stream_index, lineage) and backed by
a counter-based Philox generator seeded through `numpy.random.SeedSequence`,
so replication results depend only on the address, never on worker count or
scheduling order.
"""

from __future__ import annotations

from typing import ClassVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class RngStream(BaseModel):
    """Address of an independent random stream.

    Attributes:
        master_seed: 64-bit root seed of the study
        stream_index: Replication (or chunk) index
        lineage: Further sub-stream path, e.g. (t_index,) or a resample attempt

    """

    model_config: ClassVar[ConfigDict] = ConfigDict(frozen=True, extra="forbid")

    master_seed: int = Field(ge=0, lt=2**64)
    stream_index: int = Field(default=0, ge=0)
    lineage: tuple[int, ...] = ()

    def child(self, index: int) -> RngStream:
        """Derive an independent sub-stream."""
        return self.model_copy(update={"lineage": (*self.lineage, index)})

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=self.master_seed, spawn_key=(self.stream_index, *self.lineage)
        )
        return np.random.Generator(np.random.Philox(seq))


def as_generator(rng: RngStream | np.random.Generator) -> np.random.Generator:
    """Accept either a stream address or an already-built generator."""
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng
