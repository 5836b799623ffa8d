"""Uniform spatial hash over ball centres.

Points are bucketed into cubic cells, the cells are keyed in mixed radix and
the points sorted by key, so a cell lookup is a pair of `searchsorted` calls
and a neighbourhood query touches (2 * reach + 1)^d cells.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Iterator

import numpy as np
from numpy.typing import NDArray

logger = logging.getLogger(__name__)

_QUERY_CHUNK = 8192


def expand_ranges(
    starts: NDArray[np.int64], counts: NDArray[np.int64]
) -> NDArray[np.int64]:
    """Concatenate arange(s, s + c) for every (s, c) pair."""
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offsets = np.cumsum(counts) - counts
    return np.arange(total) - np.repeat(offsets - starts, counts)


class SpatialHash:
    """Sorted-key bucket grid over a fixed point set.

    Args:
        points: (n, d) coordinates
        cell_size: Edge length of the cubic cells

    """

    def __init__(self, points: NDArray[np.float64], cell_size: float):
        if not cell_size > 0 or not math.isfinite(cell_size):
            raise ValueError(f"cell size must be positive and finite, got {cell_size}")
        self.points = np.asarray(points, dtype=float)
        self.cell_size = float(cell_size)
        n, d = self.points.shape
        self.dim = d
        self.origin = self.points.min(axis=0) if n else np.zeros(d)
        cells = self._cells(self.points)
        self.shape = cells.max(axis=0) + 1 if n else np.ones(d, dtype=np.int64)
        self.strides = np.cumprod(np.r_[1, self.shape[:0:-1]])[::-1].astype(np.int64)
        keys = cells @ self.strides
        self.order = np.argsort(keys, kind="stable")
        self.sorted_keys = keys[self.order]

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def _cells(self, coords: NDArray[np.float64]) -> NDArray[np.int64]:
        return np.floor((coords - self.origin) / self.cell_size).astype(np.int64)

    def _offsets(self, reach: int) -> list[tuple[int, ...]]:
        """Cell offsets within `reach`, nearest rings first."""
        offsets = itertools.product(range(-reach, reach + 1), repeat=self.dim)
        return sorted(offsets, key=lambda o: (max(map(abs, o)), o))

    def _offset_batch(
        self, base: NDArray[np.int64], offset: tuple[int, ...]
    ) -> tuple[NDArray[np.int64], NDArray[np.int64]] | None:
        cells = base + np.asarray(offset, dtype=np.int64)
        valid = np.all((cells >= 0) & (cells < self.shape), axis=1)
        qi = np.flatnonzero(valid)
        if qi.size == 0:
            return None
        keys = cells[qi] @ self.strides
        start = np.searchsorted(self.sorted_keys, keys, side="left")
        end = np.searchsorted(self.sorted_keys, keys, side="right")
        counts = end - start
        if not counts.any():
            return None
        return np.repeat(qi, counts), self.order[expand_ranges(start, counts)]

    def neighbours(
        self, queries: NDArray[np.float64], reach: int
    ) -> Iterator[tuple[NDArray[np.int64], NDArray[np.int64]]]:
        """Yield (query index, point index) pairs, one batch per cell offset.

        Every point within `reach` cells of a query's cell along each axis is
        produced exactly once. The query's own cell comes first.
        """
        base = self._cells(queries)
        for offset in self._offsets(reach):
            batch = self._offset_batch(base, offset)
            if batch is not None:
                yield batch

    def pairs(self, radii: NDArray[np.float64]) -> NDArray[np.int64]:
        """Index pairs i < j whose sphere boundaries can meet.

        Keeps |rho_i - rho_j| <= |x_i - x_j| <= rho_i + rho_j, sorted
        lexicographically.
        """
        if len(self) < 2:
            return np.empty((0, 2), dtype=np.int64)
        reach = max(1, math.ceil(2 * float(radii.max()) / self.cell_size))
        found: list[NDArray[np.int64]] = []
        for qi, pj in self.neighbours(self.points, reach):
            keep = qi < pj
            qi, pj = qi[keep], pj[keep]
            dist = np.linalg.norm(self.points[qi] - self.points[pj], axis=1)
            ok = (dist <= radii[qi] + radii[pj]) & (dist >= np.abs(radii[qi] - radii[pj]))
            found.append(np.column_stack([qi[ok], pj[ok]]))
        if not found:
            return np.empty((0, 2), dtype=np.int64)
        out = np.concatenate(found)
        return out[np.lexsort((out[:, 1], out[:, 0]))]

    def count_covering(
        self,
        queries: NDArray[np.float64],
        radii: NDArray[np.float64],
        exclude: NDArray[np.int64] | None = None,
        cap: int | None = None,
    ) -> NDArray[np.int64]:
        """Number of closed balls B(x_i, rho_i) containing each query.

        Args:
            queries: (m, d) points
            radii: Per-point radii
            exclude: Optional (m, s) ball indices ignored for the matching query
                (pad with -1)
            cap: Stop counting a query once it reaches this depth. Returned
                depths are then min(depth, cap), exact below the cap.

        """
        m = queries.shape[0]
        depth = np.zeros(m, dtype=np.int64)
        if m == 0 or len(self) == 0:
            return depth
        if cap is not None and cap <= 0:
            return depth
        reach = max(1, math.ceil(float(radii.max()) / self.cell_size))
        offsets = self._offsets(reach)
        for lo in range(0, m, _QUERY_CHUNK):
            chunk = queries[lo : lo + _QUERY_CHUNK]
            part = depth[lo : lo + chunk.shape[0]]
            base = self._cells(chunk)
            pending = np.arange(chunk.shape[0])
            for offset in offsets:
                if cap is not None:
                    pending = pending[part[pending] < cap]
                    if pending.size == 0:
                        break
                batch = self._offset_batch(base[pending], offset)
                if batch is None:
                    continue
                qi, pj = batch
                qi = pending[qi]
                dist = np.linalg.norm(chunk[qi] - self.points[pj], axis=1)
                inside = dist <= radii[pj]
                if exclude is not None:
                    inside &= ~(exclude[lo + qi] == pj[:, None]).any(axis=1)
                part += np.bincount(qi[inside], minlength=chunk.shape[0])
        if cap is not None:
            np.minimum(depth, cap, out=depth)
        return depth


def enumerate_cliques(pairs: NDArray[np.int64], n: int, size: int) -> NDArray[np.int64]:
    """All index tuples of length `size` whose members are pairwise adjacent.

    Args:
        pairs: Sorted (e, 2) edge list with i < j
        n: Number of vertices
        size: Tuple length (>= 1)

    Returns:
        (c, size) array of increasing tuples in lexicographic order.

    """
    if size < 1:
        raise ValueError(f"clique size must be positive, got {size}")
    if size == 1:
        return np.arange(n, dtype=np.int64)[:, None]
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if size == 2 or pairs.shape[0] == 0:
        return pairs if size == 2 else np.empty((0, size), dtype=np.int64)

    indptr = np.searchsorted(pairs[:, 0], np.arange(n + 1))
    edge_keys = pairs[:, 0] * n + pairs[:, 1]
    cliques = pairs
    for _ in range(size - 2):
        last = cliques[:, -1]
        starts = indptr[last]
        counts = indptr[last + 1] - starts
        rows = np.repeat(np.arange(cliques.shape[0]), counts)
        cand = pairs[expand_ranges(starts, counts), 1]
        ok = np.ones(cand.shape[0], dtype=bool)
        for col in range(cliques.shape[1] - 1):
            keys = cliques[rows, col] * n + cand
            pos = np.searchsorted(edge_keys, keys)
            pos = np.minimum(pos, edge_keys.shape[0] - 1)
            ok &= edge_keys[pos] == keys
        cliques = np.column_stack([cliques[rows[ok]], cand[ok]])
        if cliques.shape[0] == 0:
            break
    return cliques.reshape(-1, size)
