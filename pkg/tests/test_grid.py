"""Tests for the spatial hash and clique enumeration."""

import itertools

import numpy as np
import pytest

from spbm_coverage.core.grid import SpatialHash, enumerate_cliques, expand_ranges
from spbm_coverage.core.streams import RngStream


def _random_points(seed: int, n: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    gen = RngStream(master_seed=seed).generator()
    return gen.random((n, d)), 0.05 + 0.1 * gen.random(n)


def _brute_pairs(points: np.ndarray, radii: np.ndarray) -> set[tuple[int, int]]:
    found = set()
    for i, j in itertools.combinations(range(len(points)), 2):
        dist = np.linalg.norm(points[i] - points[j])
        if abs(radii[i] - radii[j]) <= dist <= radii[i] + radii[j]:
            found.add((i, j))
    return found


def test_expand_ranges():
    out = expand_ranges(np.array([5, 0, 9]), np.array([2, 0, 3]))
    assert out.tolist() == [5, 6, 9, 10, 11]
    assert expand_ranges(np.array([1]), np.array([0])).size == 0


def test_rejects_non_positive_cell_size():
    with pytest.raises(ValueError):
        SpatialHash(np.zeros((3, 2)), 0.0)


@pytest.mark.parametrize("d", [2, 3])
def test_pairs_match_brute_force(d):
    points, radii = _random_points(21 + d, 150, d)
    grid = SpatialHash(points, float(radii.max()))
    pairs = grid.pairs(radii)
    assert {tuple(p) for p in pairs.tolist()} == _brute_pairs(points, radii)
    assert np.all(pairs[:, 0] < pairs[:, 1])
    assert pairs.tolist() == sorted(pairs.tolist())


def test_pairs_of_tiny_sets_are_empty():
    grid = SpatialHash(np.zeros((1, 2)), 1.0)
    assert grid.pairs(np.ones(1)).shape == (0, 2)


def test_count_covering_matches_brute_force():
    points, radii = _random_points(31, 200, 2)
    queries = RngStream(master_seed=32).generator().random((500, 2))
    grid = SpatialHash(points, float(radii.max()))
    dist = np.linalg.norm(queries[:, None, :] - points[None, :, :], axis=2)
    expected = (dist <= radii[None, :]).sum(axis=1)
    assert grid.count_covering(queries, radii).tolist() == expected.tolist()


def test_count_covering_excludes_listed_balls():
    points = np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 5.0]])
    radii = np.array([1.0, 1.0, 1.0])
    grid = SpatialHash(points, 1.0)
    queries = np.array([[0.05, 0.0], [0.05, 0.0]])
    exclude = np.array([[0, -1], [0, 1]])
    assert grid.count_covering(queries, radii, exclude).tolist() == [1, 0]


def test_count_covering_on_empty_hash():
    grid = SpatialHash(np.empty((0, 2)), 1.0)
    assert grid.count_covering(np.zeros((4, 2)), np.empty(0)).tolist() == [0, 0, 0, 0]


@pytest.mark.parametrize("cap", [1, 2, 3])
def test_capped_count_saturates_and_stays_exact_below(cap):
    points, radii = _random_points(33, 60, 2)
    queries = RngStream(master_seed=34).generator().random((400, 2))
    grid = SpatialHash(points, float(radii.max()))
    full = grid.count_covering(queries, radii)
    capped = grid.count_covering(queries, radii, cap=cap)
    assert capped.tolist() == np.minimum(full, cap).tolist()
    assert (full >= cap).any() and (full < cap).any()


def test_capped_count_with_exclusions():
    points, radii = _random_points(35, 200, 3)
    queries = points[:50] + 0.01
    exclude = np.arange(50)[:, None]
    grid = SpatialHash(points, float(radii.max()))
    full = grid.count_covering(queries, radii, exclude)
    assert grid.count_covering(queries, radii, exclude, cap=2).tolist() == np.minimum(full, 2).tolist()


def test_neighbours_visit_the_own_cell_first():
    points = np.array([[0.5, 0.5], [2.5, 0.5]])
    grid = SpatialHash(points, 1.0)
    qi, pj = next(grid.neighbours(np.array([[0.6, 0.6]]), 2))
    assert qi.tolist() == [0] and pj.tolist() == [0]


def test_triangles_match_brute_force():
    points, radii = _random_points(41, 120, 2)
    grid = SpatialHash(points, float(radii.max()))
    pairs = grid.pairs(radii)
    edges = {tuple(p) for p in pairs.tolist()}
    expected = [
        t
        for t in itertools.combinations(range(len(points)), 3)
        if {(t[0], t[1]), (t[0], t[2]), (t[1], t[2])} <= edges
    ]
    assert enumerate_cliques(pairs, len(points), 3).tolist() == [list(t) for t in expected]


def test_clique_sizes_one_and_two():
    pairs = np.array([[0, 1], [1, 2]])
    assert enumerate_cliques(pairs, 3, 1).tolist() == [[0], [1], [2]]
    assert enumerate_cliques(pairs, 3, 2).tolist() == [[0, 1], [1, 2]]
    assert enumerate_cliques(pairs, 3, 3).shape == (0, 3)
    with pytest.raises(ValueError):
        enumerate_cliques(pairs, 3, 0)
