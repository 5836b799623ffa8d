"""Tests for exact coverage, witness counting and thresholds."""

import math

import numpy as np
import pytest

from spbm_coverage.core.coverage import (
    UncoverableError,
    boundary_volume,
    count_witnesses,
    coverage_threshold,
    is_covered,
    region_margin_sets,
    witness_containment_check,
)
from spbm_coverage.core.laws import parse_law
from spbm_coverage.core.model import sample_process
from spbm_coverage.core.streams import RngStream
from spbm_coverage.core.types import Box, MarkedPointSet

UNIT = Box.unit(2)
WIDE = Box(lo=(-2.0, -2.0), hi=(2.0, 2.0))


def _two_balls() -> MarkedPointSet:
    return MarkedPointSet.from_pairs(
        [((0.25, 0.5), 1.0), ((0.75, 0.5), 1.0)], window=UNIT, margin=1.0
    )


def _random_process(seed: int, t: float = 60.0, margin: float = 0.6) -> MarkedPointSet:
    return sample_process(UNIT, t, parse_law("unif:0.5:1.5"), margin / 1.5, RngStream(master_seed=seed))


def test_single_witness_of_a_pair():
    pts = MarkedPointSet.from_pairs([((0.0, 0.0), 1.0), ((1.0, 0.0), 1.0)], window=WIDE)
    tally = count_witnesses(pts, 1.0, WIDE, 1)
    assert tally.count == 1
    w = tally.witnesses[0]
    assert w.kind == "interior_local_min"
    assert w.location == pytest.approx((0.5, math.sqrt(3) / 2))
    assert w.tuple_indices == (0, 1)
    assert w.depth == 0


def test_witness_outside_the_counting_box_is_ignored():
    pts = MarkedPointSet.from_pairs([((0.0, 0.0), 1.0), ((1.0, 0.0), 1.0)], window=WIDE)
    lower_half = Box(lo=(-2.0, -2.0), hi=(2.0, 0.0))
    assert count_witnesses(pts, 1.0, lower_half, 1).count == 0


def test_covered_witness_is_not_counted():
    pts = MarkedPointSet.from_pairs(
        [((0.0, 0.0), 1.0), ((1.0, 0.0), 1.0), ((0.5, 0.9), 0.5)], window=WIDE
    )
    tally = count_witnesses(pts, 1.0, WIDE, 1)
    assert all(w.tuple_indices != (0, 1) for w in tally.witnesses)


def test_no_witnesses_without_enough_points():
    pts = MarkedPointSet.from_pairs([((0.0, 0.0), 1.0)], window=WIDE)
    assert count_witnesses(pts, 1.0, WIDE, 1).count == 0
    empty = MarkedPointSet.from_pairs([], window=WIDE)
    assert count_witnesses(empty, 1.0, WIDE, 1).count == 0


def test_count_witnesses_requires_positive_radius():
    with pytest.raises(ValueError):
        count_witnesses(_two_balls(), 0.0, UNIT, 1)


def test_witness_count_is_additive_over_a_split_box():
    pts = _random_process(3)
    left = Box(lo=(0.0, 0.0), hi=(0.37, 1.0))
    right = Box(lo=(0.37, 0.0), hi=(1.0, 1.0))
    whole = count_witnesses(pts, 0.08, UNIT, 1).count
    assert whole == count_witnesses(pts, 0.08, left, 1).count + count_witnesses(
        pts, 0.08, right, 1
    ).count


def test_single_large_ball_covers():
    pts = MarkedPointSet.from_pairs([((0.5, 0.5), 1.0)], window=UNIT, margin=1.0)
    verdict = is_covered(pts, 1.0, UNIT, 1)
    assert verdict.covered
    assert verdict.witnesses == []
    assert verdict.reliable


def test_single_ball_cannot_double_cover():
    pts = MarkedPointSet.from_pairs([((0.5, 0.5), 1.0)], window=UNIT, margin=1.0)
    verdict = is_covered(pts, 1.0, UNIT, 2)
    assert not verdict.covered
    vertices = [w for w in verdict.witnesses if w.kind == "vertex"]
    assert len(vertices) == 4
    assert all(w.depth == 1 for w in vertices)


def test_two_small_balls_leave_corners_vacant():
    verdict = is_covered(_two_balls(), 0.5, UNIT, 1)
    assert not verdict.covered
    assert verdict.witness_total == len(verdict.witnesses) > 0


def test_empty_process_covers_nothing():
    empty = MarkedPointSet.from_pairs([], window=UNIT)
    verdict = is_covered(empty, 1.0, UNIT, 1)
    assert not verdict.covered
    assert len(verdict.witnesses) == 4


def test_witness_limit_keeps_the_verdict():
    full = is_covered(_two_balls(), 0.5, UNIT, 1)
    limited = is_covered(_two_balls(), 0.5, UNIT, 1, witness_limit=1)
    assert limited.covered == full.covered
    assert 1 <= len(limited.witnesses) <= len(full.witnesses)


def test_face_witness_in_three_dimensions():
    """Two balls covering the bottom corners but not the middle of the bottom edge."""
    box = Box.unit(3)
    pts = MarkedPointSet.from_pairs(
        [((0.0, 0.5, 0.5), 1.0), ((1.0, 0.5, 0.5), 1.0)], window=box, margin=1.0
    )
    verdict = is_covered(pts, 0.75, box, 1)
    assert not verdict.covered
    assert any(w.kind == "face_critical" for w in verdict.witnesses)


def test_threshold_of_two_balls():
    assert coverage_threshold(_two_balls(), UNIT, 1) == pytest.approx(
        math.sqrt(5) / 4, rel=1e-6
    )


def test_threshold_of_one_central_ball():
    pts = MarkedPointSet.from_pairs([((0.5, 0.5), 1.0)], window=UNIT, margin=1.0)
    assert coverage_threshold(pts, UNIT, 1) == pytest.approx(math.sqrt(0.5), rel=1e-6)


def test_threshold_needs_k_points():
    pts = MarkedPointSet.from_pairs([((0.5, 0.5), 1.0)], window=UNIT, margin=1.0)
    with pytest.raises(UncoverableError):
        coverage_threshold(pts, UNIT, 2)


def test_threshold_brackets_the_coverage_transition():
    pts = _random_process(5)
    r = coverage_threshold(pts, UNIT, 1, tol_rel=1e-9)
    assert is_covered(pts, r * (1 + 1e-6), UNIT, 1).covered
    assert not is_covered(pts, r * (1 - 1e-6), UNIT, 1).covered


def test_threshold_ignores_an_uncovered_bracket():
    r = coverage_threshold(_two_balls(), UNIT, 1, r_max=0.3)
    assert r == pytest.approx(math.sqrt(5) / 4, rel=1e-6)


@pytest.mark.parametrize("seed", [11, 12, 13])
def test_coverage_is_monotone(seed):
    pts = _random_process(seed)
    radii = [0.05, 0.1, 0.15, 0.2, 0.3]
    for k in (1, 2):
        verdicts = [is_covered(pts, r, UNIT, k).covered for r in radii]
        assert verdicts == sorted(verdicts)
    for r in radii:
        if is_covered(pts, r, UNIT, 2).covered:
            assert is_covered(pts, r, UNIT, 1).covered


def _with_extra_balls(pts: MarkedPointSet, seed: int, count: int = 15) -> MarkedPointSet:
    gen = RngStream(master_seed=seed, stream_index=1).generator()
    return MarkedPointSet(
        centers=np.concatenate([pts.centers, -0.3 + 1.6 * gen.random((count, 2))]),
        marks=np.concatenate([pts.marks, 0.5 + gen.random(count)]),
        window=pts.window,
        margin=pts.margin,
    )


@pytest.mark.parametrize("seed", [21, 22, 23, 24])
def test_adding_balls_never_uncovers(seed):
    pts = _random_process(seed)
    more = _with_extra_balls(pts, seed)
    for k in (1, 2):
        threshold = coverage_threshold(pts, UNIT, k, tol_rel=1e-6)
        for r in (0.9 * threshold, 1.01 * threshold, 1.2 * threshold):
            if is_covered(pts, r, UNIT, k).covered:
                assert is_covered(more, r, UNIT, k).covered
        assert is_covered(more, 1.01 * threshold, UNIT, k).covered
        assert coverage_threshold(more, UNIT, k, tol_rel=1e-6) <= threshold * (1 + 1e-5)


def test_coverage_of_a_sub_box_follows():
    pts = _random_process(14)
    inner = Box(lo=(0.2, 0.3), hi=(0.7, 0.9))
    for r in (0.1, 0.15, 0.2, 0.3):
        if is_covered(pts, r, UNIT, 1).covered:
            assert is_covered(pts, r, inner, 1).covered


def test_witness_containment():
    assert witness_containment_check(_two_balls(), 0.5, UNIT, 1)
    assert witness_containment_check(_two_balls(), 0.6, UNIT, 1)
    for seed in (21, 22):
        pts = _random_process(seed)
        for r in (0.08, 0.15):
            assert witness_containment_check(pts, r, UNIT, 1)


def test_margin_sets_and_boundary_volume():
    r = 0.01
    outer, inner = region_margin_sets(UNIT, r)
    assert outer == UNIT.expand(0.1)
    shrink = math.sqrt(2 * r)
    assert inner.lo == pytest.approx((shrink, shrink))
    steiner = 1 + 4 * 0.1 + math.pi * r
    assert boundary_volume(UNIT, r) == pytest.approx(steiner - (1 - 2 * shrink) ** 2)


def test_inner_set_vanishes_for_large_r():
    _, inner = region_margin_sets(UNIT, 0.5)
    assert inner is None
    assert boundary_volume(UNIT, 0.5) == pytest.approx(1 + 4 * math.sqrt(0.5) + math.pi * 0.5)
