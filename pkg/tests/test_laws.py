"""Tests for the mark laws and the random streams."""

import numpy as np
import pytest

from spbm_coverage.core.laws import (
    DeterministicLaw,
    DiscreteLaw,
    ModelConfigError,
    UniformLaw,
    parse_law,
)
from spbm_coverage.core.streams import RngStream, as_generator


def test_parse_compact_forms():
    assert parse_law("det:1") == DeterministicLaw(value=1.0)
    assert parse_law("unif:0:1") == UniformLaw(low=0.0, high=1.0)
    assert parse_law("disc:1@1,2@3") == DiscreteLaw(values=(1.0, 2.0), weights=(1.0, 3.0))


@pytest.mark.parametrize("text", ["det:1", "unif:0.5:1.5", "disc:1@0.25,2@0.75"])
def test_spec_parses_back(text):
    law = parse_law(text)
    assert parse_law(law.spec()) == law


@pytest.mark.parametrize(
    "text", ["gauss:1", "det:-1", "det:x", "unif:2:1", "unif:1", "disc:1@-1", "disc:0@1"]
)
def test_parse_rejects_invalid_laws(text):
    with pytest.raises(ModelConfigError):
        parse_law(text)


def test_moments():
    assert DeterministicLaw(value=2.0).moment(3) == 8.0
    assert UniformLaw(low=0.0, high=1.0).moment(2) == pytest.approx(1 / 3)
    assert DiscreteLaw(values=(1.0, 2.0), weights=(1.0, 1.0)).moment(2) == pytest.approx(2.5)


def test_clipped_moments():
    unif = UniformLaw(low=0.0, high=1.0)
    # E[min(Y, 1/2)] = 1/8 + 1/4
    assert unif.clipped_moment(1, 0.5) == pytest.approx(0.375)
    assert unif.clipped_moment(2, 5.0) == pytest.approx(1 / 3)
    assert DeterministicLaw(value=1.0).clipped_moment(2, 0.5) == 0.25
    disc = DiscreteLaw(values=(1.0, 3.0), weights=(1.0, 1.0))
    assert disc.clipped_moment(1, 2.0) == pytest.approx(1.5)


def test_samples_stay_in_support():
    gen = np.random.default_rng(0)
    unif = UniformLaw(low=0.0, high=1.0).sample(gen, 10_000)
    assert np.all(unif > 0) and np.all(unif <= 1)
    disc = DiscreteLaw(values=(1.0, 2.0), weights=(1.0, 0.0)).sample(gen, 100)
    assert set(disc.tolist()) == {1.0}
    assert DiscreteLaw(values=(1.0, 2.0), weights=(1.0, 0.0)).upper_bound == 1.0


def test_moment_conditions_hold_for_bounded_laws():
    for law in (parse_law("det:1"), parse_law("unif:0:1"), parse_law("disc:1@1,2@1")):
        assert all(law.moment_conditions(3).values())


def test_streams_are_reproducible_and_distinct():
    a = RngStream(master_seed=7, stream_index=3, lineage=(1,))
    assert np.array_equal(a.generator().random(5), a.generator().random(5))
    b = RngStream(master_seed=7, stream_index=4, lineage=(1,))
    assert not np.array_equal(a.generator().random(5), b.generator().random(5))
    child = a.child(2)
    assert child.lineage == (1, 2)
    assert not np.array_equal(child.generator().random(5), a.generator().random(5))


def test_as_generator_passes_generators_through():
    gen = np.random.default_rng(1)
    assert as_generator(gen) is gen
    assert isinstance(as_generator(RngStream(master_seed=1)), np.random.Generator)
