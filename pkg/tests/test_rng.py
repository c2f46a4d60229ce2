import numpy as np
import pytest
from hypothesis import given, strategies as st

from qbstoch import rng


@given(st.integers(0, 2**63 - 1), st.text(min_size=1, max_size=8))
def test_streams_are_reproducible(seed, label):
    a = rng.normal(seed, (label, 3), (7, 2))
    b = rng.normal(seed, (label, 3), (7, 2))
    assert np.array_equal(a, b)


def test_distinct_labels_give_distinct_streams():
    a = rng.normal(1, ("x",), (64,))
    b = rng.normal(1, ("y",), (64,))
    c = rng.normal(2, ("x",), (64,))
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_shorter_request_is_a_prefix():
    long = rng.normal(5, ("prefix",), (100, 3))
    short = rng.normal(5, ("prefix",), (50, 3))
    assert np.array_equal(long[:50], short)


def test_chunks_are_keyed_by_index():
    n = rng.CHUNK + 5
    full = rng.normal(9, ("chunk",), (n,))
    tail = rng.generator(9, "chunk", 1).standard_normal(5)
    assert np.array_equal(full[rng.CHUNK:], tail)


def test_rademacher_values():
    x = rng.rademacher(3, ("signs",), (20000,))
    assert set(np.unique(x)) == {-1.0, 1.0}
    assert abs(x.mean()) < 4 / np.sqrt(x.size)


@given(st.integers(0, 2**63 - 1))
def test_derived_seeds_fit_in_63_bits(seed):
    s = rng.derive_seed(seed, "a", 1)
    assert 0 <= s < 2**63
    assert s == rng.derive_seed(seed, "a", 1)


def test_negative_labels_rejected():
    with pytest.raises(ValueError):
        rng.generator(1, -3)
