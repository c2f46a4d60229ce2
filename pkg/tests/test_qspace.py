import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from qbstoch.errors import StructuralError, ValidationError
from qbstoch.qspace import (Kind, RSpaceDescriptor, RVector, aoki_rolewicz_exponent, as_vectors,
                            besov_grid, ell, grid_lr, quasi_constant, rnorm, symmetrization_constant)

coords = arrays(np.float64, 4, elements=st.floats(-1e3, 1e3, allow_nan=False))
exponents = st.floats(0.2, 4.0)


@pytest.mark.parametrize("s, r", [(0.5, 0.5), (1.0, 1.0), (2.0, 1.0), (3.0, 1.0)])
def test_r_exponent_separate_from_lebesgue_exponent(s, r):
    assert ell(s, 4).r == r


def test_besov_r_is_min_of_p_q_one():
    assert besov_grid(0.3, 0.5, 2.0, 16).r == 0.5
    assert besov_grid(0.3, 3.0, 2.0, 16).r == 1.0


@pytest.mark.parametrize("s, x, expected", [
    (2.0, [3.0, 4.0], 5.0),
    (1.0, [1.0, -2.0], 3.0),
    (0.5, [1.0, 1.0], 4.0),
    (0.5, [0.25, 0.25], 1.0),
])
def test_finite_lr_norms(s, x, expected):
    assert math.isclose(rnorm(ell(s, 2), x), expected, rel_tol=1e-14)


def test_grid_lr_uses_cell_average():
    assert math.isclose(rnorm(grid_lr(2.0, 4), np.ones(4)), 1.0)
    assert math.isclose(rnorm(grid_lr(1.0, 4), [4.0, 0, 0, 0]), 1.0)


@given(coords, coords, exponents)
def test_r_triangle_inequality(x, y, s):
    sp = ell(s, 4)
    r = sp.r
    assert rnorm(sp, x + y) ** r <= rnorm(sp, x) ** r + rnorm(sp, y) ** r + 1e-9 * (1 + rnorm(sp, x) ** r + rnorm(sp, y) ** r)


@given(coords, exponents, st.floats(-50, 50))
def test_absolute_homogeneity(x, s, c):
    sp = ell(s, 4)
    assert math.isclose(rnorm(sp, c * x), abs(c) * rnorm(sp, x), rel_tol=1e-10, abs_tol=1e-300)


def test_batched_norms_match_single():
    x = np.random.default_rng(0).standard_normal((5, 4))
    sp = ell(0.5, 4)
    assert np.allclose(rnorm(sp, x), [rnorm(sp, row) for row in x])


def test_small_exponent_does_not_underflow():
    sp = ell(0.1, 3)
    assert math.isclose(rnorm(sp, [1e-300, 1e-300, 0.0]), 1e-300 * 2 ** 10, rel_tol=1e-10)


@given(st.floats(0.01, 1.0))
def test_aoki_rolewicz_inverts_quasi_constant(r):
    assert math.isclose(aoki_rolewicz_exponent(quasi_constant(r)), r, rel_tol=1e-10)


@pytest.mark.parametrize("r, p, expected", [(0.5, 2.0, 2.0), (1.0, 2.0, 1.0), (0.5, 0.25, 8.0), (1.0, 0.5, 2.0)])
def test_symmetrization_constant(r, p, expected):
    assert math.isclose(symmetrization_constant(r, p), expected)


def test_descriptor_roundtrip_and_label():
    for sp in (ell(0.5, 4), grid_lr(2.0, 8), besov_grid(0.3, 2.0, 1.0, 16)):
        assert RSpaceDescriptor.from_dict(sp.to_dict()) == sp
        assert sp.label()
    assert ell(2, 3).kind == "FiniteLr" and ell(2, 3).kind is Kind.FINITE_LR
    assert ell(2, 3).is_hilbert and not ell(1, 3).is_hilbert


def test_validation_errors():
    with pytest.raises(ValidationError):
        ell(0.0, 2)
    with pytest.raises(ValidationError):
        RSpaceDescriptor(Kind.FINITE_LR, (0,))
    with pytest.raises(StructuralError):
        RVector(ell(2, 3), np.zeros(2))
    with pytest.raises(ValidationError):
        RVector(ell(2, 2), [np.nan, 0.0])
    with pytest.raises(StructuralError):
        rnorm(ell(2, 3), np.zeros(4))
    with pytest.raises(ValidationError):
        as_vectors(ell(2, 2), [])
    with pytest.raises(ValidationError):
        quasi_constant(1.5)


def test_rvector_is_read_only():
    v = RVector(ell(2, 2), [3.0, 4.0])
    assert v.norm() == 5.0
    with pytest.raises(ValueError):
        v.data[0] = 1.0
