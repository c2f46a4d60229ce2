import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qbstoch import rng
from qbstoch.errors import StructuralError, ValidationError
from qbstoch.gammaop import (FiniteRankOperator, basis_test_partial_sums, check_gamma_sandwich,
                             check_ideal_property, check_matrix_contraction,
                             check_square_function_bracket, check_square_function_hilbert,
                             gamma_basis_norm, gamma_sup_norm, operator_quasi_norm, random_ons,
                             random_operator, spectral_norm, square_function_norm)
from qbstoch.qspace import ell
from qbstoch.report import FAIL, PASS


def test_operator_validation():
    with pytest.raises(StructuralError):
        FiniteRankOperator(np.eye(3, 2), np.ones((3, 2)), ell(2, 2))
    with pytest.raises(StructuralError):
        FiniteRankOperator(np.eye(2), np.ones((3, 2)), ell(2, 2))
    with pytest.raises(ValidationError):
        FiniteRankOperator(np.array([[1.0, 0.0], [1.0, 0.0]]), np.ones((2, 2)), ell(2, 2))


def test_small_gram_drift_is_repaired():
    ons = np.eye(2) + 1e-8
    R = FiniteRankOperator(ons, np.ones((2, 2)), ell(2, 2))
    assert np.allclose(R.ons @ R.ons.T, np.eye(2), atol=1e-14)


def test_roundtrip_and_apply():
    R = random_operator(ell(0.5, 3), 2, 4, 0)
    S = FiniteRankOperator.from_dict(R.to_dict())
    assert np.array_equal(R.matrix, S.matrix)
    h = R.ons[0]
    assert np.allclose(R.apply(h)[0], R.vectors[0])


@given(st.integers(0, 1000))
def test_gamma_norm_is_invariant_under_orthogonal_mixing(seed):
    R = random_operator(ell(0.5, 3), 3, 4, seed)
    O = random_ons(rng.generator(seed, "mix"), 3, 3)
    mixed = FiniteRankOperator(O @ R.ons, np.tensordot(O, R.vectors, axes=1), R.space)
    assert np.allclose(mixed.matrix, R.matrix, atol=1e-12)
    a = gamma_basis_norm(R, 1.0, 4000, 1)
    b = gamma_basis_norm(mixed, 1.0, 4000, 2)
    assert abs(a.value - b.value) < 5 * math.hypot(a.std_error, b.std_error)


def test_hilbert_gamma_norm_is_hilbert_schmidt():
    R = random_operator(ell(2, 4), 3, 5, 2)
    est = gamma_sup_norm(R, 2.0, 8, 100000, 3)
    hs = math.sqrt(np.sum(R.matrix ** 2))
    assert abs(est.basis_value - hs) < 4 * est.basis_error


@pytest.mark.parametrize("s", [0.5, 1.0, 3.0])
@pytest.mark.parametrize("p", [0.5, 2.0])
def test_sandwich(s, p):
    R = random_operator(ell(s, 4), 3, 5, 7)
    rec = check_gamma_sandwich(R, p, 16, 20000, 1)
    assert rec.verdict == PASS
    assert rec.details["lower"] <= rec.details["upper"]


def test_norm_helpers():
    A = np.diag([3.0, 1.0])
    assert spectral_norm(A) == pytest.approx(3.0)
    assert spectral_norm(np.zeros((2, 2))) == 0.0
    assert operator_quasi_norm(A, ell(2, 2), ell(2, 2)) == pytest.approx(3.0)
    # from l^{1/2}: the largest column norm
    assert operator_quasi_norm(np.array([[1.0, 1.0], [0.0, 1.0]]), ell(0.5, 2), ell(1, 2)) == pytest.approx(2.0)
    with pytest.raises(StructuralError):
        operator_quasi_norm(np.ones((2, 3)), ell(2, 2), ell(2, 2))


def test_ideal_property_passes():
    R = random_operator(ell(0.5, 3), 2, 4, 5)
    U = np.array([[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.2, 0.0, 1.0]])
    V = random_ons(rng.generator(1, "v"), 4, 4)
    assert check_ideal_property(U, R, V, 1.0, 20000, 2).verdict == PASS


def test_contraction_counterexample_at_unit_constant():
    from qbstoch.suites import EXAMPLE_SPACE, EXAMPLE_X, EXAMPLE_Y

    A = np.array([[1.0, 0.0]])
    vecs = [EXAMPLE_X, EXAMPLE_Y]
    proper = check_matrix_contraction(A, vecs, 2.0, 1, 0, EXAMPLE_SPACE, method="quadrature")
    forced = check_matrix_contraction(A, vecs, 2.0, 1, 0, EXAMPLE_SPACE, constant=1.0, method="quadrature")
    assert proper.verdict == PASS
    assert forced.verdict == FAIL
    assert forced.estimate > 1.0


def test_orthogonal_matrix_contracts_with_constant_one():
    sp = ell(0.5, 2)
    A = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)
    rec = check_matrix_contraction(A, np.eye(2), 1.0, 200000, 0, space=sp, constant=1.0)
    assert abs(rec.estimate - 1.0) < 4 * rec.std_error


def test_square_function_in_hilbert_space():
    R = random_operator(ell(2, 4), 3, 5, 8)
    kernel = np.moveaxis(R.vectors, 0, -1)
    assert square_function_norm(kernel, R.space) == pytest.approx(math.sqrt(np.sum(R.vectors ** 2)))
    assert check_square_function_hilbert(R, 100000, 4).verdict == PASS
    with pytest.raises(StructuralError):
        square_function_norm(np.ones((3, 2)), R.space)


def test_square_function_bracket_detects_drift():
    ops = [random_operator(ell(3, 4), 3, 5, i) for i in range(4)]
    free = check_square_function_bracket(ops, 2.0, 5000, 0)
    assert free.verdict == PASS
    off = check_square_function_bracket(ops, 2.0, 5000, 0, bracket=(10.0, 11.0))
    assert off.verdict == FAIL


def test_basis_partial_sums_increase_in_hilbert_space():
    R = random_operator(ell(2, 3), 3, 3, 1)
    values = [e.value for e in basis_test_partial_sums(R, 2.0, 20000, 0)]
    assert all(b >= a for a, b in zip(values, values[1:]))
