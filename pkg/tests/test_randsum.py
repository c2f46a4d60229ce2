import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from qbstoch.errors import CapacityError, ValidationError
from qbstoch.qspace import ell, rnorm
from qbstoch.randsum import (RandomSum, check_levy, check_symmetrization, estimate_cotype_constant,
                             estimate_kahane_constant, gaussian_quadrature_expectation, moment_estimate,
                             quadrature_expectation_2d, rademacher_enumerate, sample_gaussian_sum)
from qbstoch.report import PASS


def test_quadrature_reproduces_gaussian_moments():
    # E|g|^p = 2^(p/2) Gamma((p+1)/2) / sqrt(pi); p = 4 gives 3
    assert math.isclose(gaussian_quadrature_expectation(lambda g: g[:, 0] ** 4, 1), 3.0, rel_tol=1e-12)
    value = quadrature_expectation_2d([1.0, 0.0], [0.0, 1.0], 2.0, space=ell(2, 2))
    assert math.isclose(value, 2.0, rel_tol=1e-12)


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_quadrature_matches_monte_carlo(s):
    sp = ell(s, 2)
    x, y = np.array([1.0, 0.5]), np.array([-0.3, 2.0])
    exact = quadrature_expectation_2d(x, y, 1.0, space=sp)
    batch = sample_gaussian_sum([x, y], 100000, 3, space=sp)
    est = batch.moment(1.0)
    assert abs(est.value - exact) < 4 * est.std_error


def test_quadrature_node_limits():
    with pytest.raises(ValidationError):
        gaussian_quadrature_expectation(lambda g: g[:, 0], 1, nodes=8)
    with pytest.raises(ValidationError):
        gaussian_quadrature_expectation(lambda g: g[:, 0], 1, nodes=400)


@given(arrays(np.float64, (4, 3), elements=st.floats(-5, 5, allow_nan=False)),
       st.sampled_from([0.5, 1.0, 2.0]), st.sampled_from([0.5, 1.0, 3.0]))
def test_enumeration_matches_brute_force(vectors, s, p):
    sp = ell(s, 3)
    brute = np.mean([rnorm(sp, np.array(signs) @ vectors) ** p
                     for signs in itertools.product([-1.0, 1.0], repeat=4)])
    assert math.isclose(rademacher_enumerate(vectors, p, sp), brute, rel_tol=1e-10, abs_tol=1e-12)


def test_enumeration_capacity():
    with pytest.raises(CapacityError):
        rademacher_enumerate(np.ones((21, 1)), 1.0, ell(2, 1))


def test_moment_estimate_edge_cases():
    assert moment_estimate(np.zeros(5), 1.0).value == 0.0
    est = moment_estimate(np.ones(10) * 2.0, 3.0)
    assert est.value == pytest.approx(2.0) and est.std_error == pytest.approx(0.0)
    boot = moment_estimate(np.random.default_rng(0).exponential(size=2000), 2.0, bootstrap=200, seed=1)
    delta = moment_estimate(np.random.default_rng(0).exponential(size=2000), 2.0)
    assert boot.std_error == pytest.approx(delta.std_error, rel=0.3)
    with pytest.raises(ValidationError):
        moment_estimate([], 1.0)
    with pytest.raises(ValidationError):
        moment_estimate([1.0], 0.0)


def test_symmetrization_sharp_example():
    # in l^{1/2}, x = e_1 and Y = eps e_2: both sides give the constant 2 at p = 1/2 case r=1/2
    sp = ell(0.5, 2)
    X = RandomSum(sp, [[1.0, 0.0]], "rademacher", "x")
    Y = RandomSum(sp, [[0.0, 1.0]], "rademacher", "y")
    rec = check_symmetrization(X, Y, 1.0, 1000, 0)
    assert rec.verdict == PASS and rec.method == "enumeration"
    assert rec.estimate <= rec.bound


@pytest.mark.parametrize("method", ["auto", "monte-carlo"])
def test_symmetrization_passes(method):
    sp = ell(0.5, 3)
    g = np.random.default_rng(4)
    X = RandomSum(sp, g.standard_normal((3, 3)), "rademacher", "x")
    Y = RandomSum(sp, g.standard_normal((4, 3)), "rademacher", "y")
    assert check_symmetrization(X, Y, 0.5, 20000, 1, method=method).verdict == PASS


def test_symmetrization_rejects_shared_stream():
    sp = ell(1, 2)
    X = RandomSum(sp, [[1.0, 0.0]], "gauss", "same")
    with pytest.raises(ValidationError):
        check_symmetrization(X, RandomSum(sp, [[0.0, 1.0]], "gauss", "same"), 1.0, 10, 0)


def test_random_sum_rejects_asymmetric_kind():
    with pytest.raises(ValidationError):
        RandomSum(ell(2, 1), [[1.0]], "poisson")


def test_levy_records():
    sp = ell(0.5, 4)
    spec = RandomSum(sp, np.random.default_rng(2).standard_normal((6, 4)), "gauss", "levy")
    records = check_levy(spec, np.linspace(0.5, 20, 6), 20000, 7)
    assert len(records) == 3
    assert all(r.verdict == PASS for r in records)


def test_partial_sums_end_at_realization():
    spec = RandomSum(ell(1, 2), np.eye(2), "gauss", "p")
    c = spec.coefficients(5, 0)
    assert np.allclose(spec.partial_sums(c)[:, -1], spec.realize(c))


def test_kahane_and_cotype_are_at_least_one():
    sp = ell(0.5, 3)
    est = estimate_kahane_constant(np.eye(3), 2.0, 1.0, 20000, 0, space=sp)
    assert est.value >= 1.0
    assert estimate_kahane_constant(np.eye(3), 1.0, 1.0, 10, 0, space=sp).value == 1.0
    assert estimate_cotype_constant(ell(2, 3), 2.0, 4, 6, 0) == pytest.approx(1.0)
    with pytest.raises(CapacityError):
        estimate_cotype_constant(ell(2, 3), 2.0, 1, 13, 0)
    with pytest.raises(ValidationError):
        estimate_cotype_constant(ell(2, 3), 1.5, 1, 3, 0)


def test_sample_batches_are_reproducible():
    sp = ell(2, 2)
    a = sample_gaussian_sum([[1.0, 2.0]], 50, 9, space=sp)
    b = sample_gaussian_sum([[1.0, 2.0]], 50, 9, space=sp)
    assert np.array_equal(a.samples, b.samples)
    assert len(a.vectors()) == 50
