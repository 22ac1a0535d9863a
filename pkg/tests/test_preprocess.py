import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sing.errors import ConvergenceWarning, DegenerateInputError, DomainError, InvalidInputError
from sing.preprocess import check_data, double_center, matrix_power, standardize_iterative, whiten


def test_double_center_additive_matrix_vanishes():
    # [[1,2],[3,4]] is below the n >= 3 minimum; an additive 3x3 matrix has the
    # same equal cross-differences and must also vanish
    x = np.add.outer([1.0, 3.0, 5.0], [0.0, 1.0, 2.0])
    np.testing.assert_allclose(double_center(x), 0.0, atol=1e-12)


def test_double_center_margins_random():
    x = np.random.default_rng(0).standard_normal((5, 7))
    xc = double_center(x)
    # oracle: subtract row, column and grand means explicitly
    oracle = x - x.mean(axis=1, keepdims=True) - x.mean(axis=0, keepdims=True) + x.mean()
    np.testing.assert_allclose(xc, oracle, atol=1e-12)
    np.testing.assert_allclose(xc.sum(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(xc.sum(axis=1), 0.0, atol=1e-12)
    assert np.linalg.matrix_rank(xc) <= 4


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(3, 8), st.integers(2, 9)),
              elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_double_center_idempotent(x):
    if np.ptp(x) <= 1e-6 * max(1.0, np.max(np.abs(x))):
        return
    once = double_center(x)
    if np.max(np.abs(once)) == 0:
        return
    scale = np.max(np.abs(x))
    np.testing.assert_allclose(double_center(once), once, atol=1e-12 * scale * 10)


def test_double_center_errors():
    with pytest.raises(InvalidInputError):
        double_center([[1.0, np.nan], [1.0, 2.0], [3.0, 4.0]])
    with pytest.raises(DegenerateInputError):
        double_center(np.full((4, 3), 2.5))
    with pytest.raises(InvalidInputError):
        check_data(np.ones((2, 5)))


def test_standardize_properties():
    x = np.random.default_rng(1).standard_normal((6, 4))
    z = standardize_iterative(x, tol=1e-6)
    assert np.all(np.abs(z.var(axis=0, ddof=1) - 1) <= 1e-6)
    assert np.all(np.abs(z.mean(axis=1)) < 1e-6)
    np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-12)


def test_standardize_fixed_point():
    z = standardize_iterative(np.random.default_rng(2).standard_normal((8, 5)), tol=1e-12, max_iter=500)
    np.testing.assert_allclose(standardize_iterative(z, tol=1e-6), z, atol=1e-6)


def test_standardize_constant_column_named():
    x = np.random.default_rng(3).standard_normal((6, 4))
    x[:, 2] = 7.0
    with pytest.raises(DegenerateInputError, match="2"):
        standardize_iterative(x)


def test_standardize_nonconvergence_warns():
    x = np.random.default_rng(4).standard_normal((6, 4))
    with pytest.warns(ConvergenceWarning):
        standardize_iterative(x, tol=1e-15, max_iter=1)


def test_matrix_power_examples():
    np.testing.assert_allclose(matrix_power(np.eye(3), 0.5), np.eye(3), atol=1e-14)
    np.testing.assert_allclose(matrix_power(np.diag([4.0, 9.0]), 0.5), np.diag([2.0, 3.0]), atol=1e-14)
    np.testing.assert_allclose(matrix_power(np.diag([4.0, 0.0]), -0.5, eigen_tol=1e-10),
                               np.diag([0.5, 0.0]), atol=1e-14)


def test_matrix_power_errors():
    with pytest.raises(InvalidInputError):
        matrix_power(np.array([[1.0, 2.0], [0.0, 1.0]]), 0.5)
    with pytest.raises(DomainError):
        matrix_power(np.diag([1.0, -1.0]), 0.5)


@pytest.mark.parametrize("a", [-0.5, 0.5, 1.0])
@pytest.mark.parametrize("b", [-0.5, 0.5, 1.0])
def test_matrix_power_semigroup(a, b):
    rng = np.random.default_rng(5)
    A = rng.standard_normal((6, 4))
    m = A @ A.T  # rank 4, two null eigenvalues
    vals, vecs = np.linalg.eigh(m)
    keep = vals > 1e-10 * vals.max()
    P = vecs[:, keep] @ vecs[:, keep].T
    lhs = P @ matrix_power(m, a) @ matrix_power(m, b) @ P
    rhs = P @ matrix_power(m, a + b) @ P if a + b != 0 else P
    np.testing.assert_allclose(lhs, rhs, atol=1e-8 * max(1.0, np.abs(rhs).max()))


@pytest.mark.parametrize("divisor", ["p", "p-1"])
def test_whiten_invariants(divisor):
    x = double_center(np.random.default_rng(6).standard_normal((10, 50)))
    w = whiten(x, divisor=divisor)
    assert w.eigen_rank == 9
    p = x.shape[1] if divisor == "p" else x.shape[1] - 1
    P = w.projector
    np.testing.assert_allclose(w.whitened @ w.whitened.T / p, P, atol=1e-6)
    np.testing.assert_allclose(w.whitening @ w.inverse, P, atol=1e-8)
    np.testing.assert_allclose(w.whitening, w.whitening.T, atol=1e-12)
    assert np.linalg.eigvalsh(w.inverse).min() > -1e-10
    # oracle: direct eigendecomposition of the sample covariance
    vals, vecs = np.linalg.eigh(x @ x.T / p)
    keep = vals > 1e-10 * vals.max()
    L = (vecs[:, keep] / np.sqrt(vals[keep])) @ vecs[:, keep].T
    np.testing.assert_allclose(w.whitening, L, atol=1e-8)


def test_whiten_rank_one_rejected():
    x = double_center(np.outer([1.0, -2.0, 1.0], np.arange(5.0)))
    with pytest.raises(DegenerateInputError):
        whiten(x)
