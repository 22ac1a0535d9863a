import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sing.errors import DegenerateInputError, InvalidInputError
from sing.nongauss import jb_gradient, jb_rows, jb_statistic, jb_total, sign_normalize, skewness


def brute_jb(s, alpha=0.8):
    p = len(s)
    m3 = sum(v ** 3 for v in s) / p
    m4 = sum(v ** 4 for v in s) / p
    return alpha * m3 ** 2 + (1 - alpha) * (m4 - 3) ** 2


def standardized(v):
    v = np.asarray(v, dtype=np.float64)
    v = v - v.mean()
    return v / v.std()


def test_alternating_signs():
    s = np.tile([1.0, -1.0], 50)
    assert abs(jb_statistic(s) - 0.8) <= 1e-12


def test_moment_matched_is_zero():
    r3 = np.sqrt(3.0)
    s = np.array([r3, -r3, 0.0, 0.0, 0.0, 0.0])
    assert abs(jb_statistic(s)) <= 1e-12


def test_against_brute_force():
    s = standardized(np.random.default_rng(0).standard_normal(10000) ** 2)
    assert abs(jb_statistic(s) - brute_jb(s.tolist())) <= 1e-12 * max(1.0, brute_jb(s.tolist()))


def test_alpha_weighting():
    s = standardized(np.random.default_rng(1).exponential(size=500))
    assert abs(jb_statistic(s, 0.3) - brute_jb(s.tolist(), 0.3)) < 1e-10


def test_total_additivity():
    S = np.vstack([standardized(np.random.default_rng(k).gamma(2.0, size=5000)) for k in range(3)])
    assert abs(jb_total(S) - sum(jb_statistic(row) for row in S)) <= 1e-12
    assert jb_total(S[:1]) == jb_statistic(S[0])
    assert abs(jb_total(np.vstack([S[0], S[0]])) - 2 * jb_statistic(S[0])) <= 1e-12


def test_input_checks():
    with pytest.raises(DegenerateInputError):
        jb_statistic(np.zeros(10))
    with pytest.raises(InvalidInputError):
        jb_statistic(np.arange(10.0))
    with pytest.raises(InvalidInputError):
        jb_statistic(np.tile([1.0, -1.0], 5), alpha=1.5)
    bad = np.vstack([np.tile([1.0, -1.0], 5), np.arange(10.0)])
    with pytest.raises(InvalidInputError, match="row 1"):
        jb_total(bad)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_permutation_and_sign_invariance(seed):
    rng = np.random.default_rng(seed)
    s = standardized(rng.exponential(size=64))
    base = jb_statistic(s)
    assert abs(jb_statistic(rng.permutation(s)) - base) < 1e-12
    assert abs(jb_statistic(-s) - base) < 1e-12


def _fd_grad(f, u, h=1e-5):
    g = np.zeros_like(u)
    for i in range(u.size):
        e = np.zeros_like(u)
        e[i] = h
        g[i] = (f(u + e) - f(u - e)) / (2 * h)
    return g


def _whitened(rng, n, p):
    X = rng.exponential(size=(n, p)) ** 1.5
    X = X - X.mean(axis=1, keepdims=True)
    vals, vecs = np.linalg.eigh(X @ X.T / p)
    return (vecs / np.sqrt(vals)) @ vecs.T @ X


@pytest.mark.parametrize("seed", range(20))
def test_gradient_finite_differences(seed):
    rng = np.random.default_rng(seed)
    Xw = _whitened(rng, 10, 200)
    u = rng.standard_normal(10)
    u /= np.linalg.norm(u)
    g = jb_gradient(u, Xw)
    fd = _fd_grad(lambda v: jb_rows(v @ Xw)[0], u)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-5


def test_gradient_on_flipped_data():
    rng = np.random.default_rng(30)
    Xw = _whitened(rng, 6, 300)
    u = rng.standard_normal(6)
    u /= np.linalg.norm(u)
    flipped = Xw.copy()
    flipped[:, ::2] *= -1
    g = jb_gradient(u, flipped)
    fd = _fd_grad(lambda v: jb_rows(v @ flipped)[0], u)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-5
    # negating all of Xw negates s; f is even in s, so the gradient is unchanged
    np.testing.assert_allclose(jb_gradient(u, -Xw), jb_gradient(u, Xw), atol=1e-10)


def test_gradient_zero_at_moment_matched():
    r3 = np.sqrt(3.0)
    s = np.array([r3, -r3, 0.0, 0.0, 0.0, 0.0])
    Xw = np.vstack([s, np.array([1.0, 1.0, -1.0, 1.0, -1.0, -1.0])])
    np.testing.assert_allclose(jb_gradient(np.array([1.0, 0.0]), Xw), 0.0, atol=1e-12)


def test_gradient_shape_mismatch():
    with pytest.raises(InvalidInputError):
        jb_gradient(np.ones(3), np.ones((4, 10)))


def test_sign_normalize_properties():
    rng = np.random.default_rng(7)
    S = rng.exponential(size=(4, 1000)) * np.array([[1], [-1], [1], [-1]])
    M = rng.standard_normal((6, 4))
    S2, M2 = sign_normalize(S, M)
    assert np.all(skewness(S2) >= 0)
    assert np.array_equal(M2 @ S2, M @ S)
    np.testing.assert_array_equal(S2[1], -S[1])
    S3, M3 = sign_normalize(S2, M2)
    assert np.array_equal(S3, S2) and np.array_equal(M3, M2)


def test_sign_normalize_zero_skew_untouched():
    s = np.array([[1.0, -1.0, 2.0, -2.0]])
    out, _ = sign_normalize(-s)
    np.testing.assert_array_equal(out, -s)


def test_skewness_oracle():
    x = np.random.default_rng(8).gamma(3.0, size=(2, 400))
    c = x - x.mean(axis=1, keepdims=True)
    expect = (c ** 3).mean(axis=1) / (c ** 2).mean(axis=1) ** 1.5
    np.testing.assert_allclose(skewness(x), expect, rtol=1e-12)
