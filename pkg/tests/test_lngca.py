import numpy as np
import pytest

from sing.errors import DegenerateInputError, InvalidRankError, NumericError
from sing.lngca import estimate_mixing_ols, estimate_rank, lngca
from sing.nongauss import jb_rows
from sing.preprocess import double_center
from sing.simgen import ToySpec, generate_toy
from sing.solver import cayley_descent, feasibility


def _abs_corr(a, b):
    return abs(np.corrcoef(a, b)[0, 1])


@pytest.fixture(scope="module")
def planted():
    X, _, truth = generate_toy(ToySpec(r_j=0, r_ind=2, noise_sd=0.3, seed=11))
    return X, truth


@pytest.fixture(scope="module")
def planted_fit(planted):
    X, _ = planted
    return lngca(X, 2, restarts=10, seed=0)


def test_planted_recovery(planted, planted_fit):
    _, truth = planted
    C = np.array([[_abs_corr(s, t) for t in truth.S_ix] for s in planted_fit.S])
    # distinct true rows, each recovered
    assert sorted(C.argmax(axis=1)) == [0, 1]
    assert C.max(axis=1).min() > 0.95


def test_decomposition_invariants(planted, planted_fit):
    X, _ = planted
    d = planted_fit
    p = X.shape[1]
    assert feasibility(d.U) < 1e-8
    assert max(d.feasibility_trace) < 1e-8
    np.testing.assert_allclose(d.S @ d.S.T, p * np.eye(2), atol=1e-4 * p)
    assert np.all(np.diff(d.jb_values) <= 0)
    np.testing.assert_allclose(d.jb_values, jb_rows(d.S), rtol=1e-12)
    np.testing.assert_allclose(d.M, d.whitener.inverse @ d.U.T, atol=1e-12)
    assert np.all(np.diff(d.objective_trace) <= 1e-12)
    assert d.objective == min(d.restart_objectives)


def test_deterministic(planted):
    X, _ = planted
    a = lngca(X, 2, restarts=3, seed=5)
    b = lngca(X, 2, restarts=3, seed=5)
    assert np.array_equal(a.U, b.U) and np.array_equal(a.jb_values, b.jb_values)


def test_threads_do_not_change_result(planted, monkeypatch):
    X, _ = planted
    a = lngca(X, 2, restarts=4, seed=2)
    monkeypatch.setenv("SING_THREADS", "3")
    b = lngca(X, 2, restarts=4, seed=2)
    assert np.array_equal(a.U, b.U)


def test_feature_permutation_invariance(planted):
    X, _ = planted
    perm = np.random.default_rng(0).permutation(X.shape[1])
    a = lngca(X, 2, restarts=5, seed=1)
    b = lngca(X[:, perm], 2, restarts=5, seed=1)
    np.testing.assert_allclose(a.jb_values, b.jb_values, atol=1e-6)


def test_gaussian_below_null_quantile():
    rng = np.random.default_rng(42)
    n, p = 10, 200
    null = [lngca(rng.standard_normal((n, p)), 1, restarts=3, seed=k).jb_values[0] for k in range(40)]
    fit = lngca(rng.standard_normal((n, p)), 1, restarts=3, seed=99)
    assert fit.jb_values[0] < np.quantile(null, 0.99)


def test_rank_bounds():
    X = np.random.default_rng(0).standard_normal((8, 30))
    with pytest.raises(InvalidRankError):
        lngca(X, 7)
    with pytest.raises(InvalidRankError):
        lngca(X, 0)


def test_numeric_error_carries_iteration():
    U0 = np.eye(3)[:1]

    def value(Us):
        return np.nan

    with pytest.raises(NumericError) as info:
        cayley_descent([U0], value, lambda Us: (np.nan, [np.zeros_like(U0)]), restart=4)
    assert info.value.restart == 4 and info.value.iteration == 0


def test_ols_exact_recovery():
    rng = np.random.default_rng(3)
    n, p, r = 9, 300, 3
    Q, _ = np.linalg.qr(rng.standard_normal((p, r)))
    S = np.sqrt(p) * Q.T
    M = rng.standard_normal((n, r))
    np.testing.assert_allclose(estimate_mixing_ols(S, M @ S), M, atol=1e-10)
    # residual orthogonal to the row space of S leaves the estimate unchanged
    N = rng.standard_normal((n, p))
    N = N - (N @ S.T) @ S / p
    np.testing.assert_allclose(estimate_mixing_ols(S, M @ S + N), M, atol=1e-10)
    np.testing.assert_allclose(estimate_mixing_ols(S, M @ S, full=False), p * M, atol=1e-8)


def test_ols_single_component():
    s = np.tile([1.0, -1.0, 2.0, -2.0], 5)[None, :]
    data = np.vstack([2 * s[0]] * 4)
    np.testing.assert_allclose(estimate_mixing_ols(s, data), 2.0, atol=1e-12)


def test_ols_rank_deficient():
    s = np.tile([1.0, -1.0], 5)
    with pytest.raises(DegenerateInputError):
        estimate_mixing_ols(np.vstack([s, s]), np.ones((3, 10)))


def test_rank_screen_counts():
    rng = np.random.default_rng(8)
    n, p = 16, 400
    sources = np.zeros((3, p))
    for k in range(3):
        sources[k, rng.choice(p, 12, replace=False)] = 6.0
    X = rng.standard_normal((n, 3)) @ sources + 0.2 * rng.standard_normal((n, p))
    rank, thr = estimate_rank(X, r_max=6, n_null=10, seed=0)
    assert rank >= 3 and thr > 0
    rank_g, _ = estimate_rank(rng.standard_normal((n, p)), r_max=6, n_null=10, seed=0)
    assert rank_g <= 1


def test_centering_flag_matches_manual():
    X = np.random.default_rng(4).exponential(size=(8, 60))
    a = lngca(X, 2, restarts=2, seed=0)
    b = lngca(double_center(X), 2, restarts=2, seed=0, center=False)
    np.testing.assert_allclose(a.S, b.S, atol=1e-10)
