import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sing.errors import InvalidInputError
from sing.simgen import ToySpec, block_means, generate_toy, loading_jb, net_to_vec, vec_to_net


@pytest.fixture(scope="module")
def toy():
    return generate_toy(ToySpec(seed=0))


def test_default_shapes(toy):
    X, Y, truth = toy
    assert X.shape == (48, 1089) and Y.shape == (48, 4950)
    assert truth.M_j.shape == (48, 2)


def test_design_constants(toy):
    _, _, truth = toy
    np.testing.assert_array_equal(truth.D_x, [1.0, 1.0])
    np.testing.assert_array_equal(truth.D_y, [-5.0, 2.0])
    mu1 = np.r_[np.ones(24), -np.ones(24)]
    np.testing.assert_array_equal(block_means((1, -1), 48), mu1)
    np.testing.assert_array_equal(block_means((-1, 1), 48), -mu1)
    mu3x = np.r_[-np.ones(12), np.ones(12), -np.ones(12), np.ones(12)]
    np.testing.assert_array_equal(block_means((-1, 1, -1, 1), 48), mu3x)
    mu3y = np.concatenate([s * np.ones(6) for s in (-1, 1, -1, 1, -1, 1, -1, -1)])
    np.testing.assert_array_equal(block_means((-1, 1, -1, 1, -1, 1, -1, -1), 48), mu3y)


def test_score_means_follow_blocks():
    # averaged over many seeds the joint scores approach their block means
    means = np.mean([generate_toy(ToySpec(n=12, grid=6, nodes=6, r_ind=1, seed=s))[2].M_j
                     for s in range(300)], axis=0)
    np.testing.assert_allclose(means[:, 0], np.r_[np.ones(6), -np.ones(6)], atol=0.25)


def test_loadings_standardized_and_nongaussian(toy):
    _, _, truth = toy
    for name in ("S_jx", "S_jy", "S_ix", "S_iy"):
        S = getattr(truth, name)
        np.testing.assert_allclose(S.mean(axis=1), 0.0, atol=1e-10)
        np.testing.assert_allclose(S.var(axis=1), 1.0, atol=1e-10)
    Sx = np.vstack([truth.S_jx, truth.S_ix])
    np.testing.assert_allclose(Sx @ Sx.T, Sx.shape[1] * np.eye(4), atol=1e-8)
    for values in loading_jb(truth).values():
        assert np.all(values > 0.5)


def test_noiseless_joint_only():
    X, Y, truth = generate_toy(ToySpec(r_ind=0, noise_sd=0.0, seed=3))
    np.testing.assert_allclose(X, truth.M_j @ (truth.D_x[:, None] * truth.S_jx), atol=1e-12)
    np.testing.assert_allclose(Y, truth.M_j @ (truth.D_y[:, None] * truth.S_jy), atol=1e-12)


def test_seeded():
    a = generate_toy(ToySpec(grid=10, nodes=12, seed=5))
    b = generate_toy(ToySpec(grid=10, nodes=12, seed=5))
    c = generate_toy(ToySpec(grid=10, nodes=12, seed=6))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert not np.array_equal(a[0], c[0])


def test_nodes_ten():
    _, Y, _ = generate_toy(ToySpec(nodes=10, grid=8, seed=0))
    assert Y.shape == (48, 45)


def test_gaussian_part_orthogonal_to_loadings():
    X, _, truth = generate_toy(ToySpec(seed=1))
    signal = truth.M_j @ (truth.D_x[:, None] * truth.S_jx) + truth.M_ix @ truth.S_ix
    resid = X - signal
    Sx = np.vstack([truth.S_jx, truth.S_ix])
    np.testing.assert_allclose(resid @ Sx.T, 0.0, atol=1e-8 * np.abs(X).max() * X.shape[1])


def test_spec_validation():
    with pytest.raises(InvalidInputError):
        generate_toy(ToySpec(n=5, r_j=2, r_ind=2))
    with pytest.raises(InvalidInputError):
        generate_toy(ToySpec(noise_sd=-1.0))
    with pytest.raises(InvalidInputError):
        generate_toy(ToySpec(d_y=(1.0,)))


def test_vec_to_net_small():
    net = vec_to_net([7.0], diag_value=0.5)
    np.testing.assert_array_equal(net, [[0.5, 7.0], [7.0, 0.5]])
    a, b, c = 1.0, 2.0, 3.0
    net = vec_to_net([a, b, c], diag_value=0.0)
    # 1-based (2,1)=a, (3,1)=b, (3,2)=c
    assert net[1, 0] == a and net[2, 0] == b and net[2, 1] == c
    np.testing.assert_array_equal(net, net.T)
    assert np.all(np.isnan(np.diag(vec_to_net([a, b, c]))))


def test_vec_to_net_rejects_non_triangular():
    with pytest.raises(InvalidInputError):
        vec_to_net(np.ones(5))


def test_round_trip_4950():
    v = np.random.default_rng(0).standard_normal(4950)
    net = vec_to_net(v)
    assert net.shape == (100, 100)
    np.testing.assert_array_equal(net_to_vec(net), v)
    # column-major lower triangle, checked against an explicit double loop
    expect = [net[i, j] for j in range(100) for i in range(j + 1, 100)]
    np.testing.assert_array_equal(v, expect)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2**31))
def test_round_trip_property(k, seed):
    v = np.random.default_rng(seed).standard_normal(k * (k - 1) // 2)
    net = vec_to_net(v, diag_value=0.0)
    np.testing.assert_array_equal(net, net.T)
    np.testing.assert_array_equal(net_to_vec(net), v)
