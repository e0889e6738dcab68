import time

import numpy as np
import pytest

from kernelcg.kernels import gram, se_kernel
from kernelcg.structured import (
    GridSpec,
    MaskedToeplitzSpec,
    grid_dataset,
    grid_spec,
    kron_mvm,
    masked_mvm,
    masked_toeplitz_spec,
    toeplitz_mvm,
)


def dense_from_factors(factors):
    out = np.asarray(factors[0])
    for K in factors[1:]:
        out = np.kron(out, K)
    return out


def test_kron_mvm_single_factor_is_dense():
    rng = np.random.default_rng(0)
    K = rng.standard_normal((6, 6))
    v = rng.standard_normal(6)
    assert np.allclose(kron_mvm([K], v), K @ v)


def test_kron_mvm_two_factor_hand_case():
    K1 = np.diag([1.0, 2.0])
    K2 = np.ones((2, 2))
    v = np.array([1.0, 0.0, 0.0, 0.0])
    assert np.allclose(kron_mvm([K1, K2], v), [1.0, 1.0, 0.0, 0.0])
    assert np.allclose(dense_from_factors([K1, K2]) @ v, [1.0, 1.0, 0.0, 0.0])


def test_kron_mvm_matches_dense_grid_gram():
    kernel = se_kernel([1.0, 0.5, 2.0], 1.3)
    rng = np.random.default_rng(1)
    axes = [np.sort(rng.uniform(-1, 1, 5)) for _ in range(3)]
    spec = grid_spec(kernel, axes)
    K_dense = gram(kernel, spec.points())
    v = rng.standard_normal(spec.size)
    got = kron_mvm(spec.factors, v)
    want = K_dense @ v
    assert np.linalg.norm(got - want) <= 1e-10 * np.linalg.norm(want)


def test_grid_factors_reproduce_dense_gram():
    kernel = se_kernel([1.0, 1.0, 1.0], 2.0)
    rng = np.random.default_rng(2)
    axes = [np.sort(rng.uniform(-1, 1, 4)) for _ in range(3)]
    spec = grid_spec(kernel, axes)
    assert np.allclose(dense_from_factors(spec.factors), gram(kernel, spec.points()), rtol=1e-10)


def test_grid_requires_product_kernel():
    from kernelcg.kernels import matern52_kernel

    with pytest.raises(ValueError):
        grid_spec(matern52_kernel([1.0]), [np.linspace(0, 1, 4)])


def test_grid_operator_probe_invariants():
    kernel = se_kernel([1.0, 1.0], 1.0)
    spec = grid_spec(kernel, [np.linspace(-1, 1, 4), np.linspace(-1, 1, 5)])
    op = spec.operator(noise=0.3)
    rng = np.random.default_rng(3)
    u, v = rng.standard_normal((2, spec.size))
    assert np.allclose(op.apply(u + v), op.apply(u) + op.apply(v), rtol=1e-10)
    assert u @ op.apply(v) == pytest.approx(v @ op.apply(u), rel=1e-10)


def test_kron_runtime_subquadratic():
    def timed(g):
        kernel = se_kernel([1.0, 1.0, 1.0], 1.0)
        spec = grid_spec(kernel, [np.linspace(-1, 1, g)] * 3)
        v = np.random.default_rng(4).standard_normal(spec.size)
        best = np.inf
        for _ in range(3):
            start = time.perf_counter()
            kron_mvm(spec.factors, v)
            best = min(best, time.perf_counter() - start)
        return best

    t_small = timed(16)  # N = 4096
    t_large = timed(32)  # N = 32768
    ratio_quadratic = (32768 / 4096) ** 2
    assert t_large < ratio_quadratic * max(t_small, 1e-5)


def test_toeplitz_identity_row():
    v = np.random.default_rng(5).standard_normal(9)
    first_row = np.zeros(9)
    first_row[0] = 1.0
    assert np.allclose(toeplitz_mvm(first_row, v), v, atol=1e-12)


def test_toeplitz_hand_case():
    got = toeplitz_mvm([2.0, 1.0, 0.0], [1.0, 1.0, 1.0])
    assert np.allclose(got, [3.0, 4.0, 3.0], atol=1e-12)


def test_toeplitz_matches_dense():
    rng = np.random.default_rng(6)
    t = 257
    first_row = np.exp(-0.5 * (np.arange(t) / 40.0) ** 2)
    v = rng.standard_normal(t)
    dense = np.array([[first_row[abs(i - j)] for j in range(t)] for i in range(t)])
    got = toeplitz_mvm(first_row, v)
    want = dense @ v
    assert np.linalg.norm(got - want) <= 1e-9 * np.linalg.norm(want)


def test_masked_full_mask_reduces_to_toeplitz():
    rng = np.random.default_rng(7)
    t = 32
    first_row = np.exp(-np.arange(t) / 5.0)
    spec = MaskedToeplitzSpec(grid_size=t, first_row=first_row, mask=np.arange(t))
    v = rng.standard_normal(t)
    assert np.allclose(masked_mvm(spec, v), toeplitz_mvm(first_row, v))


def test_masked_single_index():
    t = 16
    first_row = np.exp(-np.arange(t) / 3.0)
    spec = MaskedToeplitzSpec(grid_size=t, first_row=first_row, mask=np.array([5]))
    assert np.allclose(masked_mvm(spec, np.array([2.0])), 2.0 * first_row[0])


def test_masked_matches_dense_submatrix():
    rng = np.random.default_rng(8)
    t = 64
    kernel = se_kernel([0.02], 1.7)
    mask = np.sort(rng.choice(t, size=40, replace=False))
    spec = masked_toeplitz_spec(kernel, t, spacing=1.0, mask=mask)
    grid = np.arange(t, dtype=float).reshape(-1, 1)
    K_sub = gram(kernel, grid[mask])
    v = rng.standard_normal(40)
    got = masked_mvm(spec, v)
    want = K_sub @ v
    assert np.linalg.norm(got - want) <= 1e-10 * np.linalg.norm(want)


def test_masked_operator_probe_invariants():
    rng = np.random.default_rng(9)
    t = 50
    kernel = se_kernel([0.05], 1.0)
    mask = np.sort(rng.choice(t, size=30, replace=False))
    op = masked_toeplitz_spec(kernel, t, 1.0, mask).operator(noise=0.1)
    u, v = rng.standard_normal((2, 30))
    assert np.allclose(op.apply(u + v), op.apply(u) + op.apply(v), rtol=1e-10)
    assert u @ op.apply(v) == pytest.approx(v @ op.apply(u), rel=1e-10)


def test_masked_spec_validation():
    with pytest.raises(ValueError):
        MaskedToeplitzSpec(grid_size=4, first_row=np.ones(4), mask=np.array([2, 1]))
    with pytest.raises(ValueError):
        MaskedToeplitzSpec(grid_size=4, first_row=np.ones(4), mask=np.array([3, 4]))
    with pytest.raises(ValueError):
        MaskedToeplitzSpec(grid_size=4, first_row=np.array([1.0, np.inf, 0, 0]), mask=np.array([0]))


def test_grid_dataset_shapes_and_determinism():
    kernel = se_kernel([1.0, 1.0], 1.0)
    data = grid_dataset(10, 2, kernel, seed=3)
    assert data.n_train == 100
    assert data.n_test == 100
    again = grid_dataset(10, 2, kernel, seed=3)
    assert np.array_equal(data.X, again.X)
    assert np.array_equal(data.y, again.y)
    assert np.array_equal(data.X_star, again.X_star)
    assert np.array_equal(data.y_star, again.y_star)
    other = grid_dataset(10, 2, kernel, seed=4)
    assert not np.array_equal(data.y, other.y)


def test_grid_dataset_memory_budget():
    kernel = se_kernel([1.0, 1.0, 1.0], 1.0)
    with pytest.raises(ValueError):
        grid_dataset(100, 3, kernel, max_points=10_000)


def test_grid_sampling_empirical_covariance():
    # Covariance of grid draws must match the dense Gram within five
    # standard errors on a small grid.
    kernel = se_kernel([1.0, 1.0], 1.0)
    rng = np.random.default_rng(10)
    axes = [np.array([-0.5, 0.0, 0.5]), np.array([-0.4, 0.1, 0.6])]
    spec = grid_spec(kernel, axes)
    target = gram(kernel, spec.points())
    n_draws = 2000
    draws = np.stack([spec.sample(rng) for _ in range(n_draws)])
    emp = draws.T @ draws / n_draws
    se = np.sqrt((np.outer(np.diag(target), np.diag(target)) + target**2) / n_draws)
    assert np.all(np.abs(emp - target) <= 5.0 * se + 1e-12)
