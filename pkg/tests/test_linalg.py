"""Linear-algebra backends: singular triplets, direct and iterative solves."""

import numpy as np
import pytest
import scipy.sparse as sp

from singdist import smallest_singular_triplets, solve_dense, solve_symmetric_iterative, spectral_norm
from singdist.linalg import _sparse_triplets


def triplet_residuals(A, trips):
    A = np.asarray(A.todense()) if sp.issparse(A) else A
    worst = 0.0
    for sigma, u, v in trips:
        worst = max(worst, np.linalg.norm(A @ v - sigma * u),
                    np.linalg.norm(A.T @ u - sigma * v))
    return worst


def test_triplets_diagonal():
    trips = smallest_singular_triplets(np.diag([3.0, 1.0]), 1)
    sigma, u, v = trips[0]
    assert abs(sigma - 1.0) <= 1e-12
    assert np.allclose(np.abs(u), [0, 1], atol=1e-12)
    assert np.allclose(np.abs(v), [0, 1], atol=1e-12)
    assert u @ (np.diag([3.0, 1.0]) @ v) > 0  # sign fixed so u^T A v = sigma

    trips = smallest_singular_triplets(np.diag([5.0, 2.0]), 2)
    assert [t[0] for t in trips] == sorted(t[0] for t in trips)
    assert abs(trips[0][0] - 2.0) <= 1e-12 and abs(trips[1][0] - 5.0) <= 1e-12


def test_triplets_match_dense_svd():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((8, 8))
    s_ref = np.linalg.svd(A, compute_uv=False)
    trips = smallest_singular_triplets(A, 3)
    for k, (sigma, u, v) in enumerate(trips):
        assert abs(sigma - s_ref[-1 - k]) <= 1e-10 * s_ref[0]
        assert abs(np.linalg.norm(u) - 1) <= 1e-12
        assert abs(np.linalg.norm(v) - 1) <= 1e-12


def test_triplet_residual_bounds_random():
    rng = np.random.default_rng(12)
    for trial in range(100):
        m, n = rng.integers(2, 51, size=2)
        A = rng.standard_normal((m, n))
        k = int(rng.integers(1, min(m, n) + 1))
        trips = smallest_singular_triplets(A, k)
        norm_a = np.linalg.svd(A, compute_uv=False)[0]
        assert triplet_residuals(A, trips) <= 1e-10 * norm_a


def test_sparse_triplets_agree_with_dense():
    # exercise the shift-invert path explicitly (the public entry point
    # would route a matrix this small through the dense SVD)
    rng = np.random.default_rng(13)
    n = 60
    A = sp.random(n, n, density=0.1, random_state=np.random.RandomState(13),
                  format="csr") + sp.diags(1.0 + rng.random(n))
    A = sp.csr_array(A)
    trips = _sparse_triplets(A, 2, seed=0)
    s_ref = np.linalg.svd(A.toarray(), compute_uv=False)
    assert abs(trips[0][0] - s_ref[-1]) <= 1e-9 * s_ref[0]
    assert abs(trips[1][0] - s_ref[-2]) <= 1e-9 * s_ref[0]
    assert triplet_residuals(A, trips) <= 1e-10 * s_ref[0]


def test_spectral_norm():
    rng = np.random.default_rng(14)
    A = rng.standard_normal((20, 20))
    assert abs(spectral_norm(A) - np.linalg.norm(A, 2)) <= 1e-10
    As = sp.csr_array(A)
    assert abs(spectral_norm(As) - np.linalg.norm(A, 2)) <= 1e-8


def test_solve_dense_basic():
    assert np.allclose(solve_dense(np.eye(3), np.array([1.0, 2, 3])).x, [1, 2, 3])
    out = solve_dense(np.array([[2.0, 0], [0, 4.0]]), np.array([2.0, 4.0]))
    assert np.allclose(out.x, [1.0, 1.0], atol=1e-14)
    assert not out.used_least_squares


def test_solve_dense_random_residual():
    rng = np.random.default_rng(15)
    for trial in range(10):
        M = rng.standard_normal((10, 10))
        b = rng.standard_normal(10)
        out = solve_dense(M, b)
        assert np.linalg.norm(M @ out.x - b) <= 1e-10 * np.linalg.norm(M) * np.linalg.norm(out.x)


def test_solve_dense_minimum_norm_fallback():
    # rank-deficient: solution must minimize residual, then norm (pinv oracle)
    rng = np.random.default_rng(16)
    for trial in range(5):
        B = rng.standard_normal((5, 3))
        M = B @ rng.standard_normal((3, 5))  # rank 3
        b = rng.standard_normal(5)
        out = solve_dense(M, b)
        assert out.used_least_squares
        x_ref = np.linalg.pinv(M) @ b
        assert np.allclose(out.x, x_ref, atol=1e-8)


def test_iterative_identity_and_diagonal():
    out = solve_symmetric_iterative(np.eye(4), np.arange(1.0, 5.0), tol=1e-12)
    assert np.allclose(out.x, np.arange(1.0, 5.0), atol=1e-10)
    assert out.iterations <= 2
    d = np.arange(1.0, 11.0)
    out = solve_symmetric_iterative(np.diag(d), np.ones(10), tol=1e-12)
    assert np.allclose(out.x, 1.0 / d, atol=1e-10)
    assert out.converged


def test_iterative_matches_dense_on_indefinite():
    rng = np.random.default_rng(17)
    for trial in range(5):
        B = rng.standard_normal((50, 50))
        M = (B + B.T) / 2  # symmetric indefinite
        b = rng.standard_normal(50)
        it = solve_symmetric_iterative(lambda x: M @ x, b, tol=1e-10, max_iter=500)
        ref = solve_dense(M, b).x
        assert np.linalg.norm(it.x - ref) <= 1e-8 * np.linalg.norm(ref)


def test_iterative_reports_achieved_residual():
    rng = np.random.default_rng(18)
    B = rng.standard_normal((30, 30))
    M = (B + B.T) / 2
    b = rng.standard_normal(30)
    out = solve_symmetric_iterative(lambda x: M @ x, b, tol=1e-8, max_iter=500)
    assert abs(np.linalg.norm(M @ out.x - b) / np.linalg.norm(b) - out.residual) <= 1e-12


def test_validate_rejects_bad_input():
    from singdist.linalg import validate_matrix
    with pytest.raises(Exception):
        validate_matrix(np.array([[1.0, np.nan], [0, 1]]))
    with pytest.raises(Exception):
        validate_matrix(np.array([[1j, 0], [0, 1]]))
