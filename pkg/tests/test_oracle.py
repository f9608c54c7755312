"""Variable-projection oracle: closed forms, brute-force agreement, certification."""

import numpy as np
import pytest

from singdist import (
    FullStructure,
    ProblemInstance,
    SparsityPattern,
    as_dense,
    certify_solution,
    evaluate,
    solve,
)
from singdist.errors import StructureError
from conftest import pattern_instance, random_orthonormal_basis


def brute_force_eval(A, S, v, eps):
    """Dense regularized least squares over the coefficient space."""
    M = S.m_matrix(v)
    r = -A @ v
    delta = np.linalg.solve(M.T @ M + eps * np.eye(S.dim), M.T @ r)
    f = delta @ delta + np.linalg.norm(M @ delta - r) ** 2 / eps
    return f, delta


def test_full_structure_closed_form():
    rng = np.random.default_rng(40)
    A = rng.standard_normal((5, 5))
    P = ProblemInstance(A, FullStructure(A.shape))
    v = rng.standard_normal(5)
    v /= np.linalg.norm(v)
    eps = 1e-8
    ev = evaluate(P, v, eps)
    # M M^T = ||v||^2 I = I, so u = -Av/(1+eps) and f = ||Av||^2/(1+eps)
    assert np.allclose(ev.u, -(A @ v) / (1 + eps), atol=1e-12)
    assert abs(ev.f_value - np.linalg.norm(A @ v) ** 2 / (1 + eps)) <= 1e-12


def test_full_structure_smallest_singular_value():
    rng = np.random.default_rng(41)
    A = rng.standard_normal((6, 6))
    _, s, Vt = np.linalg.svd(A)
    P = ProblemInstance(A, FullStructure(A.shape))
    f = evaluate(P, Vt[-1], 1e-12).f_value
    assert abs(f - s[-1] ** 2) <= 1e-8 * (1 + s[-1] ** 2)


def test_matches_brute_force_on_patterns():
    rng = np.random.default_rng(42)
    for trial in range(10):
        A, S = pattern_instance(rng, n=8, density=0.5)
        P = ProblemInstance(A, S)
        v = rng.standard_normal(8)
        v /= np.linalg.norm(v)
        eps = 1e-8
        ev = evaluate(P, v, eps)
        f_ref, delta_ref = brute_force_eval(A, S, v, eps)
        assert abs(ev.f_value - f_ref) <= 1e-8 * (1 + abs(f_ref))
        assert np.linalg.norm(ev.delta - delta_ref) <= 1e-8 * (1 + np.linalg.norm(delta_ref))


def test_matches_brute_force_on_basis_structure():
    rng = np.random.default_rng(43)
    A = rng.standard_normal((6, 6))
    S = random_orthonormal_basis(rng, 6, 6, 12)
    P = ProblemInstance(A, S)
    v = rng.standard_normal(6)
    v /= np.linalg.norm(v)
    eps = 1e-8
    ev = evaluate(P, v, eps)
    f_ref, delta_ref = brute_force_eval(A, S, v, eps)
    assert abs(ev.f_value - f_ref) <= 1e-8 * (1 + abs(f_ref))
    assert np.linalg.norm(ev.delta - delta_ref) <= 1e-8 * (1 + np.linalg.norm(delta_ref))


def test_eval_invariant_and_rank1_identity():
    rng = np.random.default_rng(44)
    for trial in range(8):
        A, S = pattern_instance(rng, n=7)
        P = ProblemInstance(A, S)
        v = rng.standard_normal(7)
        v /= np.linalg.norm(v)
        eps = 10.0 ** rng.uniform(-10, -4)
        ev = evaluate(P, v, eps)
        lhs = np.linalg.norm(as_dense(ev.Delta)) ** 2
        lhs += np.linalg.norm((A + as_dense(ev.Delta)) @ v) ** 2 / eps
        assert abs(lhs - ev.f_value) <= 1e-10 * (1 + abs(ev.f_value))
        # Delta is the projected rank-1 matrix of (u, v)
        D2 = as_dense(S.project_rank1(ev.u, v))
        assert np.linalg.norm(as_dense(ev.Delta) - D2) <= 1e-12 * (1 + np.linalg.norm(D2))


def test_f_eps_monotone_in_eps():
    rng = np.random.default_rng(45)
    for trial in range(5):
        A, S = pattern_instance(rng, n=7)
        P = ProblemInstance(A, S)
        v = rng.standard_normal(7)
        v /= np.linalg.norm(v)
        f1 = evaluate(P, v, 1e-9).f_value
        f2 = evaluate(P, v, 1e-5).f_value
        assert f1 >= f2 - 1e-14


def test_evaluate_rejects_bad_arguments():
    A = np.eye(3)
    P = ProblemInstance(A, FullStructure(A.shape))
    with pytest.raises(Exception):
        evaluate(P, np.array([2.0, 0, 0]), 1e-8)  # not unit norm
    with pytest.raises(Exception):
        evaluate(P, np.array([1.0, 0, 0]), 0.0)  # eps must be positive


def test_certify_solver_output():
    rng = np.random.default_rng(46)
    A, S = pattern_instance(rng, n=9)
    P = ProblemInstance(A, S)
    res = solve(P)
    cert = certify_solution(P, res)
    assert cert.passed
    assert cert.grad_norm <= 1e-6


def test_certify_negative_control_perturbed_v():
    rng = np.random.default_rng(47)
    A, S = pattern_instance(rng, n=9)
    P = ProblemInstance(A, S)
    res = solve(P)
    bad_v = res.v + 1e-2 * rng.standard_normal(9)
    bad_v /= np.linalg.norm(bad_v)
    import types

    shim = types.SimpleNamespace(v=bad_v, distance=res.distance)
    cert = certify_solution(P, shim)
    assert not cert.passed


def test_certify_example_diag():
    P = ProblemInstance(np.diag([3.0, 1.0]), FullStructure((2, 2)))
    import types

    shim = types.SimpleNamespace(v=np.array([0.0, 1.0]), distance=1.0)
    cert = certify_solution(P, shim, eps=1e-10)
    assert cert.passed
    assert abs(cert.f_value - 1.0) <= 1e-6


def test_certification_rejects_dead_row_saddle():
    """Newton can converge to a saddle whose v annihilates entire row supports.

    With A inside a low-density pattern, the k=1 start sometimes lands on a
    stationary point of the penalized system that is not a minimizer of the
    variable-projection objective: some rows have all their pattern entries
    multiplied by zero components of v (gram diagonal K1 = 0) while u keeps
    mass there. The oracle gradient is then genuinely large, so certification
    must fail, and the curvature operator must be indefinite. Seed frozen
    from a search over the generator.
    """
    rng = np.random.default_rng(1)
    while True:
        mask = rng.random((30, 30)) < 0.2
        if not (mask.any(axis=0).all() and mask.any(axis=1).all()):
            continue
        A = np.where(mask, rng.standard_normal((30, 30)), 0.0)
        if np.linalg.svd(A, compute_uv=False)[-1] > 1e-3:
            break
    S = SparsityPattern.from_matrix(np.where(mask, 1.0, 0.0))
    P = ProblemInstance(A, S)
    res = solve(P)
    assert res.converged  # Newton is satisfied...
    cert = certify_solution(P, res)
    assert not cert.passed  # ...but the oracle correctly is not
    assert cert.grad_norm > 1e-4
    from singdist import assemble_H_beta

    eigs = np.linalg.eigvalsh(assemble_H_beta(P, res.u, res.v))
    assert eigs[0] < -1e-8  # a saddle, not a minimum
    k1, _ = S.gram_diagonals(np.zeros(30), res.v)
    assert k1.min() < 1e-12  # the dead rows that cause the failure


def test_certify_v_zero_rejected():
    import types

    P = ProblemInstance(np.eye(2), FullStructure((2, 2)))
    shim = types.SimpleNamespace(v=np.zeros(2), distance=0.0)
    with pytest.raises(StructureError):
        certify_solution(P, shim)
