"""Linear-algebra backends: singular triplets, direct and iterative solves.

The solver is written against the three contracts in this module so the
numerical backends stay swappable:

* ``smallest_singular_triplets``: the K smallest singular triplets of a dense
  or sparse matrix. Dense input goes through a full SVD; large sparse square
  input uses shift-and-invert Lanczos on the symmetric augmented matrix
  [[0, A], [A^T, 0]], which is robust for singular values near zero.
* ``solve_dense``: LU solve with a condition estimate, falling back to a
  minimum-norm least-squares solution when the matrix is numerically
  singular.
* ``solve_symmetric_iterative``: MINRES for symmetric (possibly indefinite)
  operators, returning the achieved residual so callers can treat inexact
  solutions as search directions.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionMismatchError, StructureError, TripletError

__all__ = [
    "smallest_singular_triplets",
    "solve_dense",
    "solve_symmetric_iterative",
    "spectral_norm",
    "DenseSolve",
    "IterativeSolve",
    "validate_matrix",
    "frobenius_norm",
    "as_dense",
]

#: problems with at most this many total unknowns use dense factorizations
DENSE_THRESHOLD = 4000

#: relative singular-value cutoff below which solve_dense switches to
#: minimum-norm least squares
RCOND_CUTOFF = 1e-14

#: relative residual bound singular triplets must satisfy
TRIPLET_RESIDUAL_TOL = 1e-10


def validate_matrix(A):
    """Check and normalize a matrix to float ndarray or CSR.

    Real entries and finite values are required; sparse input is returned as
    canonical ``csr_array``, dense input as a float ndarray.
    """
    if sp.issparse(A):
        A = sp.csr_array(A)
        if np.iscomplexobj(A.data):
            raise StructureError("complex matrices are not supported")
        A = A.astype(float)
        A.sum_duplicates()
        A.sort_indices()
        if A.nnz and not np.all(np.isfinite(A.data)):
            raise StructureError("matrix contains non-finite entries")
        return A
    A = np.asarray(A)
    if np.iscomplexobj(A):
        raise StructureError("complex matrices are not supported")
    if A.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-d matrix, got shape {A.shape}")
    A = A.astype(float, copy=False)
    if not np.all(np.isfinite(A)):
        raise StructureError("matrix contains non-finite entries")
    return A


def frobenius_norm(A):
    if sp.issparse(A):
        return float(np.sqrt((A.data**2).sum()))
    return float(np.linalg.norm(A, "fro"))


def as_dense(A):
    if sp.issparse(A):
        return np.asarray(A.todense())
    return np.asarray(A)


def _dense_triplets(A, k):
    U, s, Vt = scipy.linalg.svd(as_dense(A), full_matrices=False)
    out = []
    for i in range(1, k + 1):
        out.append((float(s[-i]), U[:, -i].copy(), Vt[-i, :].copy()))
    return out, float(s[0])


def _sparse_triplets(A, k, seed):
    """Shift-and-invert Lanczos at zero on the augmented matrix."""
    m, n = A.shape
    aug = sp.bmat([[None, A], [A.T, None]], format="csc")
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(m + n)
    k_eig = min(2 * k + 2, m + n - 1)
    w, W = spla.eigsh(aug, k=k_eig, sigma=0.0, which="LM", v0=v0)
    pos = np.where(w > 0)[0]
    pos = pos[np.argsort(w[pos])]
    if len(pos) < k:
        raise TripletError(
            f"augmented eigensolver returned {len(pos)} positive eigenvalues, need {k}"
        )
    out = []
    for j in pos[:k]:
        u = W[:m, j]
        v = W[m:, j]
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        if nu == 0 or nv == 0:
            raise TripletError("degenerate augmented eigenvector")
        u, v = u / nu, v / nv
        if u @ (A @ v) < 0:
            v = -v
        out.append((float(w[j]), u, v))
    return out


def spectral_norm(A, seed=0):
    """Largest singular value of ``A`` (Lanczos for large sparse input)."""
    if sp.issparse(A):
        m, n = A.shape
        if min(m, n) <= 2 or m + n <= DENSE_THRESHOLD:
            return float(np.linalg.norm(as_dense(A), 2))
        rng = np.random.default_rng(seed)
        s = spla.svds(
            A, k=1, which="LM", v0=rng.standard_normal(min(m, n)), return_singular_vectors=False
        )
        return float(s[0])
    return float(np.linalg.norm(A, 2))


def smallest_singular_triplets(A, k=1, seed=0):
    """The ``k`` smallest singular triplets of ``A``, ascending in sigma.

    Returns a list of (sigma, u, v) with unit-norm vectors satisfying
    ``A v = sigma u`` and ``A^T u = sigma v`` to a relative residual of
    1e-10. Dense or small input uses a full SVD. Large sparse square input
    uses shift-and-invert Lanczos; on failure it falls back to the dense
    path when memory permits, otherwise ``TripletError`` is raised with the
    achieved residual.
    """
    A = validate_matrix(A)
    m, n = A.shape
    if k < 1 or k > min(m, n):
        raise DimensionMismatchError(f"k={k} out of range for shape {A.shape}")
    use_dense = (not sp.issparse(A)) or (m + n <= DENSE_THRESHOLD) or (m != n)
    if use_dense:
        trips, norm_a = _dense_triplets(A, k)
    else:
        try:
            trips = _sparse_triplets(A, k, seed)
            norm_a = spectral_norm(A, seed=seed)
        except Exception as exc:  # singular factorization, Lanczos breakdown
            if m == n and m <= 4000:
                trips, norm_a = _dense_triplets(A, k)
            else:
                raise TripletError(f"sparse triplet computation failed: {exc}") from exc
    scale = max(norm_a, 1e-300)
    worst = 0.0
    for sigma, u, v in trips:
        r1 = np.linalg.norm(A @ v - sigma * u)
        r2 = np.linalg.norm(A.T @ u - sigma * v)
        worst = max(worst, r1 / scale, r2 / scale)
    if worst > TRIPLET_RESIDUAL_TOL:
        raise TripletError(
            f"singular triplet residual {worst:.3e} exceeds {TRIPLET_RESIDUAL_TOL:.1e}",
            achieved_residual=worst,
        )
    return trips


@dataclasses.dataclass
class DenseSolve:
    """Result of ``solve_dense``: solution, condition estimate, fallback flag."""

    x: np.ndarray
    rcond: float
    used_least_squares: bool


def solve_dense(M, b):
    """Solve the square system ``M x = b`` directly.

    LU with partial pivoting plus a 1-norm condition estimate; if the
    estimated reciprocal condition number falls below 1e-14 the minimum-norm
    least-squares solution is returned instead (rank decided by the same
    relative singular-value threshold).
    """
    M = np.asarray(M, dtype=float)
    b = np.asarray(b, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatchError(f"solve_dense needs a square matrix, got {M.shape}")
    if b.shape[0] != M.shape[0]:
        raise DimensionMismatchError("right-hand side length mismatch")
    anorm = np.linalg.norm(M, 1)
    if anorm == 0:
        x, *_ = np.linalg.lstsq(M, b, rcond=RCOND_CUTOFF)
        return DenseSolve(x=x, rcond=0.0, used_least_squares=True)
    lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    rcond, _info = scipy.linalg.lapack.dgecon(lu, anorm)
    rcond = float(rcond)
    if not np.isfinite(rcond) or rcond < RCOND_CUTOFF:
        x, *_ = np.linalg.lstsq(M, b, rcond=RCOND_CUTOFF)
        return DenseSolve(x=x, rcond=rcond, used_least_squares=True)
    x = scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
    return DenseSolve(x=x, rcond=rcond, used_least_squares=False)


@dataclasses.dataclass
class IterativeSolve:
    """Result of ``solve_symmetric_iterative``."""

    x: np.ndarray
    residual: float
    iterations: int
    converged: bool


def _as_operator(op, n):
    if sp.issparse(op) or isinstance(op, np.ndarray):
        return spla.aslinearoperator(op)
    if isinstance(op, spla.LinearOperator):
        return op
    if callable(op):
        return spla.LinearOperator((n, n), matvec=op)
    raise StructureError(f"unsupported operator type {type(op)!r}")


def solve_symmetric_iterative(op, b, tol=1e-10, max_iter=None):
    """MINRES on a symmetric (possibly indefinite) system.

    ``op`` may be a matrix, a ``LinearOperator``, or a matvec callable; the
    caller asserts symmetry. Returns the iterate with its achieved relative
    residual; hitting ``max_iter`` is not an error, since an inexact step is
    still a usable search direction.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return IterativeSolve(x=np.zeros(n), residual=0.0, iterations=0, converged=True)
    linop = _as_operator(op, n)
    if max_iter is None:
        max_iter = 4 * n
    count = {"it": 0}

    def _cb(_xk):
        count["it"] += 1

    try:
        x, _info = spla.minres(linop, b, rtol=tol, maxiter=max_iter, callback=_cb)
    except TypeError:  # scipy < 1.12 spells the tolerance argument 'tol'
        x, _info = spla.minres(linop, b, tol=tol, maxiter=max_iter, callback=_cb)
    res = float(np.linalg.norm(b - linop.matvec(x)) / bnorm)
    return IterativeSolve(x=x, residual=res, iterations=count["it"], converged=res <= tol)
