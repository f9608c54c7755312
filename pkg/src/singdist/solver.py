"""Newton solver for the structured distance to singularity.

The distance from a nonsingular A to the nearest singular matrix A + Delta
with Delta constrained to a linear structure S is computed through the
stationarity system in two vectors,

    G(u, v) = [ (A + Delta) v ; (A + Delta)^T u ] = 0,
    Delta = project_rank1(S, u, v),

whose roots give structured singular perturbations. The scaling ambiguity
(u, v) -> (u / a, a v) is removed by a quadratic penalty on || v || = 1 with
weight beta, giving the damped residual G_beta and its symmetric curvature
operator H_beta. The solve itself is a multivariate Newton iteration with a
backtracking line search that halves the step until the residual norm
strictly decreases.

Starting values come from the smallest singular triplets of A: for the k-th
triplet (sigma, u_k, v_k) the initial pair is v_0 = v_k and
u_0 = -sigma_hat u_k with sigma_hat = sigma / ||project_rank1(u_k, v_k)||^2,
which makes A + Delta_0 orthogonal to the rank-1 direction u_k v_k^T.
Multi-start runs Newton from several triplets and keeps the converged result
of smallest ||Delta||.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import math
import os
import time
import warnings

import numpy as np
import scipy.sparse as sp

from . import linalg
from .errors import AllStartsFailed, DimensionMismatchError, StructureError
from .structure import LinearStructure, SparsityPattern, as_dense

__all__ = [
    "SolverOptions",
    "ProblemInstance",
    "SolverState",
    "SolveResult",
    "IterationRecord",
    "StartingPoint",
    "StartSummary",
    "residual_G",
    "residual_G_beta",
    "apply_H_beta",
    "assemble_H_beta",
    "newton_step",
    "line_search_newton",
    "starting_values",
    "solve",
]

#: relative sigma_min below which the input counts as already singular
SINGULAR_INPUT_RTOL = 1e-14

#: starts whose projected rank-1 direction has norm below this are skipped
START_PROJECTION_TOL = 1e-14


@dataclasses.dataclass
class SolverOptions:
    """Tuning knobs for the Newton solve.

    ``beta`` and ``grad_tol`` default to ``None``, meaning ||A||_F and
    1e-12 ||A||_F respectively, resolved per instance. The inner (MINRES)
    tolerance starts loose and tightens once the outer residual falls below
    ``tighten_threshold * ||A||_F``, protecting terminal quadratic
    convergence without paying for accurate inner solves early on.
    """

    beta: float | None = None
    grad_tol: float | None = None
    max_newton_iters: int = 100
    max_backtracks: int = 40
    multistart: int = 1
    multistart_mode: str = "full"  # "full" runs every start, "cheap" only argmin sigma_hat
    inner_tol: float = 1e-2
    inner_tol_tight: float = 1e-4
    tighten_threshold: float = 1e-6
    dense_threshold: int = linalg.DENSE_THRESHOLD
    minres_maxiter: int | None = None
    seed: int = 0
    threads: int | None = None

    def __post_init__(self):
        if self.beta is not None and self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.grad_tol is not None and self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.max_newton_iters < 1 or self.max_backtracks < 0:
            raise ValueError("iteration budgets must be positive")
        if self.multistart < 1:
            raise ValueError("multistart must be at least 1")
        if self.multistart_mode not in ("full", "cheap"):
            raise ValueError("multistart_mode must be 'full' or 'cheap'")


class ProblemInstance:
    """A matrix together with its structure and solver options.

    ``structure`` defaults to the sparsity pattern of A itself, the natural
    setting for preserving the nonzero structure of a sparse matrix. A may
    be rectangular, in which case the computed distance is to the nearest
    rank-deficient matrix; u and v then have the row and column dimensions.
    """

    def __init__(self, A, structure: LinearStructure | None = None, options: SolverOptions | None = None):
        self.A = linalg.validate_matrix(A)
        if self.A.shape[0] < 1 or self.A.shape[1] < 1:
            raise DimensionMismatchError("matrix must be nonempty")
        self.m, self.n = self.A.shape
        if structure is None:
            structure = SparsityPattern.from_matrix(self.A)
        if structure.shape != self.A.shape:
            raise DimensionMismatchError(
                f"structure shape {structure.shape} does not match matrix shape {self.A.shape}"
            )
        self.structure = structure
        self.options = options if options is not None else SolverOptions()
        self.norm_fro = linalg.frobenius_norm(self.A)
        self.is_sparse = sp.issparse(self.A)
        self._A_T = self.A.T.tocsr() if self.is_sparse else self.A.T
        self._A_dense = None

    @property
    def beta(self):
        if self.options.beta is not None:
            return self.options.beta
        return self.norm_fro if self.norm_fro > 0 else 1.0

    @property
    def grad_tol(self):
        if self.options.grad_tol is not None:
            return self.options.grad_tol
        return 1e-12 * self.norm_fro if self.norm_fro > 0 else 1e-12

    @property
    def use_dense_newton(self):
        return self.m + self.n <= self.options.dense_threshold

    def dense_A(self):
        if self._A_dense is None:
            self._A_dense = as_dense(self.A)
        return self._A_dense

    def matvec(self, v):
        return self.A @ v

    def rmatvec(self, u):
        return self._A_T @ u


def _split(P, x):
    return x[: P.m], x[P.m :]


def residual_G(P: ProblemInstance, u, v):
    """Stacked residual [(A+Delta)v; (A+Delta)^T u], Delta = project_rank1(u, v).

    Uses the exact identities Delta v = M M^T u and Delta^T u = N N^T v, so
    no matrix is materialized.
    """
    S = P.structure
    r1 = P.matvec(v) + S.apply_m(v, S.apply_mt(v, u))
    r2 = P.rmatvec(u) + S.apply_n(u, S.apply_nt(u, v))
    return np.concatenate([r1, r2])


def residual_G_beta(P: ProblemInstance, u, v, beta: float | None = None):
    """``residual_G`` plus the penalty term beta (||v||^2 - 1) v in the v block."""
    if beta is None:
        beta = P.beta
    g = residual_G(P, u, v)
    v = np.asarray(v, dtype=float)
    g[P.m :] += beta * (v @ v - 1.0) * v
    return g


def apply_H_beta(P: ProblemInstance, u, v, du, dv, beta: float | None = None):
    """Matrix-free application of the curvature operator H_beta to (du, dv).

    Block form [[M M^T, A + Delta + M N^T], [(A + Delta + M N^T)^T, N N^T]]
    plus the penalty block 2 beta v v^T + beta (||v||^2 - 1) I in the lower
    right; symmetric for all real data.
    """
    if beta is None:
        beta = P.beta
    S = P.structure
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    du = np.asarray(du, dtype=float)
    dv = np.asarray(dv, dtype=float)
    c = S.apply_mt(v, u)  # basis coordinates of Delta
    w = S.apply_mt(v, du) + S.apply_nt(u, dv)
    h1 = P.matvec(dv) + S.apply_m(dv, c) + S.apply_m(v, w)
    h2 = P.rmatvec(du) + S.apply_n(du, c) + S.apply_n(u, w)
    h2 += beta * (2.0 * (v @ dv) * v + (v @ v - 1.0) * dv)
    return np.concatenate([h1, h2])


def assemble_H_beta(P: ProblemInstance, u, v, beta: float | None = None):
    """Dense assembly of H_beta; used by the direct Newton path and tests."""
    if beta is None:
        beta = P.beta
    S = P.structure
    m, n = P.m, P.n
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    H = np.zeros((m + n, m + n))
    try:
        k1, k2 = S.gram_diagonals(u, v)
        H[np.arange(m), np.arange(m)] = k1
        H[np.arange(m, m + n), np.arange(m, m + n)] = k2
    except StructureError:
        Mm = S.m_matrix(v)
        Nm = S.n_matrix(u)
        H[:m, :m] = Mm @ Mm.T
        H[m:, m:] = Nm @ Nm.T
    off = P.dense_A() + as_dense(S.h_offdiag(u, v))
    H[:m, m:] = off
    H[m:, :m] = off.T
    H[m:, m:] += 2.0 * beta * np.outer(v, v) + beta * (v @ v - 1.0) * np.eye(n)
    return H


@dataclasses.dataclass
class SolverState:
    """One Newton iterate with its cached perturbation and residual.

    ``inner_tol`` is the current MINRES tolerance; ``None`` means the
    schedule default. The line search tightens it when full steps stop
    contracting the residual, which signals direction-limited progress.
    """

    u: np.ndarray
    v: np.ndarray
    delta: object
    residual: np.ndarray
    residual_norm: float
    iteration: int = 0
    alpha: float = math.nan
    inner_tol: float | None = None

    @classmethod
    def at(cls, P: ProblemInstance, u, v, beta=None):
        u = np.array(u, dtype=float)
        v = np.array(v, dtype=float)
        g = residual_G_beta(P, u, v, beta)
        return cls(
            u=u,
            v=v,
            delta=P.structure.project_rank1(u, v),
            residual=g,
            residual_norm=float(np.linalg.norm(g)),
        )


def newton_step(P: ProblemInstance, state: SolverState, beta: float | None = None):
    """Solve H_beta [du; dv] = -G_beta at the state; returns (du, dv, inner_iters).

    Small problems assemble H_beta and use the direct solver with its
    minimum-norm fallback; large sparse problems apply H_beta matrix-free
    through MINRES with the loose-then-tight inner tolerance schedule.
    """
    if beta is None:
        beta = P.beta
    opts = P.options
    rhs = -state.residual
    if P.use_dense_newton:
        H = assemble_H_beta(P, state.u, state.v, beta)
        sol = linalg.solve_dense(H, rhs)
        du, dv = _split(P, sol.x)
        return du, dv, 0
    S = P.structure
    u, v = state.u, state.v
    c = S.apply_mt(v, u)
    vv = v @ v

    def hmat(x):
        du_, dv_ = _split(P, x)
        w = S.apply_mt(v, du_) + S.apply_nt(u, dv_)
        h1 = P.matvec(dv_) + S.apply_m(dv_, c) + S.apply_m(v, w)
        h2 = P.rmatvec(du_) + S.apply_n(du_, c) + S.apply_n(u, w)
        h2 += beta * (2.0 * (v @ dv_) * v + (vv - 1.0) * dv_)
        return np.concatenate([h1, h2])

    tight = state.residual_norm < opts.tighten_threshold * max(P.norm_fro, 1e-300)
    tol = opts.inner_tol_tight if tight else opts.inner_tol
    if state.inner_tol is not None:
        tol = min(tol, state.inner_tol)
    maxiter = opts.minres_maxiter if opts.minres_maxiter is not None else 2 * (P.m + P.n)
    it = linalg.solve_symmetric_iterative(hmat, rhs, tol=tol, max_iter=maxiter)
    du, dv = _split(P, it.x)
    return du, dv, it.iterations


@dataclasses.dataclass
class IterationRecord:
    """Per accepted iteration: residual after the step and step diagnostics."""

    iteration: int
    residual_norm: float
    alpha: float
    backtracks: int
    inner_iterations: int


@dataclasses.dataclass
class StartSummary:
    """Condensed per-start outcome carried by multi-start results."""

    index: int
    sigma: float
    sigma_hat: float
    skipped: bool = False
    reason: str = ""
    converged: bool = False
    distance: float = math.nan
    grad_norm: float = math.nan
    iterations: int = 0
    backtracks: int = 0
    inner_iterations: int = 0


@dataclasses.dataclass
class SolveResult:
    """Outcome of a Newton run (or of the best start under multi-start)."""

    converged: bool
    distance: float
    delta: object
    u: np.ndarray
    v: np.ndarray
    residual_av: float
    residual_atu: float
    grad_norm: float
    iterations: int
    trace: list
    message: str = ""
    start_index: int = 0
    sigma_min: float | None = None
    sigma_max: float | None = None
    starts: list = dataclasses.field(default_factory=list)
    wall_time: float = 0.0

    @property
    def backtracks(self):
        return sum(r.backtracks for r in self.trace)

    @property
    def inner_iterations(self):
        return sum(r.inner_iterations for r in self.trace)


def _finalize(P: ProblemInstance, state: SolverState, converged, message, trace, start_index, t0):
    u, v = state.u, state.v
    if converged:
        vn = float(np.linalg.norm(v))
        if vn < 1e-8:
            converged = False
            message = "iterate degenerated to v ~ 0 (trivial root)"
        else:
            # Gauge fix: Delta is invariant under (u, v) -> (u a, v / a).
            u = u * vn
            v = v / vn
    S = P.structure
    delta = S.project_rank1(u, v)
    r1 = P.matvec(v) + S.apply_m(v, S.apply_mt(v, u))
    r2 = P.rmatvec(u) + S.apply_n(u, S.apply_nt(u, v))
    g = residual_G_beta(P, u, v)
    return SolveResult(
        converged=converged,
        distance=linalg.frobenius_norm(delta),
        delta=delta,
        u=u,
        v=v,
        residual_av=float(np.linalg.norm(r1)),
        residual_atu=float(np.linalg.norm(r2)),
        grad_norm=float(np.linalg.norm(g)),
        iterations=trace[-1].iteration if trace else 0,
        trace=trace,
        message=message,
        start_index=start_index,
        wall_time=time.perf_counter() - t0,
    )


def line_search_newton(P: ProblemInstance, start_u, start_v, start_index: int = 0) -> SolveResult:
    """Newton iteration with backtracking from one starting pair.

    Each step solves for the Newton direction and halves the step length
    until || G_beta || strictly decreases; the first failure to descend
    within the backtrack budget ends the run with the best iterate flagged
    non-converged. On success (u, v) is rescaled to || v || = 1 using the
    gauge freedom and all reported quantities are recomputed there.
    """
    t0 = time.perf_counter()
    opts = P.options
    beta = P.beta
    grad_tol = P.grad_tol
    state = SolverState.at(P, start_u, start_v, beta)
    trace = [IterationRecord(0, state.residual_norm, math.nan, 0, 0)]
    if not np.isfinite(state.residual_norm):
        return _finalize(P, state, False, "non-finite residual at start", trace, start_index, t0)
    for it in range(1, opts.max_newton_iters + 1):
        if state.residual_norm <= grad_tol:
            return _finalize(P, state, True, "converged", trace, start_index, t0)
        du, dv, inner = newton_step(P, state, beta)
        alpha = 1.0
        accepted = False
        for bt in range(opts.max_backtracks + 1):
            u_try = state.u + alpha * du
            v_try = state.v + alpha * dv
            g_try = residual_G_beta(P, u_try, v_try, beta)
            gn_try = float(np.linalg.norm(g_try))
            if np.isfinite(gn_try) and gn_try < state.residual_norm:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            return _finalize(
                P, state, False,
                f"no descent within {opts.max_backtracks} backtracks at iteration {it}",
                trace, start_index, t0,
            )
        if not P.use_dense_newton and alpha == 1.0 and gn_try > 0.5 * state.residual_norm:
            # A full step that barely contracts the residual means the inexact
            # direction is the bottleneck; tighten the inner solves from here on.
            cur = state.inner_tol if state.inner_tol is not None else opts.inner_tol
            state.inner_tol = max(0.1 * cur, 1e-12)
        state.u, state.v = u_try, v_try
        state.residual = g_try
        state.residual_norm = gn_try
        state.delta = P.structure.project_rank1(state.u, state.v)
        state.iteration = it
        state.alpha = alpha
        trace.append(IterationRecord(it, gn_try, alpha, bt, inner))
    if state.residual_norm <= grad_tol:
        return _finalize(P, state, True, "converged", trace, start_index, t0)
    return _finalize(
        P, state, False,
        f"iteration budget {opts.max_newton_iters} exhausted",
        trace, start_index, t0,
    )


@dataclasses.dataclass
class StartingPoint:
    """One multi-start initial pair derived from a singular triplet."""

    index: int
    sigma: float
    sigma_hat: float
    u0: np.ndarray | None
    v0: np.ndarray | None
    skipped: bool = False
    reason: str = ""


def starting_values(P: ProblemInstance, K: int | None = None):
    """Initial pairs from the K smallest singular triplets of A.

    For each triplet, sigma_hat = sigma / ||project_rank1(u_k, v_k)||_F^2
    scales u_0 = -sigma_hat u_k so that A + Delta_0 is orthogonal to
    u_k v_k^T. Triplets whose projected rank-1 direction nearly vanishes
    cannot seed a perturbation and are skipped with a warning.
    """
    if K is None:
        K = P.options.multistart
    if K < 1:
        raise ValueError("K must be at least 1")
    K = min(K, min(P.m, P.n))
    trips = linalg.smallest_singular_triplets(P.A, K, seed=P.options.seed)
    out = []
    for k, (sigma, uk, vk) in enumerate(trips, start=1):
        pn = linalg.frobenius_norm(P.structure.project_rank1(uk, vk))
        if pn < START_PROJECTION_TOL:
            warnings.warn(
                f"start {k}: structure nearly orthogonal to the rank-1 direction; skipped",
                stacklevel=2,
            )
            out.append(StartingPoint(k, float(sigma), math.inf, None, None, True,
                                     "projected rank-1 direction vanishes"))
            continue
        sigma_hat = float(sigma / pn**2)
        out.append(StartingPoint(k, float(sigma), sigma_hat, -sigma_hat * uk, vk.copy()))
    return out


def _certificate_sigmas(P: ProblemInstance, delta):
    """sigma_min and sigma_max of A + Delta, or (None, None) if unavailable."""
    try:
        if P.is_sparse and sp.issparse(delta):
            B = (P.A + delta).tocsr()
        else:
            B = P.dense_A() + as_dense(delta)
        if not sp.issparse(B) or P.m + P.n <= P.options.dense_threshold or P.m != P.n:
            s = np.linalg.svd(as_dense(B), compute_uv=False)
            return float(s[-1]), float(s[0])
        trips = linalg.smallest_singular_triplets(B, 1, seed=P.options.seed)
        smax = linalg.spectral_norm(B, seed=P.options.seed)
        return float(trips[0][0]), float(smax)
    except Exception:
        return None, None


def _summarize(start: StartingPoint, result: SolveResult | None):
    s = StartSummary(index=start.index, sigma=start.sigma, sigma_hat=start.sigma_hat,
                     skipped=start.skipped, reason=start.reason)
    if result is not None:
        s.converged = result.converged
        s.distance = result.distance
        s.grad_norm = result.grad_norm
        s.iterations = result.iterations
        s.backtracks = result.backtracks
        s.inner_iterations = result.inner_iterations
        if not result.converged:
            s.reason = result.message
    return s


def _thread_budget(options: SolverOptions):
    if options.threads is not None:
        return max(1, options.threads)
    env = os.environ.get("SINGDIST_THREADS", "")
    if env.strip():
        try:
            return max(1, int(env))
        except ValueError:
            warnings.warn(f"ignoring invalid SINGDIST_THREADS={env!r}", stacklevel=2)
    return 1


def solve(P: ProblemInstance) -> SolveResult:
    """Full solve: starting values, (multi-start) Newton, best-of selection.

    Returns the converged result of smallest ||Delta||_F, carrying per-start
    summaries and the singular-value certificate of A + Delta. An input that
    is already numerically singular short-circuits to distance zero. If no
    start converges, ``AllStartsFailed`` is raised with the summaries and the
    best non-converged result attached.
    """
    t0 = time.perf_counter()
    trips = linalg.smallest_singular_triplets(P.A, 1, seed=P.options.seed)
    sigma_min_a = trips[0][0]
    sigma_max_a = linalg.spectral_norm(P.A, seed=P.options.seed)
    if sigma_min_a <= SINGULAR_INPUT_RTOL * max(sigma_max_a, 1e-300):
        # Already singular: the zero perturbation is optimal.
        v = trips[0][2]
        u = np.zeros(P.m)
        delta = P.structure.project_rank1(u, v)
        return SolveResult(
            converged=True,
            distance=0.0,
            delta=delta,
            u=u,
            v=v,
            residual_av=float(np.linalg.norm(P.matvec(v))),
            residual_atu=0.0,
            grad_norm=float(np.linalg.norm(residual_G_beta(P, u, v))),
            iterations=0,
            trace=[],
            message="input numerically singular; distance 0",
            sigma_min=float(sigma_min_a),
            sigma_max=float(sigma_max_a),
            wall_time=time.perf_counter() - t0,
        )
    starts = starting_values(P)
    runnable = [s for s in starts if not s.skipped]
    if P.options.multistart_mode == "cheap" and len(runnable) > 1:
        best_start = min(runnable, key=lambda s: s.sigma_hat)
        runnable = [best_start]
    if not runnable:
        raise AllStartsFailed(
            "every start was skipped (structure orthogonal to all rank-1 directions)",
            starts=[_summarize(s, None) for s in starts],
        )
    workers = min(_thread_budget(P.options), len(runnable))
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(lambda s: line_search_newton(P, s.u0, s.v0, s.index), runnable)
            )
    else:
        results = [line_search_newton(P, s.u0, s.v0, s.index) for s in runnable]
    by_index = {s.index: r for s, r in zip(runnable, results)}
    summaries = [_summarize(s, by_index.get(s.index)) for s in starts]
    converged = [r for r in results if r.converged]
    if not converged:
        best = min(results, key=lambda r: r.grad_norm)
        best.starts = summaries
        best.wall_time = time.perf_counter() - t0
        raise AllStartsFailed(
            "no Newton start converged", starts=summaries, best=best,
        )
    best = min(converged, key=lambda r: r.distance)
    best.starts = summaries
    best.sigma_min, best.sigma_max = _certificate_sigmas(P, best.delta)
    best.wall_time = time.perf_counter() - t0
    return best
