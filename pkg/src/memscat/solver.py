"""Backends for the truncated system (I + A) phi = g.

Four routes with one result type:

* dense      LAPACK factorization of the materialized operator;
* gmres      restarted GMRES (modified Gram-Schmidt Arnoldi + Givens
             rotations, following Kelley, "Iterative Methods for Linear
             Systems", alg. 3.5.1), matrix-free on the block operator;
* reflections  parallel method of reflections phi <- g - A phi, i.e. the
             Neumann-series iteration; diverges when the coupling is too
             strong (almost-touching obstacles) and says so instead of
             crashing;
* first_order  the zeroth iterate phi = g with its defect ||A g|| reported,
             the cheap approximation whose validity the breakdown heuristic
             in `analysis` predicts.

Residuals are always recomputed from the operator after the fact, never
trusted from iteration internals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import BlockOperator, CoefficientVector
from .errors import SingularSystemError

GMRES_DEFAULT_TOL = 1e-12
GMRES_DEFAULT_RESTART = 50
REFLECTIONS_DEFAULT_TOL = 1e-12
# svd-based condition estimate only below this dimension (cost n^3)
_COND_DIM_CAP = 2000


@dataclass
class SolveResult:
    solution: CoefficientVector
    backend: str
    iterations: int
    residual: float          # absolute defect ||g - (I+A) phi||_2
    converged: bool
    diverged: bool = False
    condition: float | None = None


def _residual_norm(op: BlockOperator, rhs: CoefficientVector,
                   sol: CoefficientVector) -> float:
    r = rhs.data - op.matvec(sol).data
    return float(np.linalg.norm(r))


def solve_dense(op: BlockOperator, rhs: CoefficientVector,
                estimate_condition: bool = False) -> SolveResult:
    """Direct solve via LAPACK; the reference backend for everything else."""
    mat = op.dense()
    try:
        x = np.linalg.solve(mat, rhs.flat())
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"dense factorization failed: {exc}") from exc
    sol = CoefficientVector.from_flat(x, op.n_cylinders, op.truncation)
    cond = None
    if estimate_condition and op.dim <= _COND_DIM_CAP:
        cond = float(np.linalg.cond(mat))
    res = _residual_norm(op, rhs, sol)
    return SolveResult(sol, "dense", 0, res, converged=bool(np.isfinite(res)),
                       condition=cond)


def solve_gmres(op: BlockOperator, rhs: CoefficientVector,
                tol: float = GMRES_DEFAULT_TOL,
                restart: int = GMRES_DEFAULT_RESTART,
                max_iterations: int = 1000) -> SolveResult:
    """Restarted GMRES on the block operator, matrix-free."""
    M, N = op.n_cylinders, op.truncation

    def matvec(v: np.ndarray) -> np.ndarray:
        return op.matvec(CoefficientVector.from_flat(v, M, N)).flat()

    b = rhs.flat()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        sol = CoefficientVector.zeros(M, N)
        return SolveResult(sol, "gmres", 0, 0.0, converged=True)
    x = np.zeros_like(b)
    eta = tol * bnorm
    total_iters = 0

    while total_iters < max_iterations:
        r = b - matvec(x)
        beta = float(np.linalg.norm(r))
        if beta <= eta:
            break
        dim = min(restart, max_iterations - total_iters)
        V = np.zeros((dim + 1, b.size), dtype=np.complex128)
        H = np.zeros((dim + 1, dim), dtype=np.complex128)
        cs = np.zeros(dim, dtype=np.complex128)
        sn = np.zeros(dim, dtype=np.complex128)
        gvec = np.zeros(dim + 1, dtype=np.complex128)
        V[0] = r / beta
        gvec[0] = beta
        j_used = 0
        for j in range(dim):
            w = matvec(V[j])
            for i in range(j + 1):                 # modified Gram-Schmidt
                H[i, j] = np.vdot(V[i], w)
                w -= H[i, j] * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            total_iters += 1
            j_used = j + 1
            if abs(H[j + 1, j]) > 0.0:
                V[j + 1] = w / H[j + 1, j]
            for i in range(j):                     # apply stored rotations
                t = H[i, j]
                H[i, j] = np.conj(cs[i]) * t + np.conj(sn[i]) * H[i + 1, j]
                H[i + 1, j] = -sn[i] * t + cs[i] * H[i + 1, j]
            denom = np.hypot(abs(H[j, j]), abs(H[j + 1, j]))
            if denom == 0.0:
                break
            cs[j] = H[j, j] / denom
            sn[j] = H[j + 1, j] / denom
            H[j, j] = np.conj(cs[j]) * H[j, j] + np.conj(sn[j]) * H[j + 1, j]
            H[j + 1, j] = 0.0
            gvec[j + 1] = -sn[j] * gvec[j]
            gvec[j] = np.conj(cs[j]) * gvec[j]
            if abs(gvec[j + 1]) <= eta:
                break
        y = np.linalg.solve(H[:j_used, :j_used], gvec[:j_used])
        x = x + V[:j_used].T @ y
        if abs(gvec[j_used]) <= eta or total_iters >= max_iterations:
            break

    sol = CoefficientVector.from_flat(x, M, N)
    res = _residual_norm(op, rhs, sol)
    return SolveResult(sol, "gmres", total_iters, res,
                       converged=res <= tol * bnorm)


def solve_reflections(op: BlockOperator, rhs: CoefficientVector,
                      tol: float = REFLECTIONS_DEFAULT_TOL,
                      max_iterations: int = 500) -> SolveResult:
    """Parallel method of reflections: iterate phi <- g - A phi.

    Converges iff the Neumann series for (I + A)^{-1} does.  Three
    consecutive growths of the update norm are taken as divergence; the last
    iterate is returned with diverged=True rather than raising, so sweeps can
    report the breakdown.
    """
    g = rhs.data
    gnorm = float(np.linalg.norm(g))
    phi = CoefficientVector(g.copy())
    if gnorm == 0.0:
        return SolveResult(phi, "reflections", 0, 0.0, converged=True)
    growths = 0
    prev_update = None
    iterations = 0
    for it in range(max_iterations + 1):
        coupled = op.apply_coupling(phi).data
        residual = float(np.linalg.norm(g - coupled - phi.data))
        if residual <= tol * gnorm:
            iterations = it
            break
        if it == max_iterations:   # budget exhausted; keep the last iterate
            break
        nxt = g - coupled
        update = float(np.linalg.norm(nxt - phi.data))
        if prev_update is not None and update > prev_update:
            growths += 1
            if growths >= 3:
                phi = CoefficientVector(nxt)
                res = _residual_norm(op, rhs, phi)
                return SolveResult(phi, "reflections", it + 1, res,
                                   converged=False, diverged=True)
        else:
            growths = 0
        prev_update = update
        phi = CoefficientVector(nxt)
        iterations = it + 1
    res = _residual_norm(op, rhs, phi)
    return SolveResult(phi, "reflections", iterations, res,
                       converged=res <= tol * gnorm)


def first_order_solution(op: BlockOperator, rhs: CoefficientVector) -> SolveResult:
    """The zeroth reflection phi = g; residual is its defect ||A g||_2."""
    phi = CoefficientVector(rhs.data.copy())
    res = _residual_norm(op, rhs, phi)
    return SolveResult(phi, "first-order", 0, res, converged=True)


BACKENDS = {
    "dense": solve_dense,
    "gmres": solve_gmres,
    "reflections": solve_reflections,
    "first-order": first_order_solution,
}


def solve(op: BlockOperator, rhs: CoefficientVector, backend: str = "dense",
          **kwargs) -> SolveResult:
    """Dispatch to a backend by name ('dense', 'gmres', 'reflections',
    'first-order')."""
    try:
        fn = BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown backend {backend!r}") from None
    return fn(op, rhs, **kwargs)
