"""Sparse linear solvers used by every other module.

``solve_spd`` is a Jacobi-preconditioned conjugate gradient written out
here because the singular Neumann variant needs to project every residual
onto the mean-free subspace.  ``solve_general`` wraps scipy's BiCGStab and
falls back to a dense LU for small systems.  ``DirectSolver`` keeps a
sparse LU factorization for systems that are solved repeatedly with the
same matrix.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import IncompatibleRHS, LinearSolverError

DEFAULT_TOL = 1e-10
DENSE_CAP = 4096


@dataclass
class SolveReport:
    iterations: int
    residual: float
    method: str
    wall_time: float
    converged: bool = True

    def as_dict(self):
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "method": self.method,
            "converged": self.converged,
        }


def relative_residual(A, x, b):
    nb = np.linalg.norm(b)
    r = np.linalg.norm(b - A @ x)
    return float(r / nb) if nb > 0 else float(r)


def _pcg(A, b, tol, max_iter, x0=None, project=None):
    """Preconditioned CG; ``project`` (if given) is applied to residuals and
    preconditioned residuals so the iteration stays in a subspace."""
    n = b.shape[0]
    d = A.diagonal().copy()
    d[d == 0.0] = 1.0
    inv_d = 1.0 / d
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if project is not None:
        x = project(x)
    r = b - A @ x
    if project is not None:
        r = project(r)
    nb = np.linalg.norm(b)
    target = tol * nb
    best_x, best_r = x.copy(), np.linalg.norm(r)
    z = inv_d * r
    if project is not None:
        z = project(z)
    p = z.copy()
    rz = r @ z
    it = 0
    while it < max_iter:
        rn = np.linalg.norm(r)
        if rn < best_r:
            best_x, best_r = x.copy(), rn
        if rn <= target:
            break
        Ap = A @ p
        pAp = p @ Ap
        if not (np.isfinite(pAp) and np.isfinite(rz)) or pAp <= 0.0:
            break
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        if project is not None:
            r = project(r)
        z = inv_d * r
        if project is not None:
            z = project(z)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    rn = np.linalg.norm(r)
    if rn < best_r:
        best_x = x
    return best_x, it


def solve_spd(A, b, tol=DEFAULT_TOL, max_iter=None, x0=None):
    """Solve a symmetric positive definite system by Jacobi-preconditioned CG.

    Returns ``(x, report)``; a run that exhausts ``max_iter`` returns the best
    iterate with ``report.converged == False``.
    """
    t0 = time.perf_counter()
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float).ravel()
    if not np.all(np.isfinite(b)):
        raise LinearSolverError("right-hand side has non-finite entries")
    if not np.any(b):
        return np.zeros_like(b), SolveReport(0, 0.0, "cg", time.perf_counter() - t0)
    max_iter = max_iter or 10 * b.size
    x, it = _pcg(A, b, tol, max_iter, x0)
    res = relative_residual(A, x, b)
    return x, SolveReport(it, res, "cg", time.perf_counter() - t0, res <= tol)


def solve_general(A, b, tol=DEFAULT_TOL, max_iter=None, x0=None):
    """Solve a general square system by BiCGStab with Jacobi preconditioning.

    On breakdown or stagnation the system is re-solved densely when
    ``n <= 4096``; larger failures raise :class:`LinearSolverError`.
    """
    t0 = time.perf_counter()
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float).ravel()
    n = b.size
    if not np.any(b):
        return np.zeros_like(b), SolveReport(0, 0.0, "bicgstab", time.perf_counter() - t0)
    d = A.diagonal().copy()
    d[d == 0.0] = 1.0
    M = spla.LinearOperator((n, n), matvec=lambda v: v / d, dtype=float)
    count = [0]

    def tick(_xk):
        count[0] += 1

    x, info = spla.bicgstab(A, b, x0=x0, rtol=tol, atol=0.0,
                            maxiter=max_iter or 10 * n, M=M, callback=tick)
    res = relative_residual(A, x, b) if np.all(np.isfinite(x)) else np.inf
    if info == 0 and res <= tol:
        return x, SolveReport(count[0], res, "bicgstab", time.perf_counter() - t0)
    if n <= DENSE_CAP:
        x = scipy.linalg.solve(A.toarray(), b)
        res = relative_residual(A, x, b)
        return x, SolveReport(count[0], res, "dense", time.perf_counter() - t0, res <= tol)
    raise LinearSolverError(f"BiCGStab failed (info={info}, residual={res:.3g}) for n={n}")


class DirectSolver:
    """Sparse LU of a fixed matrix, for repeated solves."""

    def __init__(self, A):
        self.A = sp.csc_matrix(A)
        self._lu = None

    def solve(self, b):
        t0 = time.perf_counter()
        b = np.asarray(b, dtype=float)
        if not np.any(b):
            return np.zeros_like(b), SolveReport(0, 0.0, "splu", 0.0)
        if self._lu is None:
            self._lu = spla.splu(self.A)
        x = self._lu.solve(b)
        if b.ndim == 1:
            res = relative_residual(self.A, x, b)
        else:
            res = float(np.linalg.norm(b - self.A @ x) / np.linalg.norm(b))
        return x, SolveReport(1, res, "splu", time.perf_counter() - t0)


def _mean_free(v):
    return v - np.mean(v)


def solve_singular_neumann(A, b, weights=None, offset=0.0, cell_area=1.0,
                           tol=DEFAULT_TOL, max_iter=None, x0=None):
    """Solve ``A x = b`` for an operator whose kernel is the constants.

    ``A`` may be positive or negative semidefinite.  The right-hand side must
    integrate to zero (relative 1e-10).  The free constant is fixed by
    ``sum(weights * x) * cell_area + offset == 0``; without ``weights`` the
    solution has zero mean.  The grid is assumed uniform.
    """
    t0 = time.perf_counter()
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float).ravel()
    scale = np.sum(np.abs(b))
    if abs(np.sum(b)) > 1e-10 * scale:
        raise IncompatibleRHS(
            f"right-hand side integrates to {np.sum(b) * cell_area:.3e} (relative "
            f"{abs(np.sum(b)) / scale:.3e})"
        )
    if weights is not None:
        w = np.asarray(weights, dtype=float).ravel()
        total = np.sum(w) * cell_area
        if not total > 0.0:
            raise ValueError("constraint weights must have positive total")
    b = _mean_free(b)
    sign = -1.0 if A.diagonal().sum() < 0 else 1.0
    if np.any(b):
        max_iter = max_iter or 10 * b.size
        x, it = _pcg(sign * A, sign * b, tol, max_iter, x0, project=_mean_free)
        x = _mean_free(x)
    else:
        x, it = np.zeros_like(b), 0
    if weights is not None:
        x = x - (np.sum(w * x) * cell_area + offset) / total
    elif offset:
        x = x - offset / (x.size * cell_area)
    res = relative_residual(A, x, b)
    return x, SolveReport(it, res, "cg-projected", time.perf_counter() - t0, res <= max(tol, 1e-14))


def bordered_neumann(A, weights, cell_area=1.0):
    """Augment a constant-kernel operator with the row/column of a weighted
    mean constraint, giving a nonsingular ``(n+1) x (n+1)`` system."""
    w = np.asarray(weights, dtype=float).ravel() * cell_area
    n = w.size
    col = sp.csr_matrix(np.ones((n, 1)) * cell_area)
    row = sp.csr_matrix(w[None, :])
    return sp.bmat([[sp.csr_matrix(A), col], [row, None]], format="csc")
