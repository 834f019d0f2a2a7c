"""Exact steady state as the fixed point of a linear-solve map around the
leading-order state.

Unknowns are the corrections ``v = (rho1, chi1, phi1)`` with
``rho = rho0 + rho1``, ``chi = ||J|| (chi0~ + chi1)`` and
``phi = ||J|| (phi0~ + phi1)``.  One application of the map solves the
coupled linear system

    (-L + ||J||^2 |grad chi0~|^2 + eps^-2 (3 rho0^2 - 1)) eta + 2 ||J||^2 rho0 grad chi0~ . grad omega = f1
    -Div(rho0^2 grad omega) - Div(dH[2 rho0 eta] grad chi0~) + rho0^2 phi + 2 rho0 phi0~ eta = f2
    (-sigma L + rho0^2) phi + 2 rho0 phi0~ eta = f3

whose right-hand sides ``f(v)`` collect every term of at least second order
in ``v``.  ``dH`` is the derivative of the harmonic face mean, so a fixed
point satisfies the discrete polar system (harmonic face weights) exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import operators as ops
from .diagnostics import eq4_residual, grad_l2, hessian_l2, norms
from .errors import GridMismatch, NoContraction
from .linalg import DirectSolver


@dataclass(frozen=True)
class CorrectionTriple:
    grid: object
    rho1: np.ndarray
    chi1: np.ndarray
    phi1: np.ndarray

    def __post_init__(self):
        for f in (self.rho1, self.chi1, self.phi1):
            if np.shape(f) != self.grid.shape:
                raise GridMismatch(f"correction of shape {np.shape(f)} on grid {self.grid.shape}")

    @classmethod
    def zeros(cls, grid):
        z = np.zeros(grid.shape)
        return cls(grid, z, z, z)

    def __add__(self, other):
        return CorrectionTriple(self.grid, self.rho1 + other.rho1, self.chi1 + other.chi1,
                                self.phi1 + other.phi1)

    def __sub__(self, other):
        return CorrectionTriple(self.grid, self.rho1 - other.rho1, self.chi1 - other.chi1,
                                self.phi1 - other.phi1)

    def __mul__(self, t):
        return CorrectionTriple(self.grid, t * self.rho1, t * self.chi1, t * self.phi1)

    __rmul__ = __mul__

    def stacked(self):
        return np.concatenate([self.rho1.ravel(), self.chi1.ravel(), self.phi1.ravel()])


def h_norm(v: CorrectionTriple, epsilon):
    """``||eta||_{1,2} + ||eta||_inf + eps ||D^2 eta||_2 + ||omega||_{2,2} + ||phi||_{2,2}``."""
    g = v.grid
    eta = v.rho1
    l2 = np.sqrt(np.sum(eta**2) * g.cell_area)
    w12 = np.sqrt(l2**2 + grad_l2(g, eta) ** 2)
    return float(
        w12
        + np.max(np.abs(eta))
        + epsilon * hessian_l2(g, eta)
        + norms(g, v.chi1).w22
        + norms(g, v.phi1).w22
    )


def assemble_rhs(v: CorrectionTriple, background):
    """Right-hand sides ``(f1, f2, f3)`` of the linear system for a given ``v``."""
    g = background.grid
    if v.grid != g:
        raise GridMismatch("correction and background live on different grids")
    Jn = background.norm_J
    eps = background.epsilon
    rho0 = background.rho0
    chi0 = background.chi0_tilde
    phi0 = background.phi0_tilde
    r1, c1, p1 = v.rho1, v.chi1, v.phi1

    gsq1 = ops.grad_sq(g, c1)
    f1 = (
        ops.laplacian(g, rho0)
        - Jn**2 * gsq1 * rho0
        - Jn**2 * r1 * (2.0 * ops.grad_dot(g, chi0, c1) + gsq1)
        - (3.0 * rho0 + r1) * r1**2 / eps**2
    )
    f3 = -r1 * (2.0 * rho0 + r1) * p1 - r1**2 * phi0

    # H(rho^2) - H(rho0^2) = lin + rem, and lin is linear in p
    a = rho0**2
    lin, rem = ops.harmonic_expansion(g, a, 2.0 * rho0 * r1 + r1**2)
    lin_sq, _ = ops.harmonic_expansion(g, a, r1**2)
    nonlinear = lin_sq + rem
    total = lin + rem
    f2 = (
        f3
        + ops.divergence(nonlinear * ops.gradient(g, chi0))
        + ops.divergence(total * ops.gradient(g, c1))
    )
    return f1, f2, f3


class FixedPointMap:
    """The linear solve ``v -> A^{-1} f(v)`` for a fixed background.

    The block matrix does not depend on ``v``; it is assembled and factored
    on first use, so a background with zero current never builds it.
    """

    def __init__(self, background):
        self.background = background
        self.grid = background.grid
        self._solver = None

    def matrix(self):
        bg = self.background
        g = self.grid
        n = g.n
        Jn = bg.norm_J
        eps = bg.epsilon
        rho0 = bg.rho0.ravel()
        chi0 = bg.chi0_tilde
        phi0 = bg.phi0_tilde.ravel()
        L = ops.laplacian_neumann(g)
        a = rho0**2
        coef = Jn**2 * ops.grad_sq(g, chi0).ravel() + (3.0 * a - 1.0) / eps**2

        A11 = -L + sp.diags(coef)
        A12 = sp.diags(2.0 * Jn**2 * rho0) @ ops.grad_dot_matrix(g, chi0)
        cL, cR = ops.harmonic_derivative_coefficients(g, bg.rho0**2)
        dflux = ops.face_linear_flux_matrix(g, cL, cR, ops.gradient(g, chi0))
        A21 = -(dflux @ sp.diags(2.0 * rho0)) + sp.diags(2.0 * rho0 * phi0)
        A22 = -ops.weighted_div_grad(g, bg.rho0**2)
        A23 = sp.diags(a)
        A31 = sp.diags(2.0 * rho0 * phi0)
        A33 = -bg.sigma * L + sp.diags(a)
        # omega's free constant: bordered by its mean
        col = sp.csr_matrix(np.concatenate([np.zeros(n), np.ones(n), np.zeros(n)])[:, None])
        row = col.T * g.cell_area
        return sp.bmat(
            [
                [A11, A12, None, None],
                [A21, A22, A23, col[n:2 * n]],
                [A31, None, A33, None],
                [None, row[:, n:2 * n], None, None],
            ],
            format="csc",
        )

    def solve(self, f1, f2, f3):
        g = self.grid
        n = g.n
        b = np.concatenate([np.ravel(f1), np.ravel(f2), np.ravel(f3), [0.0]])
        if not np.any(b):
            return CorrectionTriple.zeros(g)
        if self._solver is None:
            self._solver = DirectSolver(self.matrix())
        x, _ = self._solver.solve(b)
        s = g.shape
        return CorrectionTriple(g, x[:n].reshape(s), x[n:2 * n].reshape(s), x[2 * n:3 * n].reshape(s))

    def __call__(self, v):
        return self.solve(*assemble_rhs(v, self.background))


def apply_A(v, background, fixed_map=None):
    """One application of the fixed-point map."""
    return (fixed_map or FixedPointMap(background))(v)


@dataclass
class SteadyStateSolution:
    rho_s: np.ndarray
    chi_s: np.ndarray
    phi_s: np.ndarray
    background: object
    correction: CorrectionTriple
    iterations: int
    contraction_ratios: list
    increments: list
    h_norm_final: float
    eq4_residuals: dict
    wall_time: float = 0.0
    fixed_map: object = field(default=None, repr=False)

    @property
    def grid(self):
        return self.background.grid

    @property
    def epsilon(self):
        return self.background.epsilon

    @property
    def sigma(self):
        return self.background.sigma

    @property
    def profile(self):
        return self.background.profile

    @property
    def delta(self):
        return self.background.delta

    def summary(self):
        return {
            "delta": self.delta,
            "iterations": self.iterations,
            "contraction_ratios": list(self.contraction_ratios),
            "increments": list(self.increments),
            "h_norm_final": self.h_norm_final,
            "eq4_residuals": dict(self.eq4_residuals),
            "max_abs_rho_s_minus_rho0": float(np.max(np.abs(self.correction.rho1))),
            "min_rho_s": float(np.min(self.rho_s)),
        }


def solve_steady(background, tol=1e-10, max_iter=100, v0=None, atol=1e-15):
    """Picard iteration ``v <- A(v)`` from ``v0`` (default zero).

    Stops when ``||v_{k+1} - v_k||_H <= tol * ||v_{k+1}||_H`` or the increment
    drops below ``atol``.  Three consecutive ratios ``>= 1`` raise
    :class:`NoContraction`.
    """
    t0 = time.perf_counter()
    g = background.grid
    eps = background.epsilon
    fmap = FixedPointMap(background)
    v = CorrectionTriple.zeros(g) if v0 is None else v0
    ratios, increments = [], []
    bad = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        v_new = fmap(v)
        inc = h_norm(v_new - v, eps)
        size = h_norm(v_new, eps)
        if increments:
            ratio = inc / increments[-1] if increments[-1] > 0 else 0.0
            ratios.append(ratio)
            bad = bad + 1 if ratio >= 1.0 else 0
        increments.append(inc)
        v = v_new
        if not np.isfinite(inc) or bad >= 3:
            raise NoContraction("steady_state", ratios, background.delta)
        if inc <= tol * size or inc <= atol:
            converged = True
            break
    if not converged:
        raise NoContraction("steady_state", ratios + [np.inf], background.delta)

    Jn = background.norm_J
    rho_s = background.rho0 + v.rho1
    chi_s = Jn * (background.chi0_tilde + v.chi1)
    phi_s = Jn * (background.phi0_tilde + v.phi1)
    res = eq4_residual(g, rho_s, chi_s, phi_s, eps, background.sigma, background.profile)
    return SteadyStateSolution(
        rho_s, chi_s, phi_s, background, v, it, ratios, increments,
        h_norm(v, eps), res, time.perf_counter() - t0, fmap,
    )
