"""Linear stability of a computed steady state.

A perturbation ``rho + i rho_s chi`` of ``u_s`` evolves as ``M w_t = -K w``
with ``w = (rho, chi)`` and block mass ``M = diag(I, rho_s^2)``.  ``K`` is the
Jacobian of the discrete polar steady system:

    rho-row: -L rho + |grad chi_s|^2 rho + 2 rho_s grad chi_s . grad chi + eps^-2 (3 rho_s^2 - 1) rho
    chi-row: -Div(rho_s^2 grad chi) - Div(dH[2 rho_s rho] grad chi_s) + rho_s^2 phi + 2 rho_s phi_s rho

where the potential perturbation ``phi`` solves

    -sigma L phi + Div(rho_s^2 grad chi) + Div(dH[2 rho_s rho] grad chi_s) = 0,
    sum(rho_s^2 phi + 2 phi_s rho_s rho) = 0.

``(rho, chi) = (0, 1)`` is an exact kernel vector (global phase).  The
spectrum of ``K w = lambda M w`` decides stability: every non-gauge
eigenvalue must have positive real part.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import operators as ops
from .linalg import DENSE_CAP, DirectSolver, bordered_neumann, solve_singular_neumann

DEFAULT_MARGIN = 1e-6
RESIDUAL_TOL = 1e-6


class LinearizedOperator:
    """Real ``2n`` linearization around ``steady`` (anything with ``grid``,
    ``rho_s``, ``chi_s``, ``phi_s``, ``epsilon`` and ``sigma``)."""

    def __init__(self, steady):
        self.steady = steady
        g = self.grid = steady.grid
        self.n = g.n
        rho_s = np.asarray(steady.rho_s, dtype=float)
        chi_s = np.asarray(steady.chi_s, dtype=float)
        phi_s = np.asarray(steady.phi_s, dtype=float)
        eps, sigma = steady.epsilon, steady.sigma
        self.rho_s, self.chi_s, self.phi_s = rho_s, chi_s, phi_s
        self.sigma = sigma
        r = rho_s.ravel()
        L = ops.laplacian_neumann(g)
        self.L = L

        self.K_rr = (-L + sp.diags(ops.grad_sq(g, chi_s).ravel() + (3.0 * r**2 - 1.0) / eps**2)).tocsr()
        self.K_rc = (sp.diags(2.0 * r) @ ops.grad_dot_matrix(g, chi_s)).tocsr()
        cL, cR = ops.harmonic_derivative_coefficients(g, rho_s**2)
        dflux = ops.face_linear_flux_matrix(g, cL, cR, ops.gradient(g, chi_s))
        # flux perturbation Div(rho_s^2 grad chi) + Div(dH[2 rho_s rho] grad chi_s)
        self.F_r = (dflux @ sp.diags(2.0 * r)).tocsr()
        self.F_c = ops.weighted_div_grad(g, rho_s**2)
        self.mass_chi = r**2
        self.phi_couple = 2.0 * r * phi_s.ravel()
        self.K_cr_local = (-self.F_r + sp.diags(self.phi_couple)).tocsr()
        self.K_cc_local = (-self.F_c).tocsr()
        # potential: -sigma L phi = -(F_r rho + F_c chi), constraint weights rho_s^2
        self._pot = DirectSolver(bordered_neumann(-sigma * L, self.mass_chi, g.cell_area))
        self._dense = None

    @property
    def mass(self):
        return np.concatenate([np.ones(self.n), self.mass_chi])

    def scale(self):
        return float(max(abs(self.K_rr.diagonal()).max(), abs(self.K_cc_local.diagonal()).max()))

    def _pot_rhs(self, rho, chi):
        rhs = -(self.F_r @ rho + self.F_c @ chi)
        offset = np.sum(self.phi_couple * rho, axis=0) * self.grid.cell_area
        return rhs, offset

    def potential(self, rho, chi, direct=True):
        """Potential perturbation ``phi`` for flattened ``rho, chi``."""
        rho = np.asarray(rho, dtype=float).ravel()
        chi = np.asarray(chi, dtype=float).ravel()
        rhs, offset = self._pot_rhs(rho, chi)
        if direct:
            x, _ = self._pot.solve(np.concatenate([rhs, [-offset]]))
            return x[: self.n]
        # flux-form divergences sum to zero exactly; drop the round-off
        rhs = rhs - np.mean(rhs)
        phi, _ = solve_singular_neumann(-self.sigma * self.L, rhs, weights=self.mass_chi,
                                        offset=offset, cell_area=self.grid.cell_area, tol=1e-13)
        return phi

    def apply(self, w):
        """``K w`` for a real or complex stacked vector ``w = (rho, chi)``."""
        w = np.asarray(w)
        if np.iscomplexobj(w):
            return self.apply(w.real) + 1j * self.apply(w.imag)
        n = self.n
        rho, chi = w[:n], w[n:]
        phi = self.potential(rho, chi)
        out_r = self.K_rr @ rho + self.K_rc @ chi
        out_c = self.K_cr_local @ rho + self.K_cc_local @ chi + self.mass_chi * phi
        return np.concatenate([out_r, out_c])

    def potential_matrix(self):
        """Dense ``n x 2n`` matrix of ``(rho, chi) -> phi``."""
        n = self.n
        B = sp.hstack([self.F_r, self.F_c]).toarray()
        rhs = np.vstack([-B, -np.concatenate([self.phi_couple, np.zeros(n)])[None, :] * self.grid.cell_area])
        x, _ = self._pot.solve(rhs)
        return x[:n]

    def dense(self):
        if self._dense is None:
            n = self.n
            if 2 * n > DENSE_CAP:
                raise ValueError(f"dense assembly limited to 2n <= {DENSE_CAP}, got {2 * n}")
            K = sp.bmat([[self.K_rr, self.K_rc], [self.K_cr_local, self.K_cc_local]]).toarray()
            K[n:] += self.mass_chi[:, None] * self.potential_matrix()
            self._dense = K
        return self._dense

    def gauge_vector(self):
        return np.concatenate([np.zeros(self.n), np.ones(self.n)])

    def augmented_matrix(self, alpha):
        """Sparse system whose Schur complement on ``(rho, chi)`` is
        ``K + alpha M g z^T`` with ``g`` the gauge vector and ``z^T w`` the mean of chi.

        Unknown order: rho, chi, phi, potential border, deflation scalar.
        """
        n = self.n
        a = self.grid.cell_area
        sL = -self.sigma * self.L
        ones = sp.csr_matrix(np.ones((n, 1)) * a)
        cons_r = sp.csr_matrix(self.phi_couple[None, :] * a)
        cons_p = sp.csr_matrix(self.mass_chi[None, :] * a)
        Mg = sp.csr_matrix(alpha * self.mass_chi[:, None])
        zrow = sp.csr_matrix(np.full((1, n), 1.0 / n))
        blocks = [
            [self.K_rr, self.K_rc, None, None, None],
            [self.K_cr_local, self.K_cc_local, sp.diags(self.mass_chi), None, Mg],
            [self.F_r, self.F_c, sL, ones, None],
            [cons_r, None, cons_p, None, None],
            [None, zrow, None, None, sp.csr_matrix([[-1.0]])],
        ]
        return sp.bmat(blocks, format="csc")


def nonlocal_potential(rho, chi, steady, direct=False):
    """Potential perturbation as a cell array (iterative solve by default)."""
    op = steady if isinstance(steady, LinearizedOperator) else LinearizedOperator(steady)
    return op.potential(rho, chi, direct=direct).reshape(op.grid.shape)


def apply_B(rho, chi, steady):
    """``K (rho, chi)`` split back into two cell arrays."""
    op = steady if isinstance(steady, LinearizedOperator) else LinearizedOperator(steady)
    out = op.apply(np.concatenate([np.ravel(rho), np.ravel(chi)]))
    return out[: op.n].reshape(op.grid.shape), out[op.n:].reshape(op.grid.shape)


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    gauge_eigenvalue: complex = 0.0
    gauge_residual: float = 0.0
    min_re_nongauge: float = np.nan
    verdict: str = "marginal"
    method: str = "dense"
    margin: float = DEFAULT_MARGIN

    def mode(self, k, grid):
        w = self.eigenvectors[:, k]
        n = grid.n
        return w[:n].reshape(grid.shape), w[n:].reshape(grid.shape)

    def as_dict(self, limit=None):
        ev = self.eigenvalues if limit is None else self.eigenvalues[:limit]
        res = self.residuals if limit is None else self.residuals[:limit]
        return {
            "method": self.method,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in ev],
            "residuals": [float(r) for r in res],
            "gauge_eigenvalue": [float(np.real(self.gauge_eigenvalue)), float(np.imag(self.gauge_eigenvalue))],
            "gauge_residual": float(self.gauge_residual),
            "min_re_nongauge": float(self.min_re_nongauge),
            "verdict": self.verdict,
            "margin": self.margin,
        }


def _verdict(min_re, margin):
    if min_re > margin:
        return "stable"
    if min_re < -margin:
        return "unstable"
    return "marginal"


def _sort(vals, vecs):
    order = np.lexsort((vals.imag, np.round(vals.real, 12)))
    return vals[order], vecs[:, order]


def _residuals(op, vals, vecs, K=None):
    M = op.mass
    out = np.empty(len(vals))
    for k, lam in enumerate(vals):
        w = vecs[:, k]
        Kw = K @ w if K is not None else op.apply(w)
        Mw = M * w
        out[k] = np.linalg.norm(Kw - lam * Mw) / np.linalg.norm(Mw)
    return out


def _gauge_rayleigh(op):
    g = op.gauge_vector()
    Kg = op.apply(g)
    Mg = op.mass * g
    return complex(g @ Kg / (g @ Mg)), float(np.linalg.norm(Kg) / np.linalg.norm(Mg))


def _dense_spectrum(op, k, margin):
    K = op.dense()
    m = np.sqrt(op.mass)
    S = K / m[:, None] / m[None, :]
    vals, Y = scipy.linalg.eig(S)
    W = Y / m[:, None]
    ghat = m * op.gauge_vector()
    ghat /= np.linalg.norm(ghat)
    overlap = np.abs(ghat @ Y) / np.linalg.norm(Y, axis=0)
    ig = int(np.argmax(overlap))
    gauge = complex(vals[ig])
    keep = np.arange(len(vals)) != ig
    vals, W = _sort(vals[keep], W[:, keep])
    W = W / np.linalg.norm(W, axis=0)
    res = _residuals(op, vals, W, K)
    g = op.gauge_vector()
    gauge_res = float(np.linalg.norm(K @ g) / np.linalg.norm(op.mass * g))
    min_re = float(vals.real.min())
    return SpectrumReport(vals, W, res, gauge, gauge_res, min_re, _verdict(min_re, margin), "dense", margin)


def _iterative_spectrum(op, k, margin, seed=0):
    n = op.n
    alpha = 10.0 * op.scale()
    aug = DirectSolver(op.augmented_matrix(alpha))
    M = op.mass
    size = aug.A.shape[0]

    def matvec(x):
        b = np.zeros(size)
        b[: 2 * n] = M * np.real(x)
        y, _ = aug.solve(b)
        out = y[: 2 * n]
        if np.iscomplexobj(x):
            b[: 2 * n] = M * np.imag(x)
            yi, _ = aug.solve(b)
            out = out + 1j * yi[: 2 * n]
        return out

    A = spla.LinearOperator((2 * n, 2 * n), matvec=matvec, dtype=float)
    ncv = min(2 * n - 1, max(2 * k + 1, k + 5, 20))
    v0 = np.random.default_rng(seed).standard_normal(2 * n)
    nu, Wt = spla.eigs(A, k=k, which="LM", ncv=ncv, v0=v0, tol=1e-12)
    vals = 1.0 / nu
    # undo the deflation on the eigenvectors: w = w~ + c g
    g = op.gauge_vector()
    zt = Wt[n:].mean(axis=0)
    W = Wt - np.outer(g, alpha * zt / vals)
    W = W / np.linalg.norm(W, axis=0)
    vals, W = _sort(vals, W)
    res = _residuals(op, vals, W)
    gauge, gauge_res = _gauge_rayleigh(op)
    min_re = float(vals.real.min())
    return SpectrumReport(vals, W, res, gauge, gauge_res, min_re, _verdict(min_re, margin), "iterative", margin)


def spectrum(op, k=6, mode="auto", margin=DEFAULT_MARGIN):
    """Low-real-part spectrum of ``K w = lambda M w`` with the gauge mode set aside.

    ``mode`` is ``"dense"`` (all eigenvalues; ``2n <= 4096``), ``"iterative"``
    (``k`` eigenvalues nearest zero by shift-invert with the gauge deflated)
    or ``"auto"``.  Iterative pairs whose residual exceeds the tolerance
    trigger a dense fallback when the size allows it.
    """
    if not isinstance(op, LinearizedOperator):
        op = LinearizedOperator(op)
    if k < 1:
        raise ValueError("k must be at least 1")
    small = 2 * op.n <= DENSE_CAP
    if mode == "auto":
        mode = "dense" if 2 * op.n <= 2048 else "iterative"
    if mode == "dense":
        return _dense_spectrum(op, k, margin)
    if mode != "iterative":
        raise ValueError(f"unknown spectrum mode {mode!r}")
    try:
        rep = _iterative_spectrum(op, k, margin)
    except spla.ArpackNoConvergence:
        if small:
            return _dense_spectrum(op, k, margin)
        raise
    if np.any(rep.residuals > RESIDUAL_TOL) and small:
        return _dense_spectrum(op, k, margin)
    return rep
