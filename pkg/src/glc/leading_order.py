"""Approximate steady state obtained by dropping the -Laplacian(rho) term.

All fields are normalized by the current norm ``||J||``: the base pair
solves the two linear problems

    -sigma L phi00 + phi00 = 0,   flux datum J / ||J||,
    L chi00 = phi00,              zero flux, zero mean,

and the corrections ``(varphi, omega)`` solve ``F = 0`` with

    F1 = -sigma L varphi + varphi - delta^2 |grad chi0|^2 phi0
    F2 = -L omega + varphi - delta^2 |grad chi0|^2 phi0 + delta^2 Div(|grad chi0|^2 grad chi0)

where ``chi0 = chi00 + omega`` and ``phi0 = phi00 + varphi``.  The cubic
divergence term is discretized as ``(L - W(rho0^2)) chi0`` so that ``F = 0``
is exactly the discrete reduced system with harmonic face weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import operators as ops
from .errors import DeltaGuardExceeded, IncompatibleRHS, NoContraction, SupercriticalCurrent
from .linalg import solve_singular_neumann, solve_spd

BASE_TOL = 1e-13
DEFAULT_DELTA_GUARD = 0.5


@dataclass(frozen=True)
class LeadingOrderState:
    grid: object
    profile: object
    epsilon: float
    sigma: float
    chi00_tilde: np.ndarray
    phi00_tilde: np.ndarray
    omega_delta: np.ndarray
    varphi_delta: np.ndarray
    rho0: np.ndarray
    corrector_residual: float = np.inf
    iterations: int = 0
    residual_history: tuple = field(default=(), repr=False)

    @property
    def norm_J(self):
        return self.profile.norm_J

    @property
    def delta(self):
        return self.epsilon * self.profile.norm_J

    @property
    def chi0_tilde(self):
        return self.chi00_tilde + self.omega_delta

    @property
    def phi0_tilde(self):
        return self.phi00_tilde + self.varphi_delta

    @property
    def chi0(self):
        return self.norm_J * self.chi0_tilde

    @property
    def phi0(self):
        return self.norm_J * self.phi0_tilde

    def summary(self):
        return {
            "delta": self.delta,
            "epsilon": self.epsilon,
            "sigma": self.sigma,
            "norm_J": self.norm_J,
            "iterations": self.iterations,
            "corrector_residual": self.corrector_residual,
            "max_one_minus_rho0": float(np.max(1.0 - self.rho0)),
        }


def _l2(grid, f):
    return float(np.sqrt(np.sum(f**2) * grid.cell_area))


def solve_base_phi(grid, profile, sigma, tol=BASE_TOL):
    """``-sigma L phi + phi = 0`` with the profile as flux datum (unnormalized)."""
    L = ops.laplacian_neumann(grid)
    A = (-sigma) * L + sp.identity(grid.n, format="csr")
    rhs = -sigma * ops.boundary_flux_source(grid, profile, sigma)
    x, _ = solve_spd(A, rhs.ravel(), tol=tol)
    return x.reshape(grid.shape)


def solve_base_chi(grid, phi00, tol=BASE_TOL):
    """``L chi = phi00`` with zero flux and zero mean."""
    L = ops.laplacian_neumann(grid)
    try:
        x, _ = solve_singular_neumann(L, np.asarray(phi00).ravel(), tol=tol)
    except IncompatibleRHS as exc:
        raise IncompatibleRHS(f"base potential does not integrate to zero: {exc}") from exc
    return x.reshape(grid.shape)


def density_from_phase(grid, chi0_tilde, delta):
    """``sqrt(1 - delta^2 |grad chi0|^2)``, raising when the radicand is not positive."""
    q = delta**2 * ops.grad_sq(grid, chi0_tilde)
    k = int(np.argmax(q))
    if q.flat[k] >= 1.0:
        raise SupercriticalCurrent(tuple(int(i) for i in np.unravel_index(k, grid.shape)), float(q.flat[k]))
    return np.sqrt(1.0 - q)


def initial_state(grid, profile, epsilon, sigma):
    """Base solution with zero corrections."""
    zeros = np.zeros(grid.shape)
    if profile.norm_J == 0.0:
        return LeadingOrderState(grid, profile, epsilon, sigma, zeros, zeros, zeros, zeros,
                                 np.ones(grid.shape))
    unit = profile.scaled(1.0 / profile.norm_J)
    phi00 = solve_base_phi(grid, unit, sigma)
    chi00 = solve_base_chi(grid, phi00)
    return LeadingOrderState(grid, profile, epsilon, sigma, chi00, phi00, zeros, zeros,
                             np.ones(grid.shape))


def corrector_residual(state):
    """The two components of ``F`` and the density they imply."""
    g = state.grid
    L = ops.laplacian_neumann(g)
    chi0 = state.chi0_tilde
    phi0 = state.phi0_tilde
    delta = state.delta
    rho0 = density_from_phase(g, chi0, delta)
    q = 1.0 - rho0**2
    varphi = state.varphi_delta.ravel()
    omega = state.omega_delta.ravel()
    W = ops.weighted_div_grad(g, rho0**2)
    cubic = (L @ chi0.ravel() - W @ chi0.ravel()).reshape(g.shape)
    source_term = (q * phi0).ravel()
    F1 = -state.sigma * (L @ varphi) + varphi - source_term
    F2 = -(L @ omega) + varphi - source_term + cubic.ravel()
    return F1.reshape(g.shape), F2.reshape(g.shape), rho0


def solve_corrector(state, tol=1e-10, max_iter=50, delta_guard=DEFAULT_DELTA_GUARD):
    """Drive ``F`` to zero by quasi-Newton steps with the frozen derivative
    ``DF(0, 0, 0) = [(-sigma L + 1) varphi, -L omega + varphi]``.

    Converged when the discrete L2 norm of ``(F1, F2)`` is at most ``tol``.
    """
    g = state.grid
    if state.delta >= delta_guard:
        raise DeltaGuardExceeded(state.delta, delta_guard)
    L = ops.laplacian_neumann(g)
    A_phi = (-state.sigma) * L + sp.identity(g.n, format="csr")
    history = []
    ratios = []
    growth = 0
    for it in range(1, max_iter + 1):
        F1, F2, rho0 = corrector_residual(state)
        res = float(np.hypot(_l2(g, F1), _l2(g, F2)))
        if history:
            ratios.append(res / history[-1] if history[-1] > 0 else 0.0)
            growth = growth + 1 if res > history[-1] else 0
        history.append(res)
        if not np.isfinite(res) or growth >= 3:
            raise NoContraction("leading_order", ratios, state.delta)
        if res <= tol:
            return replace(state, rho0=rho0, corrector_residual=res, iterations=it,
                           residual_history=tuple(history))
        dphi, _ = solve_spd(A_phi, -F1.ravel(), tol=BASE_TOL)
        rhs = -F2.ravel() - dphi
        # the two right-hand sides cancel in integral; remove round-off
        rhs -= np.mean(rhs)
        domega, _ = solve_singular_neumann(-L, rhs, tol=BASE_TOL)
        state = replace(
            state,
            varphi_delta=state.varphi_delta + dphi.reshape(g.shape),
            omega_delta=state.omega_delta + domega.reshape(g.shape),
        )
    raise NoContraction("leading_order", ratios + [np.inf], state.delta)


def solve_leading_order(grid, profile, epsilon, sigma, tol=1e-10, max_iter=50,
                        delta_guard=DEFAULT_DELTA_GUARD):
    state = initial_state(grid, profile, epsilon, sigma)
    return solve_corrector(state, tol=tol, max_iter=max_iter, delta_guard=delta_guard)
