"""Discrete Sobolev norms, residuals of the steady equations, and log-log fits."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import operators as ops


@dataclass(frozen=True)
class NormSuite:
    l2: float
    l4: float
    linf: float
    w12: float
    w22: float

    def as_dict(self):
        return asdict(self)


def _arr(grid, f):
    return ops._values(grid, f)


def l2(grid, f):
    f = _arr(grid, f)
    return float(np.sqrt(np.sum(np.abs(f) ** 2) * grid.cell_area))


def grad_l2(grid, f):
    """L2 norm of the face gradient, each face weighted by hx*hy."""
    g = ops.gradient(grid, _arr(grid, f))
    return float(np.sqrt((np.sum(np.abs(g.x) ** 2) + np.sum(np.abs(g.y) ** 2)) * grid.cell_area))


def _second_difference(f, h, axis):
    """Three-point second difference; one-sided four-point closure at both ends."""
    f = np.moveaxis(f, axis, 0)
    d = np.empty_like(f)
    d[1:-1] = f[2:] - 2.0 * f[1:-1] + f[:-2]
    d[0] = 2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]
    d[-1] = 2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]
    return np.moveaxis(d / h**2, 0, axis)


def hessian(grid, f):
    """``(f_xx, f_xy, f_yy)`` cell arrays."""
    f = _arr(grid, f)
    fxx = _second_difference(f, grid.hx, 0)
    fyy = _second_difference(f, grid.hy, 1)
    fx = np.gradient(f, grid.hx, axis=0, edge_order=2)
    fxy = np.gradient(fx, grid.hy, axis=1, edge_order=2)
    return fxx, fxy, fyy


def hessian_l2(grid, f):
    fxx, fxy, fyy = hessian(grid, f)
    total = np.abs(fxx) ** 2 + 2.0 * np.abs(fxy) ** 2 + np.abs(fyy) ** 2
    return float(np.sqrt(np.sum(total) * grid.cell_area))


def norms(grid, f) -> NormSuite:
    f = _arr(grid, f)
    a = grid.cell_area
    n2 = l2(grid, f)
    n4 = float(np.sum(np.abs(f) ** 4 * a) ** 0.25)
    ninf = float(np.max(np.abs(f)))
    g = grad_l2(grid, f)
    d2 = hessian_l2(grid, f)
    w12 = float(np.sqrt(n2**2 + g**2))
    w22 = float(np.sqrt(w12**2 + d2**2))
    return NormSuite(n2, n4, ninf, w12, w22)


@dataclass(frozen=True)
class ScalingFit:
    variable: str
    log_x: tuple
    log_y: tuple
    slope: float
    intercept: float
    max_deviation: float

    def as_dict(self):
        return {
            "variable": self.variable,
            "x": [float(np.exp(v)) for v in self.log_x],
            "y": [float(np.exp(v)) for v in self.log_y],
            "slope": self.slope,
            "intercept": self.intercept,
            "max_deviation": self.max_deviation,
        }


def scaling_fit(x, y, variable="x"):
    """Least-squares line through ``(log x, log y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3 or x.size != y.size:
        raise ValueError("scaling fit needs at least three (x, y) pairs")
    if np.any(x <= 0) or np.any(y <= 0) or not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("scaling fit needs positive finite samples")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    dev = float(np.max(np.abs(ly - (slope * lx + intercept))))
    return ScalingFit(variable, tuple(lx), tuple(ly), float(slope), float(intercept), dev)


def _face_weight(grid, a):
    """Harmonic face mean that tolerates zeros (a zero cell blocks the face)."""
    a = _arr(grid, a)

    def hm(p, q):
        s = p + q
        return np.divide(2.0 * p * q, s, out=np.zeros_like(s), where=s > 0)

    wx = np.zeros((grid.nx + 1, grid.ny))
    wy = np.zeros((grid.nx, grid.ny + 1))
    wx[1:-1] = hm(a[:-1], a[1:])
    wy[:, 1:-1] = hm(a[:, :-1], a[:, 1:])
    return ops.VectorField(grid, wx, wy)


def eq4_residual(grid, rho, chi, phi, epsilon, sigma, profile=None):
    """Discrete residuals of the polar steady system.

    Returns a dict with the L2 norms of

    * ``rho_eq``: ``-L rho + rho |grad chi|^2 - eps^-2 rho (1 - rho^2)``
    * ``chi_eq``: ``Div(rho^2 grad chi) - rho^2 phi``
    * ``phi_eq``: ``sigma (L phi - s_J) - Div(rho^2 grad chi)``

    plus ``phi_integral``, the integral of ``rho^2 phi``, and ``phi_integral_relative``,
    that integral over ``||phi||_2 * |Omega|``.
    """
    rho, chi, phi = (_arr(grid, f) for f in (rho, chi, phi))
    r2 = rho**2
    w = _face_weight(grid, r2)
    flux_div = ops.div_weighted_grad(grid, w, chi)
    src = np.zeros(grid.shape) if profile is None else ops.boundary_flux_source(grid, profile, sigma)
    ra = -ops.laplacian(grid, rho) + rho * ops.grad_sq(grid, chi) - rho * (1.0 - r2) / epsilon**2
    rb = flux_div - r2 * phi
    rc = sigma * (ops.laplacian(grid, phi) - src) - flux_div
    integral = float(np.sum(r2 * phi) * grid.cell_area)
    scale = l2(grid, phi) * grid.area
    return {
        "rho_eq": l2(grid, ra),
        "chi_eq": l2(grid, rb),
        "phi_eq": l2(grid, rc),
        "phi_integral": integral,
        "phi_integral_relative": abs(integral) / scale if scale > 0 else abs(integral),
    }


@dataclass(frozen=True)
class ConvergenceStudy:
    case: str
    sizes: tuple
    errors: tuple
    orders: tuple

    def as_dict(self):
        return asdict(self)


def manufactured_convergence(case, sizes=(16, 32, 64, 128), lx=1.0, ly=1.0):
    """Max-norm error of the discrete solve against a manufactured solution
    on a sequence of grids, and the observed orders between neighbours.

    Pure Neumann cases are compared modulo constants: the forcing is
    projected to zero mean and both sides are made mean free.
    """
    import scipy.sparse as sp

    from .grid import build_grid
    from .linalg import solve_singular_neumann, solve_spd

    errors = []
    for n in sizes:
        g = build_grid(n, n, lx, ly)
        d = case.on_grid(g)
        if case.name == "helmholtz":
            A = (-case.sigma * ops.laplacian_neumann(g) + sp.identity(g.n)).tocsr()
            u, _ = solve_spd(A, d["forcing"].ravel(), tol=1e-13)
            err = u.reshape(g.shape) - d["exact"]
        else:
            if case.coefficient is None:
                A = ops.laplacian_neumann(g)
            else:
                A = ops.weighted_div_grad(g, d["coefficient"])
            f = d["forcing"] - d["forcing"].mean()
            u, _ = solve_singular_neumann(-A, -f.ravel(), cell_area=g.cell_area, tol=1e-13)
            err = u.reshape(g.shape) - (d["exact"] - d["exact"].mean())
        errors.append(float(np.max(np.abs(err))))
    e = np.array(errors)
    orders = tuple(float(v) for v in np.log2(e[:-1] / e[1:]))
    return ConvergenceStudy(case.name, tuple(sizes), tuple(errors), orders)
