"""Closed-form and brute-force reference answers.

Nothing here calls the operators or solvers under test: 1D problems are
assembled and solved densely from scratch, the zero-current spectrum is
written in closed form, and manufactured forcings are hand-derived.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class OracleCase:
    name: str
    inputs: dict
    expected: dict
    tolerance: float
    note: str


@dataclass(frozen=True)
class OneDPhi:
    x: np.ndarray
    dense: np.ndarray
    closed: np.ndarray

    @property
    def discrepancy(self):
        return float(np.max(np.abs(self.dense - self.closed)))


def closed_1d_phi(x, j, sigma, lx):
    """``-sigma phi'' + phi = 0`` on (0, lx), ``phi'(0) = phi'(lx) = j / sigma``."""
    k = 1.0 / np.sqrt(sigma)
    return j * np.sinh(k * (x - lx / 2)) / (np.sqrt(sigma) * np.cosh(k * lx / 2))


def closed_1d_chi(x, j, sigma, lx):
    """Zero-mean ``chi`` with ``chi'' = phi`` (phi from :func:`closed_1d_phi`) and zero flux."""
    k = 1.0 / np.sqrt(sigma)
    A = j / (np.sqrt(sigma) * np.cosh(k * lx / 2))
    c = lx / 2
    return A / k**2 * np.sinh(k * (x - c)) - A / k * np.cosh(k * c) * (x - c)


def oracle_1d_phi(j, sigma, lx, n):
    """Dense three-point solve next to the closed form on ``n`` cell centers."""
    h = lx / n
    x = (np.arange(n) + 0.5) * h
    A = np.zeros((n, n))
    c = sigma / h**2
    for i in range(n):
        A[i, i] = 1.0
        if i > 0:
            A[i, i] += c
            A[i, i - 1] = -c
        if i < n - 1:
            A[i, i] += c
            A[i, i + 1] = -c
    b = np.zeros(n)
    # flux phi' = j / sigma through both ends
    b[0] = -j / h
    b[-1] = j / h
    return OneDPhi(x, np.linalg.solve(A, b), closed_1d_phi(x, j, sigma, lx))


def neumann_eigenvalues(nx, ny, lx, ly):
    """All eigenvalues of the discrete Neumann Laplacian (as a positive operator)."""
    hx, hy = lx / nx, ly / ny
    mx = (2.0 / hx**2) * (1.0 - np.cos(np.arange(nx) * np.pi / nx))
    my = (2.0 / hy**2) * (1.0 - np.cos(np.arange(ny) * np.pi / ny))
    return np.add.outer(mx, my).ravel()


def oracle_j0_spectrum(epsilon, sigma, nx, ny, lx=1.0, ly=1.0, m_max=None):
    """Sorted spectrum of the zero-current linearization.

    ``{2/eps^2 + mu} U {1/sigma + mu, mu != 0} U {0}`` over the discrete
    Neumann eigenvalues ``mu``; ``m_max`` limits the mode indices per axis.
    """
    if m_max is not None:
        nx_, ny_ = min(nx, m_max + 1), min(ny, m_max + 1)
        hx, hy = lx / nx, ly / ny
        mx = (2.0 / hx**2) * (1.0 - np.cos(np.arange(nx_) * np.pi / nx))
        my = (2.0 / hy**2) * (1.0 - np.cos(np.arange(ny_) * np.pi / ny))
        mu = np.add.outer(mx, my).ravel()
    else:
        mu = neumann_eigenvalues(nx, ny, lx, ly)
    nonzero = mu[mu > 0]
    vals = np.concatenate([2.0 / epsilon**2 + mu, 1.0 / sigma + nonzero, [0.0]])
    return np.sort(vals)


def smallest_nongauge_j0(epsilon, sigma, nx, ny, lx=1.0, ly=1.0):
    mu = np.sort(neumann_eigenvalues(nx, ny, lx, ly))
    return min(2.0 / epsilon**2, 1.0 / sigma + mu[1])


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    exact: Callable
    forcing: Callable
    coefficient: Callable = None
    sigma: float = 1.0
    note: str = ""

    def on_grid(self, grid):
        x, y = grid.mesh()
        out = {"exact": self.exact(x, y, grid.lx, grid.ly),
               "forcing": self.forcing(x, y, grid.lx, grid.ly)}
        if self.coefficient is not None:
            out["coefficient"] = self.coefficient(x, y, grid.lx, grid.ly)
        return out

    def self_check(self, points=((0.13, 0.41), (0.5, 0.77), (0.81, 0.29)), lx=1.0, ly=1.0, h=1e-3):
        """Largest gap between the recorded forcing and a fourth-order
        finite-difference evaluation of the operator at a few points."""
        worst = 0.0
        for px, py in points:
            u = lambda s, t: self.exact(s, t, lx, ly)  # noqa: E731
            a = (lambda s, t: self.coefficient(s, t, lx, ly)) if self.coefficient else (lambda s, t: 1.0)

            def flux_x(s, t):
                d = (-u(s + 2 * h, t) + 8 * u(s + h, t) - 8 * u(s - h, t) + u(s - 2 * h, t)) / (12 * h)
                return a(s, t) * d

            def flux_y(s, t):
                d = (-u(s, t + 2 * h) + 8 * u(s, t + h) - 8 * u(s, t - h) + u(s, t - 2 * h)) / (12 * h)
                return a(s, t) * d

            div = ((-flux_x(px + 2 * h, py) + 8 * flux_x(px + h, py) - 8 * flux_x(px - h, py)
                    + flux_x(px - 2 * h, py)) / (12 * h)
                   + (-flux_y(px, py + 2 * h) + 8 * flux_y(px, py + h) - 8 * flux_y(px, py - h)
                      + flux_y(px, py - 2 * h)) / (12 * h))
            if self.name == "helmholtz":
                value = -self.sigma * div + u(px, py)
            else:
                value = div
            worst = max(worst, abs(value - self.forcing(px, py, lx, ly)))
        return worst


def _cos_x(x, y, lx, ly):
    return np.cos(np.pi * x / lx) + 0.0 * y


def _cos_xy(x, y, lx, ly):
    return np.cos(np.pi * x / lx) * np.cos(np.pi * y / ly)


MANUFACTURED = {
    "cos-x": ManufacturedCase(
        "cos-x",
        exact=_cos_x,
        forcing=lambda x, y, lx, ly: -(np.pi / lx) ** 2 * _cos_x(x, y, lx, ly),
        note="Lap cos(pi x/lx) = -(pi/lx)^2 cos(pi x/lx); zero normal derivative on every edge",
    ),
    "weighted": ManufacturedCase(
        "weighted",
        exact=_cos_x,
        coefficient=lambda x, y, lx, ly: 1.0 + x + 0.0 * y,
        forcing=lambda x, y, lx, ly: (-(np.pi / lx) * np.sin(np.pi * x / lx)
                                      - (1.0 + x) * (np.pi / lx) ** 2 * np.cos(np.pi * x / lx) + 0.0 * y),
        note="Div((1+x) grad cos(pi x/lx)) = a' chi' + a chi'' = -(pi/lx) sin(pi x/lx) - (1+x)(pi/lx)^2 cos(pi x/lx)",
    ),
    "helmholtz": ManufacturedCase(
        "helmholtz",
        exact=_cos_xy,
        forcing=lambda x, y, lx, ly: (np.pi**2 * (1 / lx**2 + 1 / ly**2) + 1.0) * _cos_xy(x, y, lx, ly),
        note="(-sigma Lap + rho^2) phi with rho^2 = 1, sigma = 1: (pi^2 (lx^-2 + ly^-2) + 1) phi",
    ),
}


def oracle_manufactured(case_id):
    try:
        return MANUFACTURED[case_id]
    except KeyError:
        raise KeyError(f"unknown manufactured case {case_id!r}; known: {sorted(MANUFACTURED)}") from None


def catalogue():
    """Every oracle with its inputs, expected values and derivation note."""
    cases = []
    o = oracle_1d_phi(1.0, 1.0, 4.0, 4096)
    cases.append(OracleCase(
        "1d-phi", {"j": 1.0, "sigma": 1.0, "lx": 4.0, "n": 4096},
        {"dense_vs_closed_max": o.discrepancy}, 1e-6,
        "dense three-point solve of -sigma phi'' + phi = 0 with phi' = j/sigma at both ends, "
        "against j sinh((x - lx/2)/sqrt(sigma)) / (sqrt(sigma) cosh(lx/(2 sqrt(sigma))))",
    ))
    cases.append(OracleCase(
        "1d-chi", {"j": 1.0, "sigma": 1.0, "lx": 4.0},
        {"form": "A sinh(k(x-c))/k^2 - A cosh(kc)(x-c)/k"}, 0.0,
        "twice-integrated 1D potential with zero flux and zero mean (odd about the midline)",
    ))
    for eps, sig in ((0.5, 1.0), (1.0, 10.0)):
        v = smallest_nongauge_j0(eps, sig, 64, 64)
        cases.append(OracleCase(
            f"j0-spectrum-eps{eps}-sigma{sig}",
            {"epsilon": eps, "sigma": sig, "nx": 64, "ny": 64, "lx": 1.0, "ly": 1.0},
            {"min_nongauge": v, "gauge": 0.0}, 0.02,
            "separable zero-current spectrum: rho-branch 2/eps^2 + mu, chi-branch 1/sigma + mu (mu != 0), "
            "gauge 0; mu = (2/hx^2)(1 - cos(m pi/nx)) + (2/hy^2)(1 - cos(l pi/ny))",
        ))
    for name, case in MANUFACTURED.items():
        cases.append(OracleCase(
            f"manufactured-{name}", {"case": name},
            {"self_check": case.self_check()}, 1e-6, case.note,
        ))
    return cases
