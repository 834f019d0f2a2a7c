"""Time-dependent evolution

    u_t + i phi u = Lap u + eps^-2 u (1 - |u|^2),
    sigma Lap phi = div Im(conj(u) grad u),   -sigma dphi/dnu = J,
    du/dnu = 0,   sum(|u|^2 phi) = 0,

by a first-order semi-implicit scheme: implicit diffusion, explicit
reaction and potential.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import operators as ops
from .errors import BlowUp, GLError
from .linalg import solve_singular_neumann, solve_spd

DT_GUARD = 0.1
POTENTIAL_TOL = 1e-12
DIFFUSION_TOL = 1e-13


class DegenerateNormalization(GLError, ValueError):
    """|u|^2 is too small for the potential normalization to fix a constant."""


@dataclass(frozen=True)
class EvolutionState:
    grid: object
    u: np.ndarray
    phi: np.ndarray
    t: float = 0.0
    step_count: int = 0


def potential_solve(grid, u, profile, sigma, tol=POTENTIAL_TOL, x0=None):
    """Potential for the order parameter ``u`` with ``sum(|u|^2 phi) = 0``."""
    u = ops._values(grid, u)
    w = np.abs(u) ** 2
    if np.sum(w) * grid.cell_area < 1e-12 * grid.area:
        raise DegenerateNormalization("|u|^2 integrates to (almost) zero")
    src = np.zeros(grid.shape) if profile is None else ops.boundary_flux_source(grid, profile, sigma)
    rhs = -sigma * src - ops.supercurrent_divergence(grid, u)
    A = -sigma * ops.laplacian_neumann(grid)
    phi, _ = solve_singular_neumann(A, rhs.ravel(), weights=w, cell_area=grid.cell_area,
                                    tol=tol, x0=None if x0 is None else np.ravel(x0))
    return phi.reshape(grid.shape)


def gauge_violation(grid, u, phi):
    """``|sum(|u|^2 phi)| / (||phi||_2 |Omega|)`` (zero when phi vanishes)."""
    integral = abs(np.sum(np.abs(u) ** 2 * phi)) * grid.cell_area
    scale = np.sqrt(np.sum(phi**2) * grid.cell_area) * grid.area
    return float(integral / scale) if scale > 0 else float(integral)


def initial_state(grid, u0, profile, params):
    u0 = np.asarray(getattr(u0, "values", u0), dtype=complex).reshape(grid.shape)
    return EvolutionState(grid, u0, potential_solve(grid, u0, profile, params.sigma))


class _Stepper:
    """Holds the diffusion matrix for a fixed ``dt``."""

    def __init__(self, grid, dt):
        self.dt = dt
        self.A = (sp.identity(grid.n, format="csr") - dt * ops.laplacian_neumann(grid)).tocsr()

    def __call__(self, state, profile, params):
        g = state.grid
        dt = self.dt
        u, phi = state.u, state.phi
        with np.errstate(over="ignore", invalid="ignore"):
            rhs = u + dt * (-1j * phi * u + u * (1.0 - np.abs(u) ** 2) / params.epsilon**2)
        if not np.all(np.isfinite(rhs)):
            raise BlowUp(f"non-finite order parameter at t = {state.t + dt:.6g}", state)
        re, rep_re = solve_spd(self.A, rhs.real.ravel(), tol=DIFFUSION_TOL, x0=u.real.ravel())
        im, rep_im = solve_spd(self.A, rhs.imag.ravel(), tol=DIFFUSION_TOL, x0=u.imag.ravel())
        u_new = (re + 1j * im).reshape(g.shape)
        # a non-finite residual means the norms overflowed
        if not (np.all(np.isfinite(u_new)) and np.isfinite(rep_re.residual) and np.isfinite(rep_im.residual)):
            raise BlowUp(f"non-finite order parameter at t = {state.t + dt:.6g}", state)
        phi_new = potential_solve(g, u_new, profile, params.sigma, x0=phi)
        return EvolutionState(g, u_new, phi_new, state.t + dt, state.step_count + 1)


def step(state, dt, profile, params):
    """One step: ``(I - dt L) u+ = u + dt(-i phi u + eps^-2 u (1 - |u|^2))``.

    ``phi`` of the returned state is recomputed from the new ``u``, so the
    normalization holds after every step.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    return _Stepper(state.grid, dt)(state, profile, params)


def phase_distance(grid, u, u_ref):
    """``min_theta ||u - exp(i theta) u_ref||_2`` and the minimizing ``theta``."""
    theta = float(np.angle(np.vdot(u_ref, u)))
    d = np.sqrt(np.sum(np.abs(u - np.exp(1j * theta) * u_ref) ** 2) * grid.cell_area)
    return float(d), theta


def energy(grid, u, epsilon):
    """``||grad u||^2 + (2 eps^2)^-1 ||1 - |u|^2||^2``."""
    g = ops.gradient(grid, u)
    grad2 = (np.sum(np.abs(g.x) ** 2) + np.sum(np.abs(g.y) ** 2)) * grid.cell_area
    pot = np.sum((1.0 - np.abs(u) ** 2) ** 2) * grid.cell_area / (2.0 * epsilon**2)
    return float(grad2 + pot)


@dataclass
class Trajectory:
    times: np.ndarray
    distance: np.ndarray = None
    phase_distance: np.ndarray = None
    phase: np.ndarray = None
    energy: np.ndarray = None
    max_abs: np.ndarray = None
    max_gauge_violation: float = 0.0
    final: EvolutionState = field(default=None, repr=False)
    snapshots: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")

    def rows(self):
        cols = [self.times, self.distance, self.phase_distance, self.energy, self.max_abs]
        return [tuple(float(c[k]) if c is not None else np.nan for c in cols) for k in range(len(self.times))]

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t,distance,phase_distance,energy,max_abs\n")
            for row in self.rows():
                fh.write(",".join(repr(v) for v in row) + "\n")


def evolve(u0, T, dt, profile, params, sample_every=1, u_ref=None, grid=None,
           dt_guard=DT_GUARD, snapshot_every=None):
    """Integrate to time ``T`` and sample observables every ``sample_every`` steps.

    Distances are measured against ``u_ref`` when given.  On blow-up the
    :class:`BlowUp` exception carries the partial trajectory.
    """
    if isinstance(u0, EvolutionState):
        state = u0
    else:
        grid = grid or getattr(u0, "grid", None)
        state = initial_state(grid, u0, profile, params)
    g = state.grid
    if not T > 0:
        raise ValueError("T must be positive")
    if dt > dt_guard * params.epsilon**2:
        raise ValueError(f"dt = {dt} exceeds the stability guard {dt_guard} * eps^2")
    nsteps = int(round(T / dt))
    stepper = _Stepper(g, dt)
    ref = None if u_ref is None else np.asarray(getattr(u_ref, "values", u_ref)).reshape(g.shape)

    samples = {k: [] for k in ("t", "d", "pd", "th", "e", "m")}
    worst = gauge_violation(g, state.u, state.phi)

    def record(s):
        samples["t"].append(s.t)
        if ref is not None:
            samples["d"].append(float(np.sqrt(np.sum(np.abs(s.u - ref) ** 2) * g.cell_area)))
            pd, th = phase_distance(g, s.u, ref)
            samples["pd"].append(pd)
            samples["th"].append(th)
        samples["e"].append(energy(g, s.u, params.epsilon))
        samples["m"].append(float(np.max(np.abs(s.u))))

    def build(final):
        arr = lambda k: np.array(samples[k]) if samples[k] else None  # noqa: E731
        return Trajectory(arr("t"), arr("d"), arr("pd"), arr("th"), arr("e"), arr("m"), worst, final, snaps)

    snaps = []
    record(state)
    for k in range(1, nsteps + 1):
        try:
            state = stepper(state, profile, params)
        except BlowUp as exc:
            exc.trajectory = build(exc.last_state)
            raise
        worst = max(worst, gauge_violation(g, state.u, state.phi))
        if k % sample_every == 0 or k == nsteps:
            record(state)
        if snapshot_every and k % snapshot_every == 0:
            snaps.append(state)
    return build(state)


def decay_rate(trajectory, window=None, min_samples=5):
    """Minus the least-squares slope of ``log(phase distance)`` versus ``t``.

    ``window = (t0, t1)`` restricts the fit; the distances inside it must be
    positive and strictly decreasing.
    """
    t = np.asarray(trajectory.times, dtype=float)
    d = np.asarray(trajectory.phase_distance, dtype=float)
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, d = t[keep], d[keep]
    if t.size < min_samples:
        raise ValueError(f"need at least {min_samples} samples in the fit window, got {t.size}")
    if np.any(d <= 0) or np.any(np.diff(d) >= 0):
        raise ValueError("distance is not positive and decreasing inside the fit window")
    slope, _ = np.polyfit(t, np.log(d), 1)
    return float(-slope)


def steady_order_parameter(steady):
    """``rho_s exp(i chi_s)`` of a steady solution."""
    return steady.rho_s * np.exp(1j * steady.chi_s)
