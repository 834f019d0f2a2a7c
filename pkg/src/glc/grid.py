"""Rectangular cell-centered grids, cell fields and boundary current profiles.

Cell arrays have shape ``(nx, ny)`` and are indexed ``[i, j]`` with ``i``
along x.  Boundary faces are enumerated edge by edge in the fixed order
left, right, bottom, top; within an edge they run in increasing coordinate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import GridError, GridMismatch, ProfileError

EDGES = ("left", "right", "bottom", "top")

# relative slack when testing whether a face center lies inside a segment
_COORD_TOL = 1e-12


@dataclass(frozen=True)
class ContactSegment:
    """Part of one edge through which current enters or leaves.

    ``weight`` is the signed density multiplier used by
    :func:`build_current_profile`; positive means inflow.
    """

    edge: str
    start: float
    end: float
    weight: float = 1.0


@dataclass(frozen=True)
class BoundaryFace:
    edge: str
    index: int
    s: float
    length: float
    cell: tuple
    contact: bool
    segment: Union[int, None] = None


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    lx: float
    ly: float
    contacts: tuple = ()
    boundary_faces: tuple = field(default=(), repr=False, compare=False)

    @property
    def hx(self):
        return self.lx / self.nx

    @property
    def hy(self):
        return self.ly / self.ny

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def n(self):
        return self.nx * self.ny

    @property
    def cell_area(self):
        return self.hx * self.hy

    @property
    def area(self):
        return self.lx * self.ly

    @property
    def x(self):
        return (np.arange(self.nx) + 0.5) * self.hx

    @property
    def y(self):
        return (np.arange(self.ny) + 0.5) * self.hy

    def mesh(self):
        """Cell-center coordinates as two ``(nx, ny)`` arrays."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    def edge_length(self, edge):
        return self.ly if edge in ("left", "right") else self.lx

    def edge_faces(self, edge):
        return [f for f in self.boundary_faces if f.edge == edge]

    @property
    def contact_faces(self):
        return [f for f in self.boundary_faces if f.contact]

    @property
    def insulated_faces(self):
        return [f for f in self.boundary_faces if not f.contact]

    def integrate(self, values):
        return float(np.sum(values) * self.cell_area)

    def mean(self, values):
        return float(np.mean(values))

    def same_as(self, other):
        return self == other


def _edge_cells(nx, ny, edge):
    if edge == "left":
        return [(0, j) for j in range(ny)]
    if edge == "right":
        return [(nx - 1, j) for j in range(ny)]
    if edge == "bottom":
        return [(i, 0) for i in range(nx)]
    return [(i, ny - 1) for i in range(nx)]


def build_grid(nx, ny, lx=1.0, ly=1.0, contact_spec: Sequence = ()):
    """Build a grid and tag its boundary faces.

    ``contact_spec`` is a sequence of :class:`ContactSegment` (or tuples
    ``(edge, start, end[, weight])``).  A boundary face is a contact face
    when its center lies in a segment; all other faces are insulated.
    """
    nx, ny = int(nx), int(ny)
    if nx < 4 or ny < 4:
        raise GridError(f"need nx, ny >= 4, got {nx}x{ny}")
    if not (lx > 0 and ly > 0 and np.isfinite(lx) and np.isfinite(ly)):
        raise GridError(f"side lengths must be positive, got {lx}, {ly}")

    segments = []
    for item in contact_spec:
        seg = item if isinstance(item, ContactSegment) else ContactSegment(*item)
        if seg.edge not in EDGES:
            raise GridError(f"unknown edge {seg.edge!r}")
        length = ly if seg.edge in ("left", "right") else lx
        slack = _COORD_TOL * length
        if not (-slack <= seg.start < seg.end <= length + slack):
            raise GridError(
                f"contact interval [{seg.start}, {seg.end}] out of range on "
                f"{seg.edge} edge of length {length}"
            )
        segments.append(seg)

    for a in range(len(segments)):
        for b in range(a + 1, len(segments)):
            sa, sb = segments[a], segments[b]
            if sa.edge == sb.edge and min(sa.end, sb.end) > max(sa.start, sb.start):
                raise GridError(
                    f"contact intervals overlap on {sa.edge} edge: "
                    f"[{sa.start}, {sa.end}] and [{sb.start}, {sb.end}]"
                )

    hx, hy = lx / nx, ly / ny
    faces = []
    for edge in EDGES:
        h = hy if edge in ("left", "right") else hx
        length = ly if edge in ("left", "right") else lx
        for k, cell in enumerate(_edge_cells(nx, ny, edge)):
            s = (k + 0.5) * h
            owner = None
            for m, seg in enumerate(segments):
                slack = _COORD_TOL * length
                if seg.edge == edge and seg.start - slack <= s <= seg.end + slack:
                    owner = m
                    break
            faces.append(BoundaryFace(edge, k, s, h, cell, owner is not None, owner))

    for m, seg in enumerate(segments):
        if not any(f.segment == m for f in faces):
            raise GridError(f"contact segment {seg} covers no boundary face center")

    return Grid(nx, ny, float(lx), float(ly), tuple(segments), tuple(faces))


@dataclass(frozen=True)
class CurrentProfile:
    """Normal current density ``J`` on the boundary faces, inflow positive.

    ``values`` is aligned with ``grid.boundary_faces``.  ``norm_J`` is the
    discrete stand-in for the H^{3/2} boundary norm: the L2 norm of J plus
    the L2 norm of its along-edge first difference quotient.
    """

    grid: Grid
    values: np.ndarray
    norm_J: float

    def on_edge(self, edge):
        return np.array(
            [v for f, v in zip(self.grid.boundary_faces, self.values) if f.edge == edge]
        )

    @property
    def net_flux(self):
        lengths = np.array([f.length for f in self.grid.boundary_faces])
        return float(np.sum(self.values * lengths))

    def scaled(self, factor):
        return CurrentProfile(self.grid, self.values * factor, abs(factor) * self.norm_J)


def _shape_density(shape, face, seg):
    if callable(shape):
        return float(shape(face))
    if face.segment is None:
        return 0.0
    if shape == "uniform":
        return seg.weight
    if shape == "smooth":
        t = (face.s - seg.start) / (seg.end - seg.start)
        return seg.weight * np.sin(np.pi * t) ** 2
    raise ProfileError(f"unknown profile shape {shape!r}")


def boundary_norm(grid, values):
    """L2 norm of J plus L2 norm of its along-edge difference quotient."""
    lengths = np.array([f.length for f in grid.boundary_faces])
    l2 = np.sqrt(np.sum(values**2 * lengths))
    diff_sq = 0.0
    for edge in EDGES:
        idx = [k for k, f in enumerate(grid.boundary_faces) if f.edge == edge]
        h = grid.boundary_faces[idx[0]].length
        d = np.diff(values[idx]) / h
        diff_sq += np.sum(d**2) * h
    return float(l2 + np.sqrt(diff_sq))


def build_current_profile(grid, amplitude, shape: Union[str, Callable] = "uniform"):
    """Current density ``amplitude * shape`` balanced to zero net flux.

    ``shape`` is ``"uniform"``, ``"smooth"`` (a sin^2 bump across each
    segment) or a callable ``face -> density``.  When inflow and outflow
    fluxes differ, the outflow part is rescaled to match the inflow.
    """
    faces = grid.boundary_faces
    density = np.array(
        [
            _shape_density(shape, f, grid.contacts[f.segment] if f.segment is not None else None)
            for f in faces
        ]
    )
    insulated = np.array([not f.contact for f in faces])
    if np.any(density[insulated] != 0.0):
        raise ProfileError("current shape is nonzero on insulated faces")

    J = float(amplitude) * density
    if not np.all(np.isfinite(J)):
        raise ProfileError("current density is not finite")
    if np.all(J == 0.0):
        if amplitude != 0 and not grid.contact_faces:
            raise ProfileError("nonzero current requested but the grid has no contact faces")
        return CurrentProfile(grid, np.zeros(len(faces)), 0.0)

    lengths = np.array([f.length for f in faces])
    inflow = float(np.sum(np.where(J > 0, J, 0.0) * lengths))
    outflow = float(np.sum(np.where(J < 0, -J, 0.0) * lengths))
    if inflow == 0.0 or outflow == 0.0:
        raise ProfileError("net flux cannot be zeroed: current shape has a single sign")
    if abs(inflow - outflow) > 1e-14 * (inflow + outflow):
        J = np.where(J < 0, J * (inflow / outflow), J)
    J.flags.writeable = False
    return CurrentProfile(grid, J, boundary_norm(grid, J))


def unit_profile(grid, shape="uniform"):
    """Profile of the given shape rescaled to ``norm_J == 1``."""
    raw = build_current_profile(grid, 1.0, shape)
    if raw.norm_J == 0.0:
        raise ProfileError("shape has zero norm")
    return raw.scaled(1.0 / raw.norm_J)


@dataclass(frozen=True)
class ModelParams:
    epsilon: float
    sigma: float
    norm_J: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.norm_J < 0.0:
            raise ValueError("norm_J must be nonnegative")

    @property
    def delta(self):
        return self.epsilon * self.norm_J


class Field:
    """Immutable cell field (real or complex) bound to a grid."""

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        values = np.array(values, copy=True)
        if values.shape != grid.shape:
            values = values.reshape(grid.shape)
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("Field is immutable")

    @property
    def is_complex(self):
        return np.iscomplexobj(self.values)

    def _other(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise GridMismatch("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return Field(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)

    def scale(self, factor):
        return Field(self.grid, factor * self.values)

    def __repr__(self):
        kind = "complex" if self.is_complex else "real"
        return f"Field({kind}, {self.grid.nx}x{self.grid.ny})"


def join(rho: Field, chi: Field) -> Field:
    """``rho * exp(i chi)``."""
    if rho.grid != chi.grid:
        raise GridMismatch("fields live on different grids")
    return Field(rho.grid, rho.values * np.exp(1j * chi.values))


def split(u: Field):
    """Modulus and phase of ``u``; the phase lies in (-pi, pi]."""
    chi = np.angle(u.values)
    chi = np.where(chi == -np.pi, np.pi, chi)
    return Field(u.grid, np.abs(u.values)), Field(u.grid, chi)


def write_field_csv(path, fld: Field):
    """One row per cell, ``i`` outer and ``j`` inner."""
    X, Y = fld.grid.mesh()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if fld.is_complex:
            w.writerow(["x", "y", "re", "im"])
            for x, y, v in zip(X.ravel(), Y.ravel(), fld.values.ravel()):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(v.real)), repr(float(v.imag))])
        else:
            w.writerow(["x", "y", "value"])
            for x, y, v in zip(X.ravel(), Y.ravel(), fld.values.ravel()):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(v))])


def read_field_csv(path, grid) -> Field:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if len(body) != grid.n:
        raise GridMismatch(f"CSV has {len(body)} rows, grid has {grid.n} cells")
    data = np.array(body, dtype=float)
    if header[-1] == "im":
        vals = data[:, 2] + 1j * data[:, 3]
    else:
        vals = data[:, 2]
    return Field(grid, vals.reshape(grid.shape))


def write_field_binary(path, fld: Field):
    """Row-major little-endian float64; complex values as (re, im) pairs."""
    vals = np.ascontiguousarray(fld.values)
    if fld.is_complex:
        out = np.empty(vals.shape + (2,), dtype="<f8")
        out[..., 0] = vals.real
        out[..., 1] = vals.imag
    else:
        out = vals.astype("<f8")
    out.tofile(path)


def read_field_binary(path, grid, complex_values=False) -> Field:
    raw = np.fromfile(path, dtype="<f8")
    if complex_values:
        raw = raw.reshape(grid.shape + (2,))
        return Field(grid, raw[..., 0] + 1j * raw[..., 1])
    return Field(grid, raw.reshape(grid.shape))
