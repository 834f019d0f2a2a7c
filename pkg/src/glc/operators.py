"""Finite-volume operators on the cell-centered grid.

Gradients live on faces (staggered), divergences map face fluxes back to
cells, and every boundary face carries zero flux unless a boundary source
is added explicitly.  Matrices act on cell arrays flattened in C order,
i.e. cell ``(i, j)`` has index ``i * ny + j``.

The assembled Laplacian is built from the same floating-point expressions
as ``divergence(gradient(e_k))`` for unit vectors ``e_k``, so the matrix of
divergence-after-gradient and :func:`laplacian_neumann` agree bit for bit.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import GridMismatch


@dataclass(frozen=True)
class VectorField:
    """Face-normal components: ``x`` has shape (nx+1, ny), ``y`` (nx, ny+1)."""

    grid: object
    x: np.ndarray
    y: np.ndarray

    def __add__(self, other):
        if other.grid != self.grid:
            raise GridMismatch("vector fields live on different grids")
        return VectorField(self.grid, self.x + other.x, self.y + other.y)

    def __mul__(self, other):
        if isinstance(other, VectorField):
            return VectorField(self.grid, self.x * other.x, self.y * other.y)
        return VectorField(self.grid, self.x * other, self.y * other)

    __rmul__ = __mul__


def _values(grid, f):
    f = np.asarray(getattr(f, "values", f))
    if f.shape != grid.shape:
        if f.size != grid.n:
            raise GridMismatch(f"array of shape {f.shape} does not fit grid {grid.shape}")
        f = f.reshape(grid.shape)
    return f


def gradient(grid, f) -> VectorField:
    """Face differences of a cell field; boundary faces get zero."""
    f = _values(grid, f)
    gx = np.zeros((grid.nx + 1, grid.ny), dtype=f.dtype)
    gy = np.zeros((grid.nx, grid.ny + 1), dtype=f.dtype)
    gx[1:-1] = (f[1:] - f[:-1]) / grid.hx
    gy[:, 1:-1] = (f[:, 1:] - f[:, :-1]) / grid.hy
    return VectorField(grid, gx, gy)


def divergence(V: VectorField):
    g = V.grid
    return (V.x[1:] - V.x[:-1]) / g.hx + (V.y[:, 1:] - V.y[:, :-1]) / g.hy


def laplacian(grid, f):
    """Matrix-free Neumann Laplacian, ``divergence(gradient(f))``."""
    return divergence(gradient(grid, f))


def harmonic_faces(grid, a):
    """Harmonic mean of adjacent cell values on interior faces (zero on the boundary)."""
    a = _values(grid, a)
    wx = np.zeros((grid.nx + 1, grid.ny))
    wy = np.zeros((grid.nx, grid.ny + 1))
    wx[1:-1] = 2.0 * a[:-1] * a[1:] / (a[:-1] + a[1:])
    wy[:, 1:-1] = 2.0 * a[:, :-1] * a[:, 1:] / (a[:, :-1] + a[:, 1:])
    return VectorField(grid, wx, wy)


def div_weighted_grad(grid, w: VectorField, f):
    """``Div(w grad f)`` for face weights ``w``."""
    return divergence(w * gradient(grid, f))


def _assemble_div_grad(grid, wx, wy):
    """Five-point flux-form operator with face weights ``wx`` and ``wy``.

    Entries reproduce the arithmetic of ``divergence(w * gradient(e_k))``.
    """
    nx, ny = grid.shape
    tx, ty = 1.0 / grid.hx, 1.0 / grid.hy
    idx = np.arange(grid.n).reshape(nx, ny)

    # flux through the right/left (top/bottom) face of each cell for a unit
    # value in that cell, as gradient() followed by the weight would give
    right = np.zeros((nx, ny))
    left = np.zeros((nx, ny))
    top = np.zeros((nx, ny))
    bottom = np.zeros((nx, ny))
    right[:-1] = wx[1:-1] * -tx
    left[1:] = wx[1:-1] * tx
    top[:, :-1] = wy[:, 1:-1] * -ty
    bottom[:, 1:] = wy[:, 1:-1] * ty
    diag = (right - left) / grid.hx + (top - bottom) / grid.hy

    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [diag.ravel()]
    # neighbor (i+1, j) sees flux w*tx through its left face
    off_x = (wx[1:-1] * tx) / grid.hx
    off_y = (wy[:, 1:-1] * ty) / grid.hy
    rows += [idx[1:].ravel(), idx[:-1].ravel(), idx[:, 1:].ravel(), idx[:, :-1].ravel()]
    cols += [idx[:-1].ravel(), idx[1:].ravel(), idx[:, :-1].ravel(), idx[:, 1:].ravel()]
    vals += [off_x.ravel(), off_x.ravel(), off_y.ravel(), off_y.ravel()]
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.n, grid.n),
    ).tocsr()
    A.sort_indices()
    return A


def laplacian_neumann(grid):
    """Five-point Laplacian with zero-flux closure on every boundary face."""
    ones = VectorField(grid, np.ones((grid.nx + 1, grid.ny)), np.ones((grid.nx, grid.ny + 1)))
    return _assemble_div_grad(grid, ones.x, ones.y)


def weighted_div_grad(grid, a):
    """Matrix of ``Div(a grad .)`` with harmonic-mean face weights of ``a > 0``."""
    a = _values(grid, a)
    if np.any(a <= 0.0):
        raise ValueError("weight must be positive on every cell")
    w = harmonic_faces(grid, a)
    return _assemble_div_grad(grid, w.x, w.y)


def harmonic_expansion(grid, a, p):
    """Split ``H(a + p) - H(a)`` on faces into its linear and remainder parts.

    ``H`` is the face harmonic mean.  The linear part is the derivative of
    ``H`` at ``a`` applied to ``p``; the remainder is evaluated in a form
    free of cancellation so it stays accurate for tiny ``p``.
    """
    a = _values(grid, a)
    p = _values(grid, p)

    def pieces(aL, aR, pL, pR):
        S = aL + aR
        S1 = S + pL + pR
        cross = aR**2 * pL + aL**2 * pR
        lin = 2.0 * cross / S**2
        rem = 2.0 * pL * pR / S1 - 2.0 * cross * (pL + pR) / (S**2 * S1)
        return lin, rem

    lx = np.zeros((grid.nx + 1, grid.ny))
    rx = np.zeros_like(lx)
    ly = np.zeros((grid.nx, grid.ny + 1))
    ry = np.zeros_like(ly)
    lx[1:-1], rx[1:-1] = pieces(a[:-1], a[1:], p[:-1], p[1:])
    ly[:, 1:-1], ry[:, 1:-1] = pieces(a[:, :-1], a[:, 1:], p[:, :-1], p[:, 1:])
    return VectorField(grid, lx, ly), VectorField(grid, rx, ry)


def harmonic_derivative_coefficients(grid, a):
    """Coefficients ``(cL, cR)`` with ``dH_face = cL * p_left + cR * p_right``."""
    a = _values(grid, a)

    def coeffs(aL, aR):
        S2 = (aL + aR) ** 2
        return 2.0 * aR**2 / S2, 2.0 * aL**2 / S2

    cLx = np.zeros((grid.nx + 1, grid.ny))
    cRx = np.zeros_like(cLx)
    cLy = np.zeros((grid.nx, grid.ny + 1))
    cRy = np.zeros_like(cLy)
    cLx[1:-1], cRx[1:-1] = coeffs(a[:-1], a[1:])
    cLy[:, 1:-1], cRy[:, 1:-1] = coeffs(a[:, :-1], a[:, 1:])
    return VectorField(grid, cLx, cLy), VectorField(grid, cRx, cRy)


def gradient_matrices(grid):
    """Sparse ``(Gx, Gy)`` mapping cells to full face arrays (boundary rows empty)."""
    nx, ny = grid.shape
    idx = np.arange(grid.n).reshape(nx, ny)
    fx = np.arange((nx + 1) * ny).reshape(nx + 1, ny)
    fy = np.arange(nx * (ny + 1)).reshape(nx, ny + 1)
    rows = np.concatenate([fx[1:-1].ravel(), fx[1:-1].ravel()])
    cols = np.concatenate([idx[1:].ravel(), idx[:-1].ravel()])
    vals = np.concatenate([np.full((nx - 1) * ny, 1.0 / grid.hx), np.full((nx - 1) * ny, -1.0 / grid.hx)])
    Gx = sp.csr_matrix((vals, (rows, cols)), shape=((nx + 1) * ny, grid.n))
    rows = np.concatenate([fy[:, 1:-1].ravel(), fy[:, 1:-1].ravel()])
    cols = np.concatenate([idx[:, 1:].ravel(), idx[:, :-1].ravel()])
    vals = np.concatenate([np.full(nx * (ny - 1), 1.0 / grid.hy), np.full(nx * (ny - 1), -1.0 / grid.hy)])
    Gy = sp.csr_matrix((vals, (rows, cols)), shape=(nx * (ny + 1), grid.n))
    return Gx, Gy


def divergence_matrices(grid):
    """Sparse ``(Dx, Dy)`` mapping full face arrays to cells."""
    nx, ny = grid.shape
    idx = np.arange(grid.n).reshape(nx, ny)
    fx = np.arange((nx + 1) * ny).reshape(nx + 1, ny)
    fy = np.arange(nx * (ny + 1)).reshape(nx, ny + 1)
    rows = np.concatenate([idx.ravel(), idx.ravel()])
    Dx = sp.csr_matrix(
        (np.concatenate([np.full(grid.n, 1.0 / grid.hx), np.full(grid.n, -1.0 / grid.hx)]),
         (rows, np.concatenate([fx[1:].ravel(), fx[:-1].ravel()]))),
        shape=(grid.n, (nx + 1) * ny),
    )
    Dy = sp.csr_matrix(
        (np.concatenate([np.full(grid.n, 1.0 / grid.hy), np.full(grid.n, -1.0 / grid.hy)]),
         (rows, np.concatenate([fy[:, 1:].ravel(), fy[:, :-1].ravel()]))),
        shape=(grid.n, nx * (ny + 1)),
    )
    return Dx, Dy


def face_average_matrices(grid):
    """Sparse ``(Ax, Ay)``: cell value = mean of its two x (resp. y) faces."""
    nx, ny = grid.shape
    idx = np.arange(grid.n).reshape(nx, ny)
    fx = np.arange((nx + 1) * ny).reshape(nx + 1, ny)
    fy = np.arange(nx * (ny + 1)).reshape(nx, ny + 1)
    rows = np.concatenate([idx.ravel(), idx.ravel()])
    half = np.full(2 * grid.n, 0.5)
    Ax = sp.csr_matrix((half, (rows, np.concatenate([fx[1:].ravel(), fx[:-1].ravel()]))),
                       shape=(grid.n, (nx + 1) * ny))
    Ay = sp.csr_matrix((half, (rows, np.concatenate([fy[:, 1:].ravel(), fy[:, :-1].ravel()]))),
                       shape=(grid.n, nx * (ny + 1)))
    return Ax, Ay


def face_to_cell(V: VectorField):
    """Arithmetic mean of the two x-faces plus that of the two y-faces."""
    return 0.5 * (V.x[1:] + V.x[:-1]) + 0.5 * (V.y[:, 1:] + V.y[:, :-1])


def grad_dot(grid, a, b):
    """Cell value of ``grad a . grad b`` from face products."""
    ga, gb = gradient(grid, a), gradient(grid, b)
    return face_to_cell(ga * gb)


def grad_sq(grid, a):
    """Cell value of ``|grad a|^2``: mean of the squared face gradients per axis."""
    return grad_dot(grid, a, a)


def grad_dot_matrix(grid, a):
    """Sparse matrix of ``b -> grad_dot(a, b)``."""
    ga = gradient(grid, a)
    Gx, Gy = gradient_matrices(grid)
    Ax, Ay = face_average_matrices(grid)
    return (Ax @ sp.diags(ga.x.ravel()) @ Gx + Ay @ sp.diags(ga.y.ravel()) @ Gy).tocsr()


def face_linear_flux_matrix(grid, cL: VectorField, cR: VectorField, g: VectorField):
    """Sparse matrix of ``eta -> Div(c(eta) g)`` with ``c_face = cL eta_left + cR eta_right``."""
    nx, ny = grid.shape
    idx = np.arange(grid.n).reshape(nx, ny)
    fx = np.arange((nx + 1) * ny).reshape(nx + 1, ny)
    fy = np.arange(nx * (ny + 1)).reshape(nx, ny + 1)
    Cx = sp.csr_matrix(
        (np.concatenate([(cL.x * g.x)[1:-1].ravel(), (cR.x * g.x)[1:-1].ravel()]),
         (np.concatenate([fx[1:-1].ravel(), fx[1:-1].ravel()]),
          np.concatenate([idx[:-1].ravel(), idx[1:].ravel()]))),
        shape=((nx + 1) * ny, grid.n),
    )
    Cy = sp.csr_matrix(
        (np.concatenate([(cL.y * g.y)[:, 1:-1].ravel(), (cR.y * g.y)[:, 1:-1].ravel()]),
         (np.concatenate([fy[:, 1:-1].ravel(), fy[:, 1:-1].ravel()]),
          np.concatenate([idx[:, :-1].ravel(), idx[:, 1:].ravel()]))),
        shape=(nx * (ny + 1), grid.n),
    )
    Dx, Dy = divergence_matrices(grid)
    return (Dx @ Cx + Dy @ Cy).tocsr()


def boundary_flux_source(grid, profile, sigma):
    """Cell source ``s`` carrying the Neumann datum ``-sigma dphi/dnu = J``.

    ``L`` has zero boundary flux, so the Laplacian of a potential with this
    datum is ``L phi - s``: ``s = J * face_length / (sigma * cell_area)`` in
    the cell adjacent to each contact face.
    """
    src = np.zeros(grid.shape)
    scale = 1.0 / (sigma * grid.cell_area)
    for face, J in zip(grid.boundary_faces, profile.values):
        if J != 0.0:
            src[face.cell] += J * face.length * scale
    return src


def supercurrent(grid, u) -> VectorField:
    """Face values of ``Im(conj(u) grad u)`` with ``conj(u)`` averaged to the face."""
    u = _values(grid, u)
    g = gradient(grid, u)
    jx = np.zeros((grid.nx + 1, grid.ny))
    jy = np.zeros((grid.nx, grid.ny + 1))
    jx[1:-1] = np.imag(0.5 * np.conj(u[1:] + u[:-1]) * g.x[1:-1])
    jy[:, 1:-1] = np.imag(0.5 * np.conj(u[:, 1:] + u[:, :-1]) * g.y[:, 1:-1])
    return VectorField(grid, jx, jy)


def supercurrent_divergence(grid, u):
    """``div Im(conj(u) grad u)`` with zero normal flux on the boundary."""
    return divergence(supercurrent(grid, u))


def write_triplets(path, A):
    """Write ``row col value`` lines sorted row-major."""
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    with open(path, "w") as fh:
        for k in order:
            fh.write(f"{C.row[k]} {C.col[k]} {float(C.data[k])!r}\n")


def read_triplets(path, n):
    with open(path) as fh:
        text = fh.read()
    if not text.strip():
        return sp.csr_matrix((n, n))
    data = np.loadtxt(io.StringIO(text), ndmin=2)
    if data.size == 0:
        return sp.csr_matrix((n, n))
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(n, n))
