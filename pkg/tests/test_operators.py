import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from glc import operators as ops
from glc.diagnostics import manufactured_convergence
from glc.grid import build_grid
from glc.oracles import MANUFACTURED


def columns_bitwise_equal(grid, A, apply):
    A = A.tocsc()
    for k in range(grid.n):
        e = np.zeros(grid.n)
        e[k] = 1.0
        col = A[:, k].toarray().ravel()
        if not np.array_equal(col, apply(e).ravel()):
            return False
    return True


@pytest.mark.parametrize("shape", [(4, 4), (5, 4), (7, 6)])
def test_assembled_laplacian_matches_div_grad_bitwise(shape):
    g = build_grid(*shape, 1.3, 0.7)
    L = ops.laplacian_neumann(g)
    assert columns_bitwise_equal(g, L, lambda e: ops.divergence(ops.gradient(g, e)))


def test_weighted_operator_matches_flux_form_bitwise(rng):
    g = build_grid(6, 5, 1.0, 1.0)
    a = 0.5 + rng.random(g.shape)
    W = ops.weighted_div_grad(g, a)
    w = ops.harmonic_faces(g, a)
    assert columns_bitwise_equal(g, W, lambda e: ops.div_weighted_grad(g, w, e))


def test_four_by_four_laplacian_by_hand():
    g = build_grid(4, 4, 4.0, 4.0)
    L = ops.laplacian_neumann(g).toarray()
    # h = 1: corner cells have two neighbours, edge cells three, interior four
    diag = np.array([[2, 3, 3, 2], [3, 4, 4, 3], [3, 4, 4, 3], [2, 3, 3, 2]], dtype=float)
    assert np.array_equal(-np.diag(L).reshape(4, 4), diag)
    row = np.zeros(16)
    row[[1, 4]] = 1.0
    row[0] = -2.0
    assert np.array_equal(L[0], row)
    assert np.array_equal(L, L.T)


def test_laplacian_symmetric_and_kills_constants():
    g = build_grid(9, 7, 1.0, 2.0)
    L = ops.laplacian_neumann(g)
    assert abs(L - L.T).max() == 0.0
    assert np.max(np.abs(L @ np.ones(g.n))) < 1e-12
    ev = np.linalg.eigvalsh(L.toarray())
    assert ev.max() < 1e-10


@settings(max_examples=25, deadline=None)
@given(arrays(float, (6, 5), elements=st.floats(-10, 10)))
def test_divergence_of_gradient_sums_to_zero(f):
    # zero-flux closure: the discrete divergence theorem holds exactly up to rounding
    g = build_grid(6, 5, 1.0, 1.0)
    total = np.sum(ops.laplacian(g, f)) * g.cell_area
    assert abs(total) <= 1e-10 * (1 + np.max(np.abs(f))) * g.n / g.hx**2


def test_matrix_pieces_compose_to_laplacian():
    g = build_grid(5, 4, 1.0, 1.0)
    Gx, Gy = ops.gradient_matrices(g)
    Dx, Dy = ops.divergence_matrices(g)
    assert abs((Dx @ Gx + Dy @ Gy) - ops.laplacian_neumann(g)).max() < 1e-10


def test_harmonic_expansion_identity(rng):
    g = build_grid(6, 6, 1.0, 1.0)
    a = 0.5 + rng.random(g.shape)
    p = 0.1 * rng.standard_normal(g.shape)
    lin, rem = ops.harmonic_expansion(g, a, p)
    H0, H1 = ops.harmonic_faces(g, a), ops.harmonic_faces(g, a + p)
    assert np.allclose(lin.x + rem.x, H1.x - H0.x, atol=1e-14)
    assert np.allclose(lin.y + rem.y, H1.y - H0.y, atol=1e-14)
    # the remainder is quadratic in p
    _, rem_small = ops.harmonic_expansion(g, a, 1e-3 * p)
    ratio = np.max(np.abs(rem_small.x)) / np.max(np.abs(rem.x))
    assert ratio == pytest.approx(1e-6, rel=0.05)
    cL, cR = ops.harmonic_derivative_coefficients(g, a)
    assert np.allclose(cL.x[1:-1] * p[:-1] + cR.x[1:-1] * p[1:], lin.x[1:-1], atol=1e-15)


def test_grad_dot_matrix_agrees_with_matrix_free(rng):
    g = build_grid(7, 5, 1.0, 1.0)
    a, b = rng.standard_normal((2, *g.shape))
    M = ops.grad_dot_matrix(g, a)
    assert np.allclose(M @ b.ravel(), ops.grad_dot(g, a, b).ravel(), atol=1e-12)
    assert np.allclose(ops.grad_sq(g, a), ops.grad_dot(g, a, a))


def test_supercurrent_of_plane_wave():
    g = build_grid(32, 8, 1.0, 1.0)
    x, _ = g.mesh()
    k = 2.0
    u = np.exp(1j * k * x)
    j = ops.supercurrent(g, u)
    # Im(conj(u) u_x) = k up to the face average factor cos(k h / 2) and the chord
    expected = np.sin(k * g.hx) / g.hx
    assert np.allclose(j.x[1:-1], expected, rtol=1e-12)
    assert np.all(j.x[[0, -1]] == 0.0)
    assert np.max(np.abs(ops.supercurrent_divergence(g, u)[1:-1])) < 1e-10


def test_boundary_source_integrates_to_net_flux():
    from glc.grid import build_current_profile
    g = build_grid(8, 8, 1.0, 1.0, [("left", 0.0, 1.0, 1.0), ("right", 0.0, 1.0, -1.0)])
    p = build_current_profile(g, 1.5)
    s = ops.boundary_flux_source(g, p, 2.0)
    assert np.sum(s) * g.cell_area == pytest.approx(0.0, abs=1e-14)
    assert s[0, 3] == pytest.approx(1.5 * g.hy / (2.0 * g.cell_area))


@pytest.mark.parametrize("name", sorted(MANUFACTURED))
def test_manufactured_forcings_are_consistent(name):
    assert MANUFACTURED[name].self_check() < 1e-7


@pytest.mark.parametrize("name", sorted(MANUFACTURED))
def test_manufactured_second_order(name):
    study = manufactured_convergence(MANUFACTURED[name], sizes=(16, 32, 64, 128))
    assert all(abs(p - 2.0) < 0.1 for p in study.orders), study


def test_triplets_roundtrip(tmp_path, rng):
    g = build_grid(4, 5, 1.0, 1.0)
    A = ops.weighted_div_grad(g, 1 + rng.random(g.shape))
    ops.write_triplets(tmp_path / "A.txt", A)
    B = ops.read_triplets(tmp_path / "A.txt", g.n)
    assert abs(A - B).max() == 0.0
    ops.write_triplets(tmp_path / "Z.txt", sp.csr_matrix((g.n, g.n)))
    assert ops.read_triplets(tmp_path / "Z.txt", g.n).nnz == 0


def test_weighted_operator_rejects_nonpositive_weight():
    g = build_grid(4, 4, 1.0, 1.0)
    with pytest.raises(ValueError):
        ops.weighted_div_grad(g, np.zeros(g.shape))
