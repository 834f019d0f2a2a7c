import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from glc import operators as ops
from glc.errors import IncompatibleRHS
from glc.grid import build_grid
from glc.linalg import (
    DirectSolver, bordered_neumann, relative_residual, solve_general, solve_singular_neumann, solve_spd,
)


def random_spd(n, rng, cond=100.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q @ np.diag(np.geomspace(1.0, cond, n)) @ Q.T


def test_cg_matches_dense_solve(rng):
    A = random_spd(50, rng)
    b = rng.standard_normal(50)
    x, rep = solve_spd(sp.csr_matrix(A), b, tol=1e-12)
    assert rep.converged and rep.residual <= 1e-12
    assert np.allclose(x, np.linalg.solve(A, b), rtol=1e-9, atol=1e-10)


def test_cg_zero_rhs_and_warm_start(rng):
    A = sp.csr_matrix(random_spd(20, rng))
    x, rep = solve_spd(A, np.zeros(20))
    assert not np.any(x) and rep.iterations == 0
    b = rng.standard_normal(20)
    x1, _ = solve_spd(A, b, tol=1e-12)
    _, rep2 = solve_spd(A, b, tol=1e-12, x0=x1)
    assert rep2.iterations <= 1


def test_cg_reports_nonconvergence(rng):
    A = sp.csr_matrix(random_spd(40, rng, cond=1e6))
    x, rep = solve_spd(A, rng.standard_normal(40), tol=1e-14, max_iter=2)
    assert not rep.converged and np.all(np.isfinite(x))


def test_bicgstab_nonsymmetric(rng):
    n = 60
    A = sp.diags([np.full(n - 1, -1.3), np.full(n, 4.0), np.full(n - 1, -0.7)], [-1, 0, 1]).tocsr()
    b = rng.standard_normal(n)
    x, rep = solve_general(A, b, tol=1e-12)
    assert rep.converged and relative_residual(A, x, b) <= 1e-12
    assert np.allclose(x, np.linalg.solve(A.toarray(), b))


def test_direct_solver_multiple_rhs(rng):
    A = sp.csr_matrix(random_spd(30, rng) + np.triu(rng.standard_normal((30, 30)), 1) * 0.1)
    B = rng.standard_normal((30, 3))
    X, rep = DirectSolver(A).solve(B)
    assert rep.residual < 1e-12
    assert np.allclose(A @ X, B)


@pytest.fixture
def neumann():
    g = build_grid(16, 12, 1.0, 0.75)
    return g, ops.laplacian_neumann(g)


def test_singular_rejects_incompatible_rhs(neumann):
    g, L = neumann
    with pytest.raises(IncompatibleRHS):
        solve_singular_neumann(-L, np.ones(g.n))


def test_singular_zero_mean_and_weighted_constraint(neumann, rng):
    g, L = neumann
    b = rng.standard_normal(g.n)
    b -= b.mean()
    x, rep = solve_singular_neumann(-L, b, cell_area=g.cell_area, tol=1e-12)
    assert rep.converged
    assert abs(np.mean(x)) < 1e-14
    assert relative_residual(-L, x, b) < 1e-11
    w = 0.5 + rng.random(g.n)
    xw, _ = solve_singular_neumann(L, -b, weights=w, cell_area=g.cell_area, tol=1e-12)
    assert abs(np.sum(w * xw) * g.cell_area) < 1e-13
    # same solution up to a constant
    d = xw - x
    assert np.ptp(d) < 1e-9


@settings(max_examples=20, deadline=None)
@given(st.floats(-5.0, 5.0), st.integers(0, 2**31 - 1))
def test_singular_offset_and_shift_invariance(offset, seed):
    g = build_grid(8, 8, 1.0, 1.0)
    L = ops.laplacian_neumann(g)
    r = np.random.default_rng(seed).standard_normal(g.n)
    b = r - r.mean()
    x, _ = solve_singular_neumann(-L, b, offset=offset, cell_area=g.cell_area, tol=1e-13)
    assert np.sum(x) * g.cell_area + offset == pytest.approx(0.0, abs=1e-10)
    # adding a constant to the start vector does not change the answer
    x2, _ = solve_singular_neumann(-L, b, offset=offset, cell_area=g.cell_area, tol=1e-13,
                                   x0=np.full(g.n, 3.0))
    assert np.allclose(x, x2, atol=1e-9)


def test_bordered_system_is_nonsingular(neumann, rng):
    g, L = neumann
    w = 0.5 + rng.random(g.n)
    B = bordered_neumann(-L, w, g.cell_area)
    b = rng.standard_normal(g.n)
    b -= b.mean()
    z, _ = DirectSolver(B).solve(np.append(b, 0.0))
    assert abs(z[-1]) < 1e-10
    assert abs(np.sum(w * z[:-1]) * g.cell_area) < 1e-12
    xw, _ = solve_singular_neumann(-L, b, weights=w, cell_area=g.cell_area, tol=1e-13)
    assert np.allclose(z[:-1], xw, atol=1e-9)
