import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from glc import diagnostics as diag
from glc.grid import build_grid

from conftest import square


def test_norms_of_zero_and_constant():
    g = build_grid(8, 6, 2.0, 1.5)
    z = diag.norms(g, np.zeros(g.shape))
    assert all(v == 0.0 for v in z.as_dict().values())
    c = diag.norms(g, np.full(g.shape, 3.0))
    area = 3.0
    assert c.l2 == pytest.approx(3.0 * np.sqrt(area))
    assert c.l4 == pytest.approx(3.0 * area**0.25)
    assert c.linf == 3.0
    assert c.w12 == pytest.approx(c.l2) and c.w22 == pytest.approx(c.l2)


def test_norms_of_cosine_converge():
    # cos(pi x) on the unit square: L2^2 = 1/2, |grad|^2 = pi^2/2, |D^2|^2 = pi^4/2
    n = 256
    g = square(n)
    x, _ = g.mesh()
    s = diag.norms(g, np.cos(np.pi * x))
    assert s.l2 == pytest.approx(np.sqrt(0.5), rel=1e-5)
    assert s.l4 == pytest.approx((3.0 / 8.0) ** 0.25, rel=1e-5)
    assert s.w12 == pytest.approx(np.sqrt(0.5 + np.pi**2 / 2), rel=1e-3)
    assert s.w22 == pytest.approx(np.sqrt(0.5 + np.pi**2 / 2 + np.pi**4 / 2), rel=1e-3)


def test_hessian_is_exact_on_quadratics():
    g = build_grid(9, 7, 1.0, 1.0)
    x, y = g.mesh()
    fxx, fxy, fyy = diag.hessian(g, 3 * x**2 - 2 * x * y + 0.5 * y**2)
    assert np.allclose(fxx, 6.0) and np.allclose(fxy, -2.0) and np.allclose(fyy, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_norms_are_nested(seed):
    g = build_grid(8, 8, 1.0, 1.0)
    f = np.random.default_rng(seed).standard_normal(g.shape)
    s = diag.norms(g, f)
    assert s.l2 <= s.w12 <= s.w22
    # unit area: L2 <= L4 <= Linf
    assert s.l2 <= s.l4 * (1 + 1e-12) and s.l4 <= s.linf * (1 + 1e-12)


def test_scaling_fit_examples():
    x = np.array([0.02, 0.04, 0.08, 0.16])
    fit = diag.scaling_fit(x, 5.0 * x**2, "delta")
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert np.exp(fit.intercept) == pytest.approx(5.0)
    assert fit.max_deviation < 1e-12
    assert fit.as_dict()["x"] == pytest.approx(list(x))
    with pytest.raises(ValueError):
        diag.scaling_fit([1, 2], [1, 4])
    with pytest.raises(ValueError):
        diag.scaling_fit([1, 2, 3], [1, 0, 4])


def test_steady_residual_of_trivial_state():
    g = square(8)
    r = diag.eq4_residual(g, np.ones(g.shape), np.zeros(g.shape), np.zeros(g.shape), 0.5, 1.0)
    assert all(v == 0.0 for v in r.values())


def test_steady_residual_detects_density_defect():
    g = square(8)
    r = diag.eq4_residual(g, np.full(g.shape, 0.5), np.zeros(g.shape), np.zeros(g.shape), 0.5, 1.0)
    # -rho (1 - rho^2) / eps^2 = -1.5 everywhere
    assert r["rho_eq"] == pytest.approx(1.5)
    assert r["chi_eq"] == 0.0 and r["phi_eq"] == 0.0
