"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline;
they are also collected in the terminal summary.
"""

import json
import time
from pathlib import Path

import numpy as np

from glc import operators as ops
from glc.cli import main
from glc.diagnostics import manufactured_convergence, scaling_fit
from glc.errors import NoContraction, SupercriticalCurrent
from glc.grid import ModelParams, build_grid
from glc.leading_order import solve_leading_order
from glc.oracles import MANUFACTURED, neumann_eigenvalues
from glc.stability import spectrum
from glc.steady import CorrectionTriple, h_norm, solve_steady
from glc.tdgl import decay_rate, evolve, steady_order_parameter

from conftest import profile_for_delta, report_criterion, square

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
EPS = 0.5


def leading(n, delta, eps=EPS, sigma=1.0, side=1.0, **kw):
    g = square(n, side)
    return solve_leading_order(g, profile_for_delta(g, delta, eps), eps, sigma, **kw)


def steady(n, delta, eps=EPS, sigma=1.0, side=1.0):
    return solve_steady(leading(n, delta, eps, sigma, side))


def ball_start(grid, delta, eps, seed=7):
    """Smooth random correction with ``||v||_H = delta * eps / 2``."""
    rng = np.random.default_rng(seed)
    x, y = grid.mesh()
    modes = [np.cos(np.pi * k * x / grid.lx) * np.cos(np.pi * m * y / grid.ly)
             for k in range(3) for m in range(3)]
    f = [sum(c * mode for c, mode in zip(rng.standard_normal(9), modes)) for _ in range(3)]
    v = CorrectionTriple(grid, f[0], f[1] - f[1].mean(), f[2])
    return v * (delta * eps / 2.0 / h_norm(v, eps))


def test_criterion_01_trivial_state():
    t0 = time.perf_counter()
    s = steady(64, 0.0)
    elapsed = time.perf_counter() - t0
    r = s.eq4_residuals
    worst = max(r["rho_eq"], r["chi_eq"], r["phi_eq"], abs(r["phi_integral"]))
    exact = np.all(s.rho_s == 1.0) and not np.any(s.chi_s) and not np.any(s.phi_s)
    ok = bool(exact) and worst <= 1e-10 and elapsed < 1.0
    report_criterion(1, ok, f"rho=1, chi=phi=0: {exact}; max residual {worst:.1e}; {elapsed:.3f} s")
    assert ok


def test_criterion_02_leading_order_exponent():
    t0 = time.perf_counter()
    deltas = [0.02, 0.04, 0.08, 0.16]
    vals = [float(np.max(1.0 - leading(64, d).rho0)) for d in deltas]
    fit = scaling_fit(deltas, vals, "delta")
    elapsed = time.perf_counter() - t0
    ok = abs(fit.slope - 2.0) <= 0.15 and elapsed < 30.0
    report_criterion(2, ok, f"slope of ||1-rho0||_inf vs delta = {fit.slope:.4f} (2.0 +/- 0.15); {elapsed:.1f} s")
    assert ok


def test_criterion_03_steady_correction_exponents():
    t0 = time.perf_counter()
    deltas = [0.02, 0.04, 0.08, 0.16]
    eps_values = [0.25, 0.5, 1.0]
    side, n = 3.0, 48
    d_vals = [float(np.max(np.abs(steady(n, d, side=side).correction.rho1))) for d in deltas]
    e_vals = [float(np.max(np.abs(steady(n, 0.08, eps=e, side=side).correction.rho1))) for e in eps_values]
    d_fit = scaling_fit(deltas, d_vals, "delta")
    e_fit = scaling_fit(eps_values, e_vals, "epsilon")
    # same sweep on the unit square, for the record
    unit = [float(np.max(np.abs(steady(48, 0.08, eps=e).correction.rho1))) for e in eps_values]
    unit_fit = scaling_fit(eps_values, unit, "epsilon")
    elapsed = time.perf_counter() - t0
    ok = abs(d_fit.slope - 2.0) <= 0.2 and abs(e_fit.slope - 1.0) <= 0.2 and elapsed < 120.0
    report_criterion(3, ok, f"side {side:g}: delta-slope {d_fit.slope:.4f} (2 +/- 0.2), eps-slope "
                            f"{e_fit.slope:.4f} (1 +/- 0.2); unit square eps-slope {unit_fit.slope:.4f} "
                            f"(info); {elapsed:.1f} s")
    assert ok


def _outcome(grid, delta):
    try:
        bg = solve_leading_order(grid, profile_for_delta(grid, delta, EPS), EPS, 1.0, delta_guard=np.inf)
        solve_steady(bg)
        return "converged"
    except NoContraction as exc:
        return f"NoContraction({exc.stage})"
    except SupercriticalCurrent:
        return "SupercriticalCurrent"


def test_criterion_04_contraction():
    n = 64
    from_zero = steady(n, 0.1)
    all_below = max(from_zero.contraction_ratios) < 1.0
    first = {}
    zero_first = {}
    for d in (0.1, 0.2):
        bg = leading(n, d)
        first[d] = solve_steady(bg, v0=ball_start(bg.grid, d, EPS)).contraction_ratios[0]
        zero_first[d] = solve_steady(bg).contraction_ratios[0]
    factor = first[0.2] / first[0.1]
    zero_factor = zero_first[0.2] / zero_first[0.1]

    # escalate delta until a NoContraction is reported, then bisect the threshold
    g = square(32)
    delta, last_ok, first_bad, outcome = 0.1, None, None, "converged"
    while delta < 100.0:
        outcome = _outcome(g, delta)
        if outcome.startswith("NoContraction"):
            first_bad = delta
            break
        if outcome == "converged":
            last_ok = delta
        delta *= 2.0
    threshold = None
    if first_bad is not None and last_ok is not None:
        lo, hi = last_ok, first_bad
        for _ in range(20):
            mid = 0.5 * (lo + hi)
            if _outcome(g, mid) == "converged":
                lo = mid
            else:
                hi = mid
        threshold = (lo, hi, _outcome(g, hi))
    ok = all_below and abs(factor - 2.0) <= 0.5 and threshold is not None
    thr = "none" if threshold is None else f"{threshold[0]:.4f}..{threshold[1]:.4f} ({threshold[2]})"
    report_criterion(4, ok, f"max ratio at delta=0.1 {max(from_zero.contraction_ratios):.2e}; ball-start "
                            f"ratio(0.2)/ratio(0.1) = {factor:.3f} (2 +/- 0.5); from-zero factor "
                            f"{zero_factor:.3f} (info); breakdown threshold delta in {thr} at 32x32")
    assert ok


def test_criterion_05_zero_current_spectrum():
    t0 = time.perf_counter()
    s = steady(64, 0.0)
    rep = spectrum(s, k=6, mode="iterative")
    elapsed = time.perf_counter() - t0
    n = s.grid.n
    vecs = rep.eigenvectors
    chi_dominant = np.linalg.norm(vecs[n:], axis=0) > np.linalg.norm(vecs[:n], axis=0)
    chi_leader = float(np.min(rep.eigenvalues.real[chi_dominant]))
    mu1 = np.sort(neumann_eigenvalues(64, 64, 1.0, 1.0))[1]
    expected_chi = 1.0 + mu1
    rel_min = abs(rep.min_re_nongauge - 8.0) / 8.0
    rel_chi = abs(chi_leader - expected_chi) / expected_chi
    gauge = abs(rep.gauge_eigenvalue)
    ok = rel_min <= 0.02 and gauge <= 1e-6 * 8.0 and rel_chi <= 0.02 and elapsed < 60.0
    report_criterion(5, ok, f"min Re = {rep.min_re_nongauge:.6f} (8, rel {rel_min:.1e}); |gauge| = {gauge:.1e} (Rayleigh quotient); "
                            f"chi-branch leader {chi_leader:.6f} vs 1+mu1 = {expected_chi:.6f}; "
                            f"{rep.method}, {elapsed:.1f} s")
    assert ok


def test_criterion_06_stability_verdict():
    lines, ok = [], True
    for d in (0.02, 0.05, 0.1):
        rep = spectrum(steady(64, d), k=6, mode="iterative")
        good = (rep.verdict == "stable" and abs(rep.min_re_nongauge - 8.0) <= 0.25 * 8.0
                and np.max(rep.residuals) <= 1e-6)
        ok &= good
        lines.append(f"delta={d}: {rep.verdict} min Re {rep.min_re_nongauge:.5f} res {np.max(rep.residuals):.1e}")
    report_criterion(6, ok, "; ".join(lines))
    assert ok


def test_criterion_07_dynamics_versus_spectrum():
    t0 = time.perf_counter()
    s = steady(64, 0.05)
    rep = spectrum(s, k=6, mode="iterative")
    g = s.grid
    params = ModelParams(s.epsilon, s.sigma, s.profile.norm_J)
    us = steady_order_parameter(s)
    rng = np.random.default_rng(0)
    p = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
    p /= np.sqrt(np.sum(np.abs(p) ** 2) * g.cell_area)
    traj = evolve(us + 1e-3 * p, 1.5, 0.005, s.profile, params, sample_every=10, u_ref=us, grid=g)
    rate = decay_rate(traj, window=(0.5, 1.5))
    phase = evolve(us * np.exp(1e-3j), 1.5, 0.005, s.profile, params, sample_every=10, u_ref=us, grid=g)
    drift = float(np.max(phase.phase_distance))
    elapsed = time.perf_counter() - t0
    rel = abs(rate - rep.min_re_nongauge) / rep.min_re_nongauge
    ok = rel <= 0.2 and drift <= 1e-6 and elapsed < 120.0
    report_criterion(7, ok, f"decay rate {rate:.4f} vs min Re {rep.min_re_nongauge:.4f} (rel {rel:.3f}); "
                            f"pure-phase drift {drift:.1e}; {elapsed:.1f} s")
    assert ok


def test_criterion_08_discretization_order():
    orders = {}
    for name, case in MANUFACTURED.items():
        orders[name] = manufactured_convergence(case, sizes=(16, 32, 64, 128)).orders
    order_ok = all(abs(p - 2.0) <= 0.1 for v in orders.values() for p in v)
    g = build_grid(16, 16, 1.0, 1.0)
    L = ops.laplacian_neumann(g).tocsc()
    bitwise = True
    for k in range(g.n):
        e = np.zeros(g.n)
        e[k] = 1.0
        bitwise &= np.array_equal(L[:, k].toarray().ravel(), ops.divergence(ops.gradient(g, e)).ravel())
    ok = order_ok and bool(bitwise)
    txt = ", ".join(f"{k}: " + "/".join(f"{p:.3f}" for p in v) for k, v in orders.items())
    report_criterion(8, ok, f"orders {txt}; div(grad) == assembled Laplacian bitwise: {bool(bitwise)}")
    assert ok


def test_criterion_09_gauge_identities():
    worst_steady = 0.0
    for d in (0.02, 0.05, 0.1, 0.2):
        for side in (1.0, 3.0):
            s = steady(32, d, side=side)
            worst_steady = max(worst_steady, s.eq4_residuals["phi_integral_relative"])
    s = steady(32, 0.1)
    params = ModelParams(s.epsilon, s.sigma, s.profile.norm_J)
    us = steady_order_parameter(s)
    rng = np.random.default_rng(3)
    u0 = us + 1e-2 * (rng.standard_normal(us.shape) + 1j * rng.standard_normal(us.shape))
    traj = evolve(u0, 0.5, 0.005, s.profile, params, grid=s.grid)
    ok = worst_steady <= 1e-8 and traj.max_gauge_violation <= 1e-8
    report_criterion(9, ok, f"max relative steady integral {worst_steady:.1e}; max TDGL normalization "
                            f"violation over 100 steps {traj.max_gauge_violation:.1e}")
    assert ok


def _numerics(path):
    rep = json.loads(path.read_text())
    rep.pop("timing", None)
    return rep


def test_criterion_10_determinism(tmp_path):
    runs = [("steady", "trivial"), ("stability", "stability"), ("evolve", "evolve"),
            ("sweep", "sweep_delta"), ("sweep", "sweep_epsilon")]
    same, bad = True, []
    for cmd, name in runs:
        out = []
        for k in range(2):
            d = tmp_path / f"{name}{k}"
            code = main([cmd, "--config", str(CONFIGS / f"{name}.toml"), "--out", str(d), "--threads", "1"])
            assert code == 0, (cmd, name, code)
            out.append(_numerics(d / "report.json"))
        if out[0] != out[1]:
            same = False
            bad.append(name)
    report_criterion(10, same, f"{len(runs)} configs run twice single-threaded; report.json numerics identical"
                               + ("" if same else f" except {bad}"))
    assert same
