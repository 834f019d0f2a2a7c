"""``glc`` command line: steady, stability, evolve, sweep and oracle listing."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import traceback
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import diagnostics as diag
from .config import load_config, require_sweep
from .errors import ConfigError, GLError, PhysicalBreakdown
from .grid import ContactSegment, ModelParams, build_current_profile, build_grid, write_field_csv, Field
from .leading_order import solve_leading_order
from .steady import solve_steady

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_PHYSICAL = 2
EXIT_UNSTABLE = 3
EXIT_CONFIG = 64

EPILOG = """\
exit codes:
  0   success (converged; stable; all slope assertions passed)
  1   internal error (bug, linear-solver failure, blow-up)
  2   physical breakdown: NoContraction, SupercriticalCurrent or delta above the guard
  3   stability verdict unstable or marginal, or a sweep slope assertion failed
  64  configuration error; the message names the offending key
"""


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_report(outdir, report):
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "report.json")
    with open(path, "w") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
    return path


def build_problem(cfg, delta=None, epsilon=None, sigma=None):
    """Grid, profile and parameters for a config, with optional overrides."""
    gc = cfg.grid
    contacts = []
    for c in gc.contacts:
        full = gc.ly if c["edge"] in ("left", "right") else gc.lx
        contacts.append(ContactSegment(c["edge"], float(c.get("start", 0.0)), float(c.get("end", full)),
                                       float(c.get("weight", 1.0))))
    try:
        grid = build_grid(gc.nx, gc.ny, gc.lx, gc.ly, contacts)
    except GLError as exc:
        raise ConfigError("grid.contacts", str(exc)) from None
    eps = cfg.params.epsilon if epsilon is None else epsilon
    sig = cfg.params.sigma if sigma is None else sigma
    if delta is None:
        delta = cfg.params.delta
    if delta is not None:
        unit = build_current_profile(grid, 1.0, cfg.params.shape) if delta > 0 else None
        amplitude = delta / (eps * unit.norm_J) if unit is not None else 0.0
    else:
        amplitude = cfg.params.amplitude or 0.0
    try:
        profile = build_current_profile(grid, amplitude, cfg.params.shape)
    except GLError as exc:
        raise ConfigError("params.shape", str(exc)) from None
    return grid, profile, ModelParams(eps, sig, profile.norm_J)


def _leading(cfg, grid, profile, params):
    s = cfg.solver
    return solve_leading_order(grid, profile, params.epsilon, params.sigma, tol=s.corrector_tol,
                               max_iter=s.corrector_max_iter, delta_guard=s.delta_guard)


def _steady(cfg, grid, profile, params):
    bg = _leading(cfg, grid, profile, params)
    return bg, solve_steady(bg, tol=cfg.solver.tol, max_iter=cfg.solver.max_iter)


def _breakdown_report(exc):
    out = {"status": type(exc).__name__, "message": str(exc)}
    for attr in ("stage", "ratios", "delta", "cell", "max_value", "guard"):
        if hasattr(exc, attr):
            out[attr] = getattr(exc, attr)
    return out


def _field_dump(outdir, grid, fields):
    for name, values in fields.items():
        write_field_csv(os.path.join(outdir, f"{name}.csv"), Field(grid, values))


def _steady_block(bg, sol):
    g = bg.grid
    return {
        "leading_order": bg.summary(),
        "steady": sol.summary(),
        "norms": {
            "one_minus_rho0": diag.norms(g, 1.0 - bg.rho0).as_dict(),
            "rho_s_minus_rho0": diag.norms(g, sol.correction.rho1).as_dict(),
            "chi1": diag.norms(g, sol.correction.chi1).as_dict(),
            "phi1": diag.norms(g, sol.correction.phi1).as_dict(),
            "chi0_tilde": diag.norms(g, bg.chi0_tilde).as_dict(),
            "phi0_tilde": diag.norms(g, bg.phi0_tilde).as_dict(),
        },
        "residuals": dict(sol.eq4_residuals),
        "iterations": {"corrector": bg.iterations, "picard": sol.iterations},
        "ratios": list(sol.contraction_ratios),
    }


def cmd_steady(cfg, outdir):
    grid, profile, params = build_problem(cfg)
    report = {"command": "steady", "config": cfg.as_dict()}
    t0 = time.perf_counter()
    try:
        bg, sol = _steady(cfg, grid, profile, params)
    except PhysicalBreakdown as exc:
        report.update(_breakdown_report(exc))
        write_report(outdir, report)
        return EXIT_PHYSICAL
    report["status"] = "converged"
    report.update(_steady_block(bg, sol))
    report["timing"] = {"wall_time": time.perf_counter() - t0}
    if cfg.output.dump_fields:
        os.makedirs(outdir, exist_ok=True)
        _field_dump(outdir, grid, {"rho_s": sol.rho_s, "chi_s": sol.chi_s, "phi_s": sol.phi_s,
                                   "rho0": bg.rho0})
    write_report(outdir, report)
    return EXIT_OK


def cmd_stability(cfg, outdir):
    from .stability import LinearizedOperator, spectrum

    grid, profile, params = build_problem(cfg)
    report = {"command": "stability", "config": cfg.as_dict()}
    t0 = time.perf_counter()
    try:
        bg, sol = _steady(cfg, grid, profile, params)
    except PhysicalBreakdown as exc:
        report.update(_breakdown_report(exc))
        write_report(outdir, report)
        return EXIT_PHYSICAL
    report.update(_steady_block(bg, sol))
    op = LinearizedOperator(sol)
    rep = spectrum(op, k=cfg.output.k, mode=cfg.solver.spectrum_mode, margin=cfg.solver.margin)
    report["status"] = rep.verdict
    report["verdict"] = rep.verdict
    report["spectrum"] = rep.as_dict(limit=cfg.output.k)
    report["timing"] = {"wall_time": time.perf_counter() - t0}
    print(f"min Re lambda (non-gauge) = {rep.min_re_nongauge:.10g}  verdict: {rep.verdict}")
    print(f"gauge eigenvalue = {rep.gauge_eigenvalue.real:.3e}{rep.gauge_eigenvalue.imag:+.3e}j")
    if cfg.output.dump_fields:
        os.makedirs(outdir, exist_ok=True)
        for k in range(min(cfg.output.k, len(rep.eigenvalues))):
            r, c = rep.mode(k, grid)
            _field_dump(outdir, grid, {f"mode{k}_rho": r.real, f"mode{k}_chi": c.real})
    write_report(outdir, report)
    return EXIT_OK if rep.verdict == "stable" else EXIT_UNSTABLE


def perturbation(grid, u_s, kind, amplitude, seed):
    """Initial datum near ``u_s``: random unit-L2 noise, a global phase, or a
    constant modulus change."""
    if kind == "phase":
        return u_s * np.exp(1j * amplitude)
    if kind == "rho-constant":
        return u_s + amplitude * u_s / max(np.sqrt(np.sum(np.abs(u_s) ** 2) * grid.cell_area), 1e-300)
    rng = np.random.default_rng(seed)
    p = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    p /= np.sqrt(np.sum(np.abs(p) ** 2) * grid.cell_area)
    return u_s + amplitude * p


def cmd_evolve(cfg, outdir):
    from .stability import spectrum
    from .tdgl import decay_rate, evolve, steady_order_parameter

    grid, profile, params = build_problem(cfg)
    s = cfg.solver
    report = {"command": "evolve", "config": cfg.as_dict()}
    t0 = time.perf_counter()
    try:
        bg, sol = _steady(cfg, grid, profile, params)
    except PhysicalBreakdown as exc:
        report.update(_breakdown_report(exc))
        write_report(outdir, report)
        return EXIT_PHYSICAL
    u_s = steady_order_parameter(sol)
    u0 = perturbation(grid, u_s, s.perturbation_kind, s.perturbation, s.seed)
    traj = evolve(u0, s.T, s.dt, profile, params, sample_every=s.sample_every, u_ref=u_s, grid=grid)
    os.makedirs(outdir, exist_ok=True)
    traj.write_csv(os.path.join(outdir, "trajectory.csv"))
    report["status"] = "completed"
    report["steady"] = sol.summary()
    report["trajectory"] = {
        "final_phase_distance": traj.phase_distance[-1],
        "final_distance": traj.distance[-1],
        "max_gauge_violation": traj.max_gauge_violation,
        "max_abs_u": float(np.max(traj.max_abs)),
        "samples": len(traj.times),
    }
    if s.perturbation_kind != "phase":
        try:
            rate = decay_rate(traj, tuple(s.fit_window))
        except ValueError as exc:
            rate = None
            report["trajectory"]["fit_error"] = str(exc)
        rep = spectrum(sol, k=max(cfg.output.k, 1), mode=s.spectrum_mode, margin=s.margin)
        report["trajectory"]["decay_rate"] = rate
        report["spectrum"] = rep.as_dict(limit=cfg.output.k)
        if rate is not None:
            report["trajectory"]["rate_over_min_re"] = rate / rep.min_re_nongauge
    report["timing"] = {"wall_time": time.perf_counter() - t0}
    write_report(outdir, report)
    return EXIT_OK


def sweep_point(cfg, value):
    """All sweep quantities at one sweep value; breakdowns become a status."""
    sw = cfg.sweep
    kw = {}
    fixed = sw.fixed_delta if sw.fixed_delta is not None else cfg.params.delta
    if sw.axis == "delta":
        kw["delta"] = value
    else:
        kw["delta"] = fixed
        kw[sw.axis] = value
    grid, profile, params = build_problem(cfg, **kw)
    row = {"value": value, "delta": params.delta, "epsilon": params.epsilon, "sigma": params.sigma}
    try:
        bg = _leading(cfg, grid, profile, params)
        row.update({
            "one_minus_rho0_inf": float(np.max(1.0 - bg.rho0)),
            "one_minus_rho0_w22": diag.norms(grid, 1.0 - bg.rho0).w22,
            "chi0_tilde_w12": diag.norms(grid, bg.chi0_tilde).w12,
            "phi0_tilde_w12": diag.norms(grid, bg.phi0_tilde).w12,
            "omega_delta_w12": diag.norms(grid, bg.omega_delta).w12,
            "varphi_delta_w12": diag.norms(grid, bg.varphi_delta).w12,
            "rho_eq_leading": diag.eq4_residual(grid, bg.rho0, bg.chi0, bg.phi0, params.epsilon,
                                              params.sigma, profile)["rho_eq"],
            "corrector_iterations": bg.iterations,
        })
        sol = solve_steady(bg, tol=cfg.solver.tol, max_iter=cfg.solver.max_iter)
        row.update({
            "rho_s_minus_rho0_inf": float(np.max(np.abs(sol.correction.rho1))),
            "rho_s_minus_rho0_l2": diag.l2(grid, sol.correction.rho1),
            "h_norm": sol.h_norm_final,
            "first_ratio": sol.contraction_ratios[0] if sol.contraction_ratios else 0.0,
            "picard_iterations": sol.iterations,
            "rho_eq": sol.eq4_residuals["rho_eq"],
            "chi_eq": sol.eq4_residuals["chi_eq"],
            "phi_eq": sol.eq4_residuals["phi_eq"],
            "phi_integral_relative": sol.eq4_residuals["phi_integral_relative"],
            "status": "converged",
        })
    except PhysicalBreakdown as exc:
        row["status"] = type(exc).__name__
    return row


SWEEP_COLUMNS = [
    "value", "delta", "epsilon", "sigma", "status", "corrector_iterations", "picard_iterations",
    "one_minus_rho0_inf", "one_minus_rho0_w22", "rho_s_minus_rho0_inf", "rho_s_minus_rho0_l2",
    "h_norm", "first_ratio", "chi0_tilde_w12", "phi0_tilde_w12", "omega_delta_w12",
    "varphi_delta_w12", "rho_eq_leading", "rho_eq", "chi_eq", "phi_eq", "phi_integral_relative",
]


def write_sweep_csv(path, rows):
    with open(path, "w") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join("" if row.get(c) is None else (row[c] if isinstance(row[c], str) else repr(row[c]))
                              for c in SWEEP_COLUMNS) + "\n")


def cmd_sweep(cfg, outdir, threads=None):
    require_sweep(cfg)
    sw = cfg.sweep
    threads = threads or sw.threads
    report = {"command": "sweep", "config": cfg.as_dict()}
    t0 = time.perf_counter()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda v: sweep_point(cfg, v), sw.values))
    else:
        rows = [sweep_point(cfg, v) for v in sw.values]
    rows.sort(key=lambda r: r["value"])
    os.makedirs(outdir, exist_ok=True)
    write_sweep_csv(os.path.join(outdir, "sweep.csv"), rows)
    ok = [r for r in rows if r["status"] == "converged"]
    fits, checks = {}, {}
    for q in sw.quantities:
        pts = [(r["value"], r.get(q)) for r in ok if r.get(q) is not None and r.get(q) > 0]
        if len(pts) >= 3:
            fits[q] = diag.scaling_fit([p[0] for p in pts], [p[1] for p in pts], sw.axis).as_dict()
    code = EXIT_OK
    for q, (lo, hi) in sw.assert_slopes.items():
        slope = fits.get(q, {}).get("slope")
        passed = slope is not None and lo <= slope <= hi
        checks[q] = {"range": [lo, hi], "slope": slope, "passed": passed}
        print(f"{q}: slope {slope if slope is None else f'{slope:.4f}'} in [{lo}, {hi}] -> "
              f"{'PASS' if passed else 'FAIL'}")
        if slope is None:
            code = max(code, EXIT_PHYSICAL)
        elif not passed:
            code = EXIT_UNSTABLE
    report.update({"status": "completed", "rows": rows, "fits": fits, "assertions": checks,
                   "timing": {"wall_time": time.perf_counter() - t0}})
    write_report(outdir, report)
    return code


def cmd_oracles(list_only=True):
    from .oracles import catalogue

    for case in catalogue():
        print(f"{case.name}")
        print(f"  inputs:    {json.dumps(_jsonable(case.inputs))}")
        print(f"  expected:  {json.dumps(_jsonable(case.expected))}  (tol {case.tolerance:g})")
        print(f"  derivation: {case.note}")
    return EXIT_OK


def make_parser():
    p = argparse.ArgumentParser(
        prog="glc",
        description="Steady states, linear stability and time evolution for a reduced "
                    "Ginzburg-Landau model of a superconductor carrying a weak current.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("steady", "leading-order state and fixed-point steady state"),
                       ("stability", "steady state, then the low spectrum and a verdict"),
                       ("evolve", "time evolution from a perturbed steady state"),
                       ("sweep", "scaling sweep over delta, epsilon or sigma")):
        sp_ = sub.add_parser(name, help=text, epilog=EPILOG,
                             formatter_class=argparse.RawDescriptionHelpFormatter)
        sp_.add_argument("--config", required=True, help="TOML run configuration")
        sp_.add_argument("--out", help="output directory (overrides output.directory)")
        sp_.add_argument("--threads", type=int, help="worker threads for sweep points")
    o = sub.add_parser("oracles", help="reference cases used by the test-suite", epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    o.add_argument("--list", action="store_true", help="print the oracle catalogue")
    return p


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "oracles":
            return cmd_oracles()
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads", "must be at least 1")
        cfg = load_config(args.config)
        outdir = args.out or cfg.output.directory
        if args.command == "steady":
            return cmd_steady(cfg, outdir)
        if args.command == "stability":
            return cmd_stability(cfg, outdir)
        if args.command == "evolve":
            return cmd_evolve(cfg, outdir)
        return cmd_sweep(cfg, outdir, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhysicalBreakdown as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PHYSICAL
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
