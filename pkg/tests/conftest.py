import numpy as np
import pytest

from glc.grid import build_current_profile, build_grid
from glc.leading_order import solve_leading_order
from glc.steady import solve_steady

SYMMETRIC = (("left", 0.0, None, 1.0), ("right", 0.0, None, -1.0))


def square(n, side=1.0, contacts=SYMMETRIC):
    """Square grid with full-edge contacts on the left (inflow) and right (outflow)."""
    spec = [(e, s, side if t is None else t, w) for e, s, t, w in contacts]
    return build_grid(n, n, side, side, spec)


def profile_for_delta(grid, delta, epsilon, shape="uniform"):
    if delta == 0:
        return build_current_profile(grid, 0.0, shape)
    unit = build_current_profile(grid, 1.0, shape)
    return build_current_profile(grid, delta / (epsilon * unit.norm_J), shape)


def steady_state(n, delta, epsilon=0.5, sigma=1.0, side=1.0, **kw):
    g = square(n, side)
    p = profile_for_delta(g, delta, epsilon)
    bg = solve_leading_order(g, p, epsilon, sigma)
    return solve_steady(bg, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = {}


def report_criterion(number, passed, detail):
    """Record one acceptance line; all lines are repeated in the terminal summary."""
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
