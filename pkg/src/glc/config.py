"""Run configuration: TOML text with ``grid``, ``params``, ``solver``,
``sweep`` and ``output`` tables.  Every validation failure raises
:class:`ConfigError` naming the dotted key at fault."""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class GridConfig:
    nx: int = 32
    ny: int = 32
    lx: float = 1.0
    ly: float = 1.0
    # start/end default to the whole edge
    contacts: list = field(default_factory=lambda: [
        {"edge": "left", "weight": 1.0},
        {"edge": "right", "weight": -1.0},
    ])


@dataclass
class ParamsConfig:
    epsilon: float = 0.5
    sigma: float = 1.0
    amplitude: float = None
    delta: float = None
    shape: str = "uniform"


@dataclass
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 100
    corrector_tol: float = 1e-10
    corrector_max_iter: int = 50
    delta_guard: float = 0.5
    dt: float = 0.005
    T: float = 2.0
    sample_every: int = 10
    perturbation: float = 1e-3
    perturbation_kind: str = "random"
    seed: int = 0
    fit_window: list = field(default_factory=lambda: [0.3, 1.0])
    spectrum_mode: str = "auto"
    margin: float = 1e-6


@dataclass
class SweepConfig:
    axis: str = None
    values: list = None
    fixed_delta: float = None
    quantities: list = field(default_factory=lambda: ["one_minus_rho0_inf", "rho_s_minus_rho0_inf"])
    assert_slopes: dict = field(default_factory=dict)
    threads: int = 1


@dataclass
class OutputConfig:
    directory: str = "out"
    dump_fields: bool = False
    k: int = 6


@dataclass
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    params: ParamsConfig = field(default_factory=ParamsConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def as_dict(self):
        return asdict(self)


SECTIONS = {"grid": GridConfig, "params": ParamsConfig, "solver": SolverConfig,
            "sweep": SweepConfig, "output": OutputConfig}
SWEEP_AXES = ("delta", "epsilon", "sigma")
SWEEP_QUANTITIES = (
    "one_minus_rho0_inf", "one_minus_rho0_w22", "rho_s_minus_rho0_inf", "rho_s_minus_rho0_l2",
    "chi0_tilde_w12", "phi0_tilde_w12", "omega_delta_w12", "varphi_delta_w12", "h_norm",
    "first_ratio", "rho_eq_leading",
)

_INT_KEYS = {"nx", "ny", "max_iter", "corrector_max_iter", "sample_every", "seed", "threads", "k"}
_POSITIVE = {
    "grid.lx", "grid.ly", "params.epsilon", "params.sigma", "solver.tol", "solver.corrector_tol",
    "solver.delta_guard", "solver.dt", "solver.T", "solver.margin", "solver.max_iter",
    "solver.corrector_max_iter", "solver.sample_every", "sweep.threads", "output.k",
}


def _coerce(key, value, default):
    name = key.split(".")[-1]
    if name in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected true or false, got {value!r}")
        return value
    if isinstance(default, float) or name in ("amplitude", "delta", "fixed_delta"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str) or name in ("axis",):
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    if isinstance(default, (list, dict)) or name in ("values",):
        if not isinstance(value, (list, dict)):
            raise ConfigError(key, f"expected an array or table, got {value!r}")
    return value


def parse_config(data: dict) -> RunConfig:
    cfg = RunConfig()
    for section, body in data.items():
        if section not in SECTIONS:
            raise ConfigError(section, "unknown section")
        if not isinstance(body, dict):
            raise ConfigError(section, "expected a table")
        target = getattr(cfg, section)
        for key, value in body.items():
            dotted = f"{section}.{key}"
            if key not in target.__dataclass_fields__:
                raise ConfigError(dotted, "unknown key")
            setattr(target, key, _coerce(dotted, value, getattr(target, key)))
    validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("--config", f"file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("--config", f"not valid TOML: {exc}") from None
    return parse_config(data)


def validate(cfg: RunConfig):
    for dotted in _POSITIVE:
        section, key = dotted.split(".")
        value = getattr(getattr(cfg, section), key)
        if not value > 0:
            raise ConfigError(dotted, f"must be positive, got {value!r}")
    if cfg.grid.nx < 4 or cfg.grid.ny < 4:
        raise ConfigError("grid.nx" if cfg.grid.nx < 4 else "grid.ny", "needs at least 4 cells")
    if not 0 < cfg.params.epsilon <= 1:
        raise ConfigError("params.epsilon", "must lie in (0, 1]")
    if cfg.params.amplitude is not None and cfg.params.delta is not None:
        raise ConfigError("params.delta", "give either params.amplitude or params.delta, not both")
    if cfg.params.delta is not None and cfg.params.delta < 0:
        raise ConfigError("params.delta", "must be nonnegative")
    if cfg.params.shape not in ("uniform", "smooth"):
        raise ConfigError("params.shape", "must be 'uniform' or 'smooth'")
    for i, c in enumerate(cfg.grid.contacts):
        if not isinstance(c, dict) or "edge" not in c:
            raise ConfigError(f"grid.contacts[{i}]", "needs an edge")
        extra = set(c) - {"edge", "start", "end", "weight"}
        if extra:
            raise ConfigError(f"grid.contacts[{i}].{sorted(extra)[0]}", "unknown key")
    if cfg.solver.spectrum_mode not in ("auto", "dense", "iterative"):
        raise ConfigError("solver.spectrum_mode", "must be auto, dense or iterative")
    if cfg.solver.perturbation_kind not in ("random", "phase", "rho-constant"):
        raise ConfigError("solver.perturbation_kind", "must be random, phase or rho-constant")
    w = cfg.solver.fit_window
    if len(w) != 2 or not all(isinstance(v, (int, float)) for v in w) or not 0 <= w[0] < w[1]:
        raise ConfigError("solver.fit_window", "must be [t0, t1] with 0 <= t0 < t1")
    sw = cfg.sweep
    if sw.axis is not None or sw.values is not None:
        if sw.axis not in SWEEP_AXES:
            raise ConfigError("sweep.axis", f"must be one of {', '.join(SWEEP_AXES)}")
        if not isinstance(sw.values, list) or not sw.values:
            raise ConfigError("sweep.values", "must be a non-empty list")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0 for v in sw.values):
            raise ConfigError("sweep.values", "must be positive numbers")
        if any(b <= a for a, b in zip(sw.values, sw.values[1:])):
            raise ConfigError("sweep.values", "must be strictly increasing")
        for q in sw.quantities:
            if q not in SWEEP_QUANTITIES:
                raise ConfigError("sweep.quantities", f"unknown quantity {q!r}")
        for q, rng in sw.assert_slopes.items():
            if q not in sw.quantities:
                raise ConfigError(f"sweep.assert_slopes.{q}", "quantity is not in sweep.quantities")
            if not isinstance(rng, list) or len(rng) != 2 or not rng[0] < rng[1]:
                raise ConfigError(f"sweep.assert_slopes.{q}", "must be [low, high]")
        if sw.axis != "delta" and sw.fixed_delta is None and cfg.params.delta is None:
            raise ConfigError("sweep.fixed_delta", "needed when sweeping epsilon or sigma")
    return cfg


def require_sweep(cfg):
    if cfg.sweep.axis is None:
        raise ConfigError("sweep.axis", "missing: the sweep command needs a [sweep] table")
    if not cfg.sweep.values:
        raise ConfigError("sweep.values", "must be a non-empty list")
