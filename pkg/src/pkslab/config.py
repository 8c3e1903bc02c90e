"""Run configuration: strict parsing, defaults and range checks."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

import yaml

MODES = ("evolve", "stationary", "sweep-evolve", "sweep-stationary", "validate")
PRESETS = {
    "bump": {"amplitude": 0.5, "radius": 1.0},
    "patch": {"radius": 1.0},
    "stationary": {"mass": 4 * math.pi / 3},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str
    n_dim: int = 3
    m: Optional[float] = None
    m_values: Optional[list] = None
    r_max: Optional[float] = None
    cells: int = 2048
    initial: dict = field(default_factory=lambda: {"preset": "bump", **PRESETS["bump"]})
    mass: Optional[float] = None
    t_end: float = 0.5
    snapshots: int = 10
    support_tol: float = 1e-10
    cfl_diffusion: float = 0.25
    cfl_advection: float = 0.5
    output_dir: str = "runs"
    seed: int = 0
    perturbation: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def _fail(key, msg, value):
    raise ConfigError(f"{key}: {msg} (got {value!r})")


def _initial_data(raw) -> dict:
    if raw is None:
        raw = {"preset": "bump"}
    if isinstance(raw, str):
        raw = {"preset": raw}
    if not isinstance(raw, dict):
        _fail("initial", "must be a preset name or a mapping", raw)
    preset = raw.get("preset", "bump")
    if preset not in PRESETS:
        _fail("initial.preset", f"must be one of {sorted(PRESETS)}", preset)
    init = {"preset": preset, **PRESETS[preset]}
    for key, value in raw.items():
        if key == "preset":
            continue
        if key not in PRESETS[preset]:
            _fail(f"initial.{key}", f"unknown key for preset {preset!r}; "
                  f"valid keys are {sorted(PRESETS[preset])}", value)
        if not isinstance(value, (int, float)) or not value > 0:
            _fail(f"initial.{key}", "must be a positive number", value)
        init[key] = float(value)
    return init


def initial_support(init: dict, n_dim: int = 3) -> float:
    if init["preset"] in ("bump", "patch"):
        return init["radius"]
    from .stationary import limit_radius

    return limit_radius(init["mass"], n_dim)


def build_config(raw: dict) -> RunConfig:
    """Validate a raw mapping into a RunConfig; unknown keys are errors."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    known = {f.name for f in fields(RunConfig)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{key}: unknown key; valid keys are {sorted(known)}")
    if "mode" not in raw:
        raise ConfigError(f"mode: required, one of {list(MODES)}")
    data = dict(raw)
    data["initial"] = _initial_data(raw.get("initial"))
    cfg = RunConfig(**data)
    _check(cfg)
    return cfg


def _check(cfg: RunConfig):
    if cfg.mode not in MODES:
        _fail("mode", f"must be one of {list(MODES)}", cfg.mode)
    if not isinstance(cfg.n_dim, int) or cfg.n_dim < 3:
        _fail("n_dim", "must be an integer >= 3", cfg.n_dim)
    if not isinstance(cfg.cells, int) or isinstance(cfg.cells, bool) or cfg.cells < 8:
        _fail("cells", "must be an integer >= 8", cfg.cells)
    if not isinstance(cfg.snapshots, int) or cfg.snapshots < 1:
        _fail("snapshots", "must be an integer >= 1", cfg.snapshots)
    if not cfg.t_end >= 0:
        _fail("t_end", "must be >= 0", cfg.t_end)
    if not 0 < cfg.cfl_diffusion <= 0.5:
        _fail("cfl_diffusion", "must lie in (0, 0.5]", cfg.cfl_diffusion)
    if not 0 < cfg.cfl_advection <= 1:
        _fail("cfl_advection", "must lie in (0, 1]", cfg.cfl_advection)
    if not cfg.support_tol > 0:
        _fail("support_tol", "must be > 0", cfg.support_tol)
    if cfg.perturbation < 0:
        _fail("perturbation", "must be >= 0", cfg.perturbation)

    stationary = cfg.mode in ("stationary", "sweep-stationary")
    m_min, why = (3.0, "stationary modes need m >= 3") if stationary else (1.0, "needs m > 1")
    if cfg.mode in ("evolve", "stationary"):
        if cfg.m is None:
            _fail("m", f"required for mode {cfg.mode}", None)
        if not (cfg.m > m_min or (stationary and cfg.m >= m_min)):
            _fail("m", why, cfg.m)
        cfg.m = float(cfg.m)
    if cfg.mode in ("sweep-evolve", "sweep-stationary"):
        if not cfg.m_values:
            _fail("m_values", f"required for mode {cfg.mode}", cfg.m_values)
        vals = [float(v) for v in cfg.m_values]
        for v in vals:
            if not (v > m_min or (stationary and v >= m_min)):
                _fail("m_values", why, v)
        if sorted(set(vals)) != vals:
            _fail("m_values", "must be strictly increasing", cfg.m_values)
        cfg.m_values = vals

    if stationary:
        if cfg.mass is None:
            cfg.mass = cfg.initial.get("mass", PRESETS["stationary"]["mass"])
        if not cfg.mass > 0:
            _fail("mass", "must be > 0", cfg.mass)
    if cfg.r_max is None:
        if stationary:
            from .stationary import limit_radius

            cfg.r_max = 3.0 * max(limit_radius(cfg.mass, cfg.n_dim), 1.0)
        else:
            cfg.r_max = 4.0 * initial_support(cfg.initial, cfg.n_dim)
    if not cfg.r_max > 0:
        _fail("r_max", "must be > 0", cfg.r_max)
    if not stationary and cfg.mode != "validate" and initial_support(cfg.initial, cfg.n_dim) >= 0.9 * cfg.r_max:
        _fail("r_max", "initial support must lie inside 0.9 * r_max", cfg.r_max)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    raw: dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        raw = yaml.safe_load(p.read_text()) or {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{p}: top level must be a mapping")
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    return build_config(raw)
