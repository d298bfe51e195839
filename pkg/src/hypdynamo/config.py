"""Run configuration files: strict INI parsing and a canonical echo.

A configuration has a mandatory ``[params]`` section carrying ``model``
and optional ``[grid]``, ``[solver]``, ``[output]`` and ``[geometry]``
sections. Unknown sections and keys are errors, as are non-finite numbers.
``echo`` writes every field explicitly, so ``parse(echo(c)) == c``.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from typing import Union

from .analytic import ForcedParams, ForceFreeParams
from .errors import ConfigError
from .fields import Grid
from .solver import BOUNDARIES, DIFFUSION_SIGNS, SCHEMES, VELOCITY_INDEX

MODELS = ("force_free", "forced")
FLOWS = ("auto", "vertical_profile", "horizontal_constant", "none")
DEFAULT_GRID = Grid(0.0, 2.0, 0.25, 4.0, 128, 256)


@dataclass(frozen=True)
class SolverSettings:
    """Solver section. ``dt = None`` means ``dt_safety`` times the stability bound."""

    dt: Union[float, None] = None
    dt_safety: float = 0.9
    t_end: float = 0.5
    flow: str = "auto"
    diffusion_sign: str = "standard"
    boundary: str = "dirichlet_analytic"
    snapshot_every: int = 200
    scheme: str = "euler"
    velocity_index: str = "lowered"
    reference_factor: float = 1.5
    window_fraction: float = 0.5


@dataclass(frozen=True)
class OutputSettings:
    directory: str = "out"
    field_every: int = 0
    write_potential: bool = False


@dataclass(frozen=True)
class GeometrySettings:
    n_points: int = 10000
    h: float = 1e-3
    y_low: float = 0.3
    y_high: float = 10.0
    seed: int = 0
    tolerance: float = 1e-6
    christoffel_h: float = 1e-4
    christoffel_tolerance: float = 1e-6


@dataclass(frozen=True)
class RunConfig:
    params: Union[ForceFreeParams, ForcedParams]
    grid: Grid = DEFAULT_GRID
    solver: SolverSettings = field(default_factory=SolverSettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    geometry: GeometrySettings = field(default_factory=GeometrySettings)

    @property
    def model(self):
        return "force_free" if isinstance(self.params, ForceFreeParams) else "forced"


# ini key -> dataclass field, where they differ
_PARAM_KEYS = {
    "force_free": {"a0": "a0", "k_sep": "k_sep", "lambda": "lam", "eta": "eta", "v0": "v0"},
    "forced": {"gamma": "gamma", "v0": "v0", "eta": "eta"},
}
_GRID_KEYS = ("x_min", "x_max", "y_min", "y_max", "nx", "ny")
_CHOICES = {
    "flow": FLOWS,
    "diffusion_sign": DIFFUSION_SIGNS,
    "boundary": BOUNDARIES,
    "scheme": SCHEMES,
    "velocity_index": VELOCITY_INDEX,
}
_SECTIONS = ("grid", "params", "solver", "output", "geometry")


def _convert(section, key, raw, kind):
    where = f"{section}.{key}"
    raw = raw.strip()
    if kind is bool:
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"{where}: expected a boolean, got {raw!r}")
    if kind is int:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{where}: expected an integer, got {raw!r}") from None
    if kind is float:
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(f"{where}: expected a number, got {raw!r}") from None
        if not math.isfinite(value):
            raise ConfigError(f"{where}: must be finite, got {raw!r}")
        return value
    return raw


def _field_kinds(cls):
    kinds = {}
    for f in dataclasses.fields(cls):
        default = f.default if f.default is not dataclasses.MISSING else None
        if isinstance(default, bool):
            kinds[f.name] = bool
        elif isinstance(default, int):
            kinds[f.name] = int
        elif isinstance(default, float) or default is None:
            kinds[f.name] = float
        else:
            kinds[f.name] = str
    return kinds


def _read_section(cp, name, cls, rename=None):
    rename = rename or {}
    kinds = _field_kinds(cls)
    values = {}
    if not cp.has_section(name):
        return values
    for key, raw in cp.items(name):
        target = rename.get(key, key)
        if target not in kinds:
            raise ConfigError(f"{name}.{key}: unknown key")
        if cls is SolverSettings and key == "dt" and raw.strip().lower() == "auto":
            values["dt"] = None
            continue
        values[target] = _convert(name, key, raw, kinds[target])
    return values


def _build(where, cls, values):
    try:
        return cls(**values)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_text(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, strict=True, default_section="__none__")
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable configuration: {exc}") from None
    for name in cp.sections():
        if name not in _SECTIONS:
            raise ConfigError(f"[{name}]: unknown section")
    if not cp.has_section("params") or not cp.has_option("params", "model"):
        raise ConfigError("params.model: missing (one of force_free, forced)")
    model = cp.get("params", "model").strip()
    if model not in MODELS:
        raise ConfigError(f"params.model: must be one of {MODELS}, got {model!r}")

    param_cls = ForceFreeParams if model == "force_free" else ForcedParams
    keys = _PARAM_KEYS[model]
    values = {}
    for key, raw in cp.items("params"):
        if key == "model":
            continue
        if key not in keys:
            raise ConfigError(f"params.{key}: unknown key for model {model}")
        values[keys[key]] = _convert("params", key, raw, float)
    params = _build("params", param_cls, values)

    grid_values = {}
    if cp.has_section("grid"):
        for key, raw in cp.items("grid"):
            if key not in _GRID_KEYS:
                raise ConfigError(f"grid.{key}: unknown key")
            grid_values[key] = _convert("grid", key, raw, int if key in ("nx", "ny") else float)
    grid = _build("grid", Grid, {**dataclasses.asdict(DEFAULT_GRID), **grid_values})

    solver = _build("solver", SolverSettings, _read_section(cp, "solver", SolverSettings))
    output = _build("output", OutputSettings, _read_section(cp, "output", OutputSettings))
    geometry = _build("geometry", GeometrySettings, _read_section(cp, "geometry", GeometrySettings))
    cfg = RunConfig(params=params, grid=grid, solver=solver, output=output, geometry=geometry)
    validate(cfg)
    return cfg


def parse_file(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_text(text)


def validate(cfg: RunConfig):
    s = cfg.solver
    for name, allowed in _CHOICES.items():
        if getattr(s, name) not in allowed:
            raise ConfigError(f"solver.{name}: must be one of {allowed}, got {getattr(s, name)!r}")
    if s.dt is not None and not s.dt > 0:
        raise ConfigError(f"solver.dt: must be positive or 'auto', got {s.dt}")
    if not s.t_end > 0:
        raise ConfigError(f"solver.t_end: must be positive, got {s.t_end}")
    if s.dt is not None and s.t_end < s.dt:
        raise ConfigError(f"solver.t_end: {s.t_end} is shorter than dt={s.dt}")
    if not 0 < s.dt_safety <= 1:
        raise ConfigError(f"solver.dt_safety: must lie in (0, 1], got {s.dt_safety}")
    if s.snapshot_every < 1:
        raise ConfigError(f"solver.snapshot_every: must be >= 1, got {s.snapshot_every}")
    if not (s.reference_factor == 0 or s.reference_factor >= 1):
        raise ConfigError(f"solver.reference_factor: must be 0 (off) or >= 1, got {s.reference_factor}")
    if not 0 < s.window_fraction <= 1:
        raise ConfigError(f"solver.window_fraction: must lie in (0, 1], got {s.window_fraction}")
    if cfg.output.field_every < 0:
        raise ConfigError(f"output.field_every: must be >= 0, got {cfg.output.field_every}")
    if not cfg.output.directory:
        raise ConfigError("output.directory: must not be empty")
    g = cfg.geometry
    if g.n_points < 1:
        raise ConfigError(f"geometry.n_points: must be >= 1, got {g.n_points}")
    if not 0 < g.y_low < g.y_high:
        raise ConfigError(f"geometry.y_low/y_high: need 0 < y_low < y_high, got {g.y_low}, {g.y_high}")
    for name in ("h", "tolerance", "christoffel_h", "christoffel_tolerance"):
        if not getattr(g, name) > 0:
            raise ConfigError(f"geometry.{name}: must be positive")


def _fmt(value):
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def as_dict(cfg: RunConfig):
    """Nested {section: {key: string}} in canonical form."""
    params = {"model": cfg.model}
    for key, attr in _PARAM_KEYS[cfg.model].items():
        params[key] = _fmt(getattr(cfg.params, attr))
    out = {
        "grid": {k: _fmt(getattr(cfg.grid, k)) for k in _GRID_KEYS},
        "params": params,
    }
    for name in ("solver", "output", "geometry"):
        obj = getattr(cfg, name)
        out[name] = {f.name: _fmt(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    return out


def echo(cfg: RunConfig) -> str:
    lines = []
    for section, items in as_dict(cfg).items():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in items.items())
        lines.append("")
    return "\n".join(lines)
