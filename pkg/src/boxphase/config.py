"""Experiment configuration: flat `key = value` text files plus --set overrides.

Every run resolves to a full configuration echoed next to its results, so any
artifact can be reproduced from its own directory.  Unknown keys and
contradictory values are rejected before any computation.
"""

import math
import re
from dataclasses import dataclass, fields

from .errors import ConfigError
from .model import BoxDomain, Mode, PhysicalConstants, SweepConfig
from .propagator import Truncation
from .trajectory import LoopConfig

KINDS = ("sweep", "loop", "bound-check", "convergence", "phase-map", "recurrence")
GAUGES = ("coulomb", "vector", "both")

_NUMERIC_EXPR = re.compile(r"^[0-9pi+\-*/(). eE_]+$")


def _parse_number(text):
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    if _NUMERIC_EXPR.match(text):
        try:
            return float(eval(text, {"__builtins__": {}}, {"pi": math.pi}))
        except Exception:
            pass
    raise ConfigError(f"cannot parse numeric value {text!r}")


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot parse boolean value {text!r}")


@dataclass
class ExperimentConfig:
    """Fully resolved experiment parameters (see _SCHEMA for per-key parsing)."""

    kind: str = "sweep"
    X: float = 1.0
    Y: float = 1.0
    alpha: float = math.pi
    v: float = -0.01
    Ys: float = 0.5
    w: float = 0.05
    L: float = 10.0
    nx: int = 1
    ny: int = 1
    Mx: int = 10
    My: int = 10
    gauge: str = "coulomb"
    dt: float = None                  # None -> step policy
    sample_dt: float = None           # None -> ~200 samples per run
    t_end: float = None               # None -> kernel exit (sweep kinds)
    cycles: int = 1
    grid_nx: int = 201
    grid_ny: int = 201
    mask_eps: float = 1e-3
    tol_phase: float = 1e-2
    tol_overlap: float = 1e-3
    adiabatic_threshold: float = 5e-2
    codegeneracy_rtol: float = 5e-3
    figures: bool = True
    out: str = "out"

    def box(self):
        return BoxDomain(X=self.X, Y=self.Y)

    def mode(self):
        return Mode(nx=self.nx, ny=self.ny)

    def truncation(self):
        return Truncation(Mx=self.Mx, My=self.My)

    def sweep_config(self):
        return SweepConfig(v=self.v, Ys=self.Ys, w=self.w, alpha=self.alpha,
                           box=self.box(), consts=PhysicalConstants())

    def loop_config(self):
        return LoopConfig(sweep=self.sweep_config(), L=self.L)

    def run_config(self):
        """The kinematic configuration the experiment propagates under."""
        if self.kind in ("loop", "recurrence"):
            return self.loop_config()
        return self.sweep_config()

    def resolved_text(self):
        lines = [f"{f.name} = {getattr(self, f.name)}" for f in fields(self)]
        return "\n".join(lines) + "\n"


_SCHEMA = {
    "kind": str,
    "X": _parse_number, "Y": _parse_number, "alpha": _parse_number,
    "v": _parse_number, "Ys": _parse_number, "w": _parse_number, "L": _parse_number,
    "nx": int, "ny": int, "Mx": int, "My": int,
    "gauge": str,
    "dt": _parse_number, "sample_dt": _parse_number, "t_end": _parse_number,
    "cycles": int,
    "grid_nx": int, "grid_ny": int,
    "mask_eps": _parse_number, "tol_phase": _parse_number, "tol_overlap": _parse_number,
    "adiabatic_threshold": _parse_number, "codegeneracy_rtol": _parse_number,
    "figures": _parse_bool,
    "out": str,
}


def _apply(cfg_dict, key, raw):
    key = key.strip()
    if key not in _SCHEMA:
        raise ConfigError(f"unknown configuration key {key!r}")
    parser = _SCHEMA[key]
    try:
        if parser is int:
            cfg_dict[key] = int(str(raw).strip())
        elif parser is str:
            cfg_dict[key] = str(raw).strip()
        else:
            cfg_dict[key] = parser(str(raw))
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})")


def validate(cfg: ExperimentConfig):
    """Reject contradictory configurations with the offending key named."""
    if cfg.kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {cfg.kind!r}")
    if cfg.gauge not in GAUGES:
        raise ConfigError(f"gauge must be one of {GAUGES}, got {cfg.gauge!r}")
    if cfg.X <= 0 or cfg.Y <= 0:
        raise ConfigError("X, Y: box sides must be positive")
    if cfg.v >= 0:
        raise ConfigError(f"v = {cfg.v}: v < 0 required (source enters from the right)")
    if cfg.w <= 0 or cfg.w >= min(cfg.X, cfg.Y) / 4:
        raise ConfigError(f"w = {cfg.w}: need 0 < w << min(X, Y)")
    if not (0.0 < cfg.Ys < cfg.Y):
        raise ConfigError(f"Ys = {cfg.Ys}: entry height must lie inside (0, Y)")
    if cfg.nx < 1 or cfg.ny < 1:
        raise ConfigError("nx, ny: mode numbers must be >= 1")
    if cfg.Mx < 2 or cfg.My < 2:
        raise ConfigError("Mx, My: need at least 2 modes per direction")
    if cfg.nx > cfg.Mx or cfg.ny > cfg.My:
        raise ConfigError("tracked mode lies outside the truncation")
    if cfg.kind in ("loop", "recurrence"):
        if cfg.L <= 2 * (cfg.X + cfg.w) or cfg.L <= cfg.Y + cfg.w:
            raise ConfigError(
                f"L = {cfg.L}: breakpoint ordering requires L > 2(X + w) and L > Y + w")
    if cfg.cycles < 1:
        raise ConfigError("cycles must be >= 1")
    if cfg.kind == "convergence" and cfg.Mx != cfg.My:
        raise ConfigError("convergence studies assume a square truncation (Mx = My)")
    if cfg.dt is not None and cfg.dt <= 0:
        raise ConfigError("dt must be positive")
    if not (0 < cfg.mask_eps < 1):
        raise ConfigError("mask_eps must lie in (0, 1)")
    if cfg.grid_nx < 2 or cfg.grid_ny < 2:
        raise ConfigError("grid must have at least 2 points per direction")
    return cfg


def parse_config(path=None, overrides=()):
    """Build a validated ExperimentConfig from an optional file plus
    `key=value` override strings.  An empty or missing file means defaults."""
    values = {}
    if path is not None:
        try:
            text = open(path, "r", encoding="utf-8").read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}")
        for lineno, line in enumerate(text.splitlines(), 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"{path}:{lineno}: expected `key = value`, got {line!r}")
            key, raw = body.split("=", 1)
            _apply(values, key, raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        _apply(values, key, raw)
    try:
        cfg = ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc))
    return validate(cfg)
