"""Strict JSON run configuration for the command-line front end."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigInvalid, InputUnreadable

CELL_KEYS = ("kind", "inner_radius", "outer_radius", "shrink")


@dataclass
class PrototypeConfig:
    family: str = "annular-hermite-gauss"
    order: int = 2
    width: float = 1.0
    role: str | None = None
    radii: list = field(default_factory=list)
    profile: list = field(default_factory=list)


@dataclass
class CertifyConfig:
    roles: list = field(default_factory=lambda: ["frame", "atoms"])
    convention: str = "stated"
    truncation: int = 64
    grid: int = 32
    margin: float = 1.0
    vanishing_cap: float | None = None
    master_constant: float | None = None
    pairs: list | None = None


@dataclass
class RoundtripConfig:
    deltas: list = field(default_factory=lambda: [0.5, 0.25, 0.125])
    trials: int = 10
    seed: int = 0


@dataclass
class RunConfig:
    matrix: list = field(default_factory=lambda: [[2.0]])
    kind: str = "homogeneous"
    s: float = 0.0
    p: float = 2.0
    q: float = 2.0
    p0: float = 1.0
    q0: float = 1.0
    eps: float = 1.0
    delta: float = 0.25
    grid_size: int = 1024
    period: float = 16.0
    index_range: list = field(default_factory=lambda: [-4, 4])
    lambda_minus: float | None = None
    lambda_plus: float | None = None
    spectral_margin: float = 0.05
    base_cell: dict | None = None
    low_cell: dict | None = None
    probe_grid: int | None = None
    annular: PrototypeConfig = field(default_factory=PrototypeConfig)
    lowpass: PrototypeConfig | None = None
    parseval: bool = False
    input: str | None = None
    certify: CertifyConfig = field(default_factory=CertifyConfig)
    roundtrip: RoundtripConfig = field(default_factory=RoundtripConfig)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("p", "q"):
            if math.isinf(out[key]):
                out[key] = "inf"
        return out


def _number(path: str, v, allow_inf: bool = False) -> float:
    if allow_inf and v == "inf":
        return math.inf
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigInvalid(path, f"expected a number, got {v!r}")
    return float(v)


def _integer(path: str, v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigInvalid(path, f"expected an integer, got {v!r}")
    return v


def _fill(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigInvalid(path or "config", "expected an object")
    names = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigInvalid(f"{path}{key}", "unknown key")
    obj = cls()
    for key, value in data.items():
        setattr(obj, key, value)
    return obj


def parse_config(data: dict) -> RunConfig:
    """Build a :class:`RunConfig` from a JSON object and check every field.

    Raises
    ------
    ConfigInvalid
        Naming the offending field, for unknown keys or invalid values.
    """
    cfg = _fill(RunConfig, data, "")
    cfg.annular = _fill(PrototypeConfig, cfg.annular, "annular.") if not isinstance(cfg.annular, PrototypeConfig) else cfg.annular
    if cfg.lowpass is not None and not isinstance(cfg.lowpass, PrototypeConfig):
        cfg.lowpass = _fill(PrototypeConfig, cfg.lowpass, "lowpass.")
    if not isinstance(cfg.certify, CertifyConfig):
        cfg.certify = _fill(CertifyConfig, cfg.certify, "certify.")
    if not isinstance(cfg.roundtrip, RoundtripConfig):
        cfg.roundtrip = _fill(RoundtripConfig, cfg.roundtrip, "roundtrip.")
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    m = cfg.matrix
    if isinstance(m, (int, float)) and not isinstance(m, bool):
        cfg.matrix = m = [[float(m)]]
    if not isinstance(m, list) or not m or not all(isinstance(r, list) and len(r) == len(m) for r in m):
        raise ConfigInvalid("matrix", "expected a square list of rows")
    cfg.matrix = [[_number("matrix", v) for v in row] for row in m]
    if cfg.kind not in ("homogeneous", "inhomogeneous"):
        raise ConfigInvalid("kind", "expected 'homogeneous' or 'inhomogeneous'")
    for key in ("s", "p0", "q0", "eps", "delta", "period", "spectral_margin"):
        setattr(cfg, key, _number(key, getattr(cfg, key)))
    for key in ("p", "q"):
        setattr(cfg, key, _number(key, getattr(cfg, key), allow_inf=True))
    if not cfg.delta > 0:
        raise ConfigInvalid("delta", f"must be positive, got {cfg.delta}")
    if not cfg.period > 0:
        raise ConfigInvalid("period", "must be positive")
    n = _integer("grid_size", cfg.grid_size)
    if n < 2 or n & (n - 1):
        raise ConfigInvalid("grid_size", "must be a power of two")
    if not cfg.p > 0 or not cfg.q > 0:
        raise ConfigInvalid("p" if not cfg.p > 0 else "q", "must be positive")
    r = cfg.index_range
    if not isinstance(r, list) or len(r) != 2:
        raise ConfigInvalid("index_range", "expected [low, high]")
    lo, hi = _integer("index_range", r[0]), _integer("index_range", r[1])
    if lo > hi:
        raise ConfigInvalid("index_range", "low exceeds high")
    if cfg.kind == "inhomogeneous" and lo < 0:
        raise ConfigInvalid("index_range", "inhomogeneous indices start at 0")
    for key in ("lambda_minus", "lambda_plus"):
        if getattr(cfg, key) is not None:
            setattr(cfg, key, _number(key, getattr(cfg, key)))
    for key in ("base_cell", "low_cell"):
        cell = getattr(cfg, key)
        if cell is None:
            continue
        if not isinstance(cell, dict):
            raise ConfigInvalid(key, "expected an object")
        for k in cell:
            if k not in CELL_KEYS:
                raise ConfigInvalid(f"{key}.{k}", "unknown key")
    if cfg.probe_grid is not None and _integer("probe_grid", cfg.probe_grid) < 2:
        raise ConfigInvalid("probe_grid", "must be at least 2")
    if not isinstance(cfg.parseval, bool):
        raise ConfigInvalid("parseval", "expected true or false")
    if cfg.parseval and cfg.kind != "homogeneous":
        raise ConfigInvalid("parseval", "Parseval mode needs a homogeneous system")
    _check_prototype("annular", cfg.annular)
    if cfg.lowpass is not None:
        _check_prototype("lowpass", cfg.lowpass)
    elif cfg.kind == "inhomogeneous":
        cfg.lowpass = PrototypeConfig(family="gauss-lowpass", order=0)
    c = cfg.certify
    if not isinstance(c.roles, list) or not c.roles or any(x not in ("frame", "atoms") for x in c.roles):
        raise ConfigInvalid("certify.roles", "expected a non-empty list of 'frame' and 'atoms'")
    if c.convention not in ("stated", "derived"):
        raise ConfigInvalid("certify.convention", "expected 'stated' or 'derived'")
    if _integer("certify.truncation", c.truncation) < 8:
        raise ConfigInvalid("certify.truncation", "must be at least 8")
    if _integer("certify.grid", c.grid) < 16:
        raise ConfigInvalid("certify.grid", "must be at least 16")
    c.margin = _number("certify.margin", c.margin)
    if not c.margin > 0:
        raise ConfigInvalid("certify.margin", "must be positive")
    if c.vanishing_cap is not None:
        c.vanishing_cap = _number("certify.vanishing_cap", c.vanishing_cap)
    if c.master_constant is not None:
        c.master_constant = _number("certify.master_constant", c.master_constant)
        if not c.master_constant > 0:
            raise ConfigInvalid("certify.master_constant", "must be positive")
    if c.pairs is not None:
        if not isinstance(c.pairs, list) or not all(isinstance(x, list) and len(x) == 2 for x in c.pairs):
            raise ConfigInvalid("certify.pairs", "expected a list of [i, j] pairs")
        c.pairs = [[_integer("certify.pairs", a), _integer("certify.pairs", b)] for a, b in c.pairs]
    rt = cfg.roundtrip
    if not isinstance(rt.deltas, list) or not rt.deltas:
        raise ConfigInvalid("roundtrip.deltas", "expected a non-empty list")
    rt.deltas = [_number("roundtrip.deltas", d) for d in rt.deltas]
    if any(not d > 0 for d in rt.deltas):
        raise ConfigInvalid("roundtrip.deltas", "every delta must be positive")
    if _integer("roundtrip.trials", rt.trials) < 0:
        raise ConfigInvalid("roundtrip.trials", "must be non-negative")
    _integer("roundtrip.seed", rt.seed)


def _check_prototype(path: str, p: PrototypeConfig) -> None:
    if p.family not in ("annular-hermite-gauss", "gauss-lowpass", "user-sampled"):
        raise ConfigInvalid(f"{path}.family", f"unknown family {p.family!r}")
    _integer(f"{path}.order", p.order)
    p.width = _number(f"{path}.width", p.width)
    if not p.width > 0:
        raise ConfigInvalid(f"{path}.width", "must be positive")


def load_config(path) -> RunConfig:
    """Read and validate a JSON configuration file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputUnreadable(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid("config", f"not valid JSON: {exc}") from exc
    return parse_config(data)


__all__ = ["RunConfig", "PrototypeConfig", "CertifyConfig", "RoundtripConfig", "parse_config",
           "load_config", "validate"]
