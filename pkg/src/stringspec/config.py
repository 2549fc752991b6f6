"""Experiment configuration files.

Flat INI-style text: an ``[experiment]`` section plus optional ``[stage.1]``,
``[stage.2]``, ... sections for an explicit multistep schedule.  Keys are case
insensitive.  See README for the full key list.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .forward import CollocationConfig
from .inversion import InversionConfig
from .operator import BoundaryCondition, Density
from .presets import PRESETS, Constant, PiecewiseConstant

# config key -> InversionConfig field
STAGE_KEYS = {
    "k": "K", "m": "M", "j": "J", "n": "N", "k1": "K1", "theta": "theta",
    "max_iter": "max_iter", "tol_factor": "tol_factor", "svd_rel_cutoff": "svd_rel_cutoff",
    "line_search_max_halvings": "line_search_max_halvings", "cheb_indices": "cheb_indices",
    "backtracking": "backtracking",
}
EXPERIMENT_KEYS = set(STAGE_KEYS) | {
    "density", "constant", "coefficients", "breakpoints", "values", "bc", "data", "p",
    "reliable_fraction", "schedule", "sigma", "seeds", "m_max", "cond_n", "cond_j",
    "eigenvalue_check", "spectrum", "out", "workers",
}
INT_KEYS = {"k", "m", "j", "n", "k1", "max_iter", "line_search_max_halvings", "p", "m_max",
            "cond_n", "cond_j", "workers"}
FLOAT_KEYS = {"theta", "tol_factor", "svd_rel_cutoff", "constant", "reliable_fraction"}
BOOL_KEYS = {"backtracking", "eigenvalue_check"}


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def parse_indices(text: str) -> tuple:
    """``"1,16,31"`` or a range ``"1:300:15"`` (start:stop:step, stop inclusive)."""
    text = text.strip()
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        start, stop = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1
        return tuple(range(start, stop + 1, step))
    return tuple(int(v) for v in text.split(",") if v.strip())


def _convert(key: str, raw: str):
    try:
        if key in INT_KEYS:
            return int(raw)
        if key in FLOAT_KEYS:
            return float(raw)
        if key in BOOL_KEYS:
            low = raw.strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(raw)
            return low in ("1", "true", "yes", "on")
        if key in ("coefficients", "breakpoints", "values", "sigma"):
            return _floats(raw)
        if key == "seeds":
            return [int(v) for v in raw.split(",") if v.strip()]
        if key == "cheb_indices":
            return parse_indices(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"invalid value {raw!r} for key '{key}'") from None


@dataclass
class ExperimentConfig:
    density: str | None = None
    constant: float = 1.0
    coefficients: list = field(default_factory=list)
    breakpoints: list = field(default_factory=list)
    values: list = field(default_factory=list)
    bc: str = "dirichlet"
    data: str = "collocation"
    p: int = 200
    reliable_fraction: float = 0.4
    k: int = 7
    m: int | None = None
    j: int = 15
    n: int = 300
    k1: int | None = None
    theta: float = 0.95
    max_iter: int = 100
    tol_factor: float = 1e-5
    svd_rel_cutoff: float = 1e-12
    line_search_max_halvings: int = 10
    cheb_indices: tuple | None = None
    backtracking: bool = True
    schedule: str = "auto"
    sigma: list = field(default_factory=lambda: [0.0])
    seeds: list = field(default_factory=lambda: [0])
    m_max: int = 10
    cond_n: int = 1000
    cond_j: int = 21
    eigenvalue_check: bool = False
    spectrum: str | None = None
    out: str = "out"
    workers: int = 1
    stages: list = field(default_factory=list)  # list of dicts of STAGE_KEYS overrides

    # -- derived objects ---------------------------------------------------------
    @property
    def boundary(self) -> BoundaryCondition:
        return BoundaryCondition.parse(self.bc)

    def collocation(self) -> CollocationConfig:
        return CollocationConfig(self.p, self.boundary, self.reliable_fraction)

    def has_truth(self) -> bool:
        return self.density is not None

    def true_density(self):
        """The configured density as a vectorised callable (with ``breakpoints``)."""
        kind = self.density
        if kind is None:
            raise ConfigError("no density defined (key 'density')")
        if kind in PRESETS:
            return PRESETS[kind]()
        if kind == "constant":
            return Constant(self.constant)
        if kind == "coefficients":
            if not self.coefficients:
                raise ConfigError("density = coefficients needs key 'coefficients'")
            return Density.cosine(self.coefficients)
        if kind == "piecewise":
            return PiecewiseConstant(tuple(self.breakpoints), tuple(self.values))
        raise ConfigError(f"unknown density {kind!r} for key 'density'")

    def _stage_kwargs(self, overrides: dict) -> dict:
        base = {f: getattr(self, key) for key, f in STAGE_KEYS.items()}
        base["M"] = self.m if self.m is not None else self.k
        base.update({STAGE_KEYS[k]: v for k, v in overrides.items()})
        return base

    def inversion_config(self, **overrides) -> InversionConfig:
        kw = self._stage_kwargs({})
        kw.update(overrides)
        return InversionConfig(bc=self.boundary, **kw)

    def schedule_configs(self) -> list[InversionConfig] | None:
        """Explicit ``[stage.n]`` schedule, or None when the schedule is derived."""
        if not self.stages:
            return None
        return [InversionConfig(bc=self.boundary, **self._stage_kwargs(st)) for st in self.stages]

    def validate(self) -> None:
        if self.density is not None:
            self.true_density()
        if self.data not in ("collocation", "analytic"):
            raise ConfigError(f"invalid value {self.data!r} for key 'data'")
        if self.data == "analytic" and self.density != "constant":
            raise ConfigError("data = analytic requires density = constant (key 'data')")
        if self.schedule not in ("auto", "single"):
            raise ConfigError(f"invalid value {self.schedule!r} for key 'schedule'")
        try:
            self.boundary
            self.collocation()
            self.inversion_config()
            self.schedule_configs()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return config_from_parser(parser)


def loads_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    return config_from_parser(parser)


def config_from_parser(parser: configparser.ConfigParser) -> ExperimentConfig:
    values: dict = {}
    stages = []
    for section in parser.sections():
        if section == "experiment":
            for key, raw in parser.items(section):
                if key not in EXPERIMENT_KEYS:
                    raise ConfigError(f"unknown config key '{key}' in [experiment]")
                values[key] = _convert(key, raw)
        elif section.startswith("stage."):
            try:
                order = int(section.split(".", 1)[1])
            except ValueError:
                raise ConfigError(f"bad stage section name [{section}]") from None
            stage = {}
            for key, raw in parser.items(section):
                if key not in STAGE_KEYS:
                    raise ConfigError(f"unknown config key '{key}' in [{section}]")
                stage[key] = _convert(key, raw)
            stages.append((order, stage))
        else:
            raise ConfigError(f"unknown config section [{section}]")
    known = {f.name for f in fields(ExperimentConfig)}
    cfg = ExperimentConfig(**{k: v for k, v in values.items() if k in known})
    cfg = replace(cfg, stages=[st for _, st in sorted(stages, key=lambda s: s[0])])
    cfg.validate()
    return cfg


def grid(npts: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, npts)
