"""Named test densities used by the experiments and the CLI."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operator import Density

RHO1_COEFFICIENTS = (1.0, 0.3, 0.2, 0.15, -0.1, -0.05, 0.02)


@dataclass(frozen=True)
class PiecewiseConstant:
    """Step density; at a jump the left limit is used."""

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) != len(self.breakpoints) + 1:
            raise ValueError("need one more value than breakpoints")
        if any(not 0.0 < b < 1.0 for b in self.breakpoints) or \
                any(b >= c for b, c in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must be increasing and inside (0, 1)")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        # side="left": x equal to a breakpoint falls in the piece to its left
        out = np.asarray(self.values)[np.searchsorted(self.breakpoints, x, side="left")]
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Smooth:
    name: str
    func: object
    breakpoints: tuple = ()

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Constant:
    c: float
    breakpoints: tuple = ()

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, self.c)
        return float(out) if out.ndim == 0 else out


def rho1() -> Density:
    return Density.cosine(RHO1_COEFFICIENTS)


def rho2() -> Smooth:
    return Smooth("rho2", lambda x: 1.0 + (x - 0.5) ** 2)


def rho3() -> Smooth:
    return Smooth("rho3", lambda x: 1.0 - 0.3 * np.exp(-20.0 * (x - 0.5) ** 2))


def rho4() -> PiecewiseConstant:
    return PiecewiseConstant((0.3, 0.7), (1.0, 1.1, 1.0))


PRESETS = {"rho1": rho1, "rho2": rho2, "rho3": rho3, "rho4": rho4}


def get_preset(name: str):
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown density preset {name!r}; choose from {sorted(PRESETS)}") from None
