"""Synthetic spectral data for -u'' = lambda rho u via Chebyshev collocation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ComplexSpectrum, NoiseDestroyedOrdering, NonPositiveDensity
from .operator import DIRICHLET, BoundaryCondition

REALITY_TOL = 1e-8


@dataclass(frozen=True)
class CollocationConfig:
    P: int = 200
    bc: BoundaryCondition = DIRICHLET
    reliable_fraction: float = 0.4

    def __post_init__(self):
        if self.P < 4:
            raise ValueError("collocation needs P >= 4")
        if not 0.0 < self.reliable_fraction <= 1.0:
            raise ValueError("reliable_fraction must lie in (0, 1]")
        object.__setattr__(self, "bc", BoundaryCondition.parse(self.bc))

    @property
    def reliable_count(self) -> int:
        return math.floor(self.reliable_fraction * (self.P - 1))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ordered eigenvalues of the string problem plus where they came from.

    ``provenance`` is one of ``"analytic"``, ``"collocation"``, ``"noisy"`` or
    ``"file"``; noisy spectra also record ``sigma`` and ``seed``.
    """

    lambdas: np.ndarray
    provenance: str
    reliable_count: int
    bc: BoundaryCondition = DIRICHLET
    sigma: float | None = None
    seed: int | None = None

    def __post_init__(self):
        lam = np.array(self.lambdas, dtype=float).ravel()
        if lam.size == 0 or not np.all(lam > 0):
            raise ValueError("eigenvalues must be positive")
        if np.any(np.diff(lam) <= 0):
            raise ValueError("eigenvalues must be strictly increasing")
        if not 0 <= self.reliable_count <= lam.size:
            raise ValueError("reliable_count exceeds the number of eigenvalues")
        lam.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "bc", BoundaryCondition.parse(self.bc))

    def __len__(self):
        return self.lambdas.size

    @property
    def reliable(self) -> np.ndarray:
        return self.lambdas[: self.reliable_count]


def cheb_grid_and_diff(P: int):
    """Chebyshev points x_j = cos(j pi / P) and the collocation derivative matrix."""
    if P < 1:
        raise ValueError("P must be >= 1")
    j = np.arange(P + 1)
    x = np.cos(np.pi * j / P)
    c = np.ones(P + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    dX = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dX + np.eye(P + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def _operator_matrix(rho: Callable, cfg: CollocationConfig):
    """Reduced collocation matrix of -d^2/dx^2 on [0, 1] and the nodes it acts on."""
    xi, D = cheb_grid_and_diff(cfg.P)
    x = 0.5 * (xi + 1.0)  # xi = 1 -> x = 1 (index 0), xi = -1 -> x = 0 (index P)
    D1 = 2.0 * D
    D2 = D1 @ D1
    if cfg.bc is DIRICHLET:
        return -D2[1:-1, 1:-1], x[1:-1]
    # u(0) = 0: drop index P.  u'(1) = 0: row 0 eliminates u_0.
    elim = -D1[0, 1:-1] / D1[0, 0]
    L = D2[1:-1, 1:-1] + np.outer(D2[1:-1, 0], elim)
    return -L, x[1:-1]


def solve_forward(rho: Callable, cfg: CollocationConfig = CollocationConfig()) -> Spectrum:
    """Eigenvalues of -u'' = lambda rho u by Chebyshev collocation.

    ``rho`` is any vectorised callable on [0, 1] (a :class:`Density`, a preset,
    ...).  All eigenvalues that pass the reality filter are returned; the
    leading ``cfg.reliable_count`` of them are flagged reliable.
    """
    A, nodes = _operator_matrix(rho, cfg)
    r = np.broadcast_to(np.asarray(rho(nodes), dtype=float), nodes.shape)
    if not np.all(np.isfinite(r)) or np.any(r <= 0):
        raise NonPositiveDensity("density must be positive at every collocation node")
    ev = np.linalg.eigvals(A / r[:, None])
    ev = ev[np.argsort(ev.real)]
    is_real = np.abs(ev.imag) <= REALITY_TOL * np.abs(ev)
    n_rel = cfg.reliable_count
    if not np.all(is_real[:n_rel]):
        bad = int(np.argmin(is_real[:n_rel]))
        raise ComplexSpectrum(f"eigenvalue #{bad + 1} ({ev[bad]:.6g}) is not real")
    lam = ev.real[is_real & (ev.real > 0)]
    lam = np.unique(lam)
    return Spectrum(lam, "collocation", min(n_rel, lam.size), cfg.bc)


def analytic_spectrum(c: float, K: int, bc: BoundaryCondition = DIRICHLET) -> Spectrum:
    """Exact spectrum mu_k / c of the constant density rho = c."""
    if c <= 0 or K < 1:
        raise ValueError("need c > 0 and K >= 1")
    bc = BoundaryCondition.parse(bc)
    lam = bc.mu(np.arange(1, K + 1)) / c
    return Spectrum(lam, "analytic", K, bc)


def add_noise(s: Spectrum, sigma: float, seed: int) -> Spectrum:
    """Add i.i.d. N(0, sigma^2) perturbations from ``numpy.random.default_rng(seed)``."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return s
    rng = np.random.default_rng(seed)
    lam = np.sort(s.lambdas + rng.normal(0.0, sigma, s.lambdas.size))
    if lam[0] <= 0:
        raise NoiseDestroyedOrdering(f"noise pushed an eigenvalue to {lam[0]:.4g}")
    return Spectrum(lam, "noisy", s.reliable_count, s.bc, sigma=float(sigma), seed=int(seed))
