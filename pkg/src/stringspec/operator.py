"""Basis functions, Green kernels and the matrix representation of A∘M_rho.

The compact operator ``A∘M_rho`` (``A`` the inverse of the Laplacian with the
chosen boundary condition) is represented in the Laplacian eigenbasis
``phi_n`` by the matrix

    M_ij(rho) = (mu_i mu_j)^{-1/2} * int_0^1 phi_i phi_j rho dx.

For a density ``rho = sum_m a_m psi_m`` this is ``sum_m 2 a_m M(e_m)`` where the
stored basis matrices are

    M_ij(e_m) = (mu_i mu_j)^{-1/2} * int_0^1 (phi_i phi_j / 2) psi_m dx,

i.e. the factor 2 coming from the sqrt(2) normalisation of ``phi_n`` lives in
:func:`assemble_model_matrix` only.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, QuadratureNotConverged

GL_ORDER = 10
GL_PANELS = 64
QUAD_TOL = 1e-10


class BoundaryCondition(enum.Enum):
    DIRICHLET = "dirichlet"
    DIRICHLET_NEUMANN = "dirichlet-neumann"

    @classmethod
    def parse(cls, value: "str | BoundaryCondition") -> "BoundaryCondition":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"dirichlet": cls.DIRICHLET, "dd": cls.DIRICHLET,
                   "dirichlet-neumann": cls.DIRICHLET_NEUMANN, "dn": cls.DIRICHLET_NEUMANN,
                   "mixed": cls.DIRICHLET_NEUMANN}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown boundary condition {value!r}") from None

    def frequency(self, n):
        """sqrt(mu_n): the angular frequency of the n-th Laplacian eigenfunction."""
        n = np.asarray(n, dtype=float)
        if self is BoundaryCondition.DIRICHLET:
            return n * np.pi
        return (2.0 * n - 1.0) * np.pi / 2.0

    def mu(self, n):
        return self.frequency(n) ** 2

    def phi(self, n, x):
        return np.sqrt(2.0) * np.sin(self.frequency(n) * np.asarray(x, dtype=float))

    def kernel(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        lo, hi = np.minimum(x, y), np.maximum(x, y)
        if self is BoundaryCondition.DIRICHLET:
            return lo * (1.0 - hi)
        return lo


DIRICHLET = BoundaryCondition.DIRICHLET
DIRICHLET_NEUMANN = BoundaryCondition.DIRICHLET_NEUMANN


# -- quadrature ---------------------------------------------------------------

def _panel_rule(breakpoints: Sequence[float], panels: int, order: int = GL_ORDER):
    """Composite Gauss-Legendre nodes and weights on [0, 1].

    ``panels`` uniform panels are placed between each pair of consecutive
    breakpoints (0 and 1 are always included).
    """
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.concatenate(([0.0], np.asarray(breakpoints, dtype=float), [1.0]))
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        cuts = np.linspace(lo, hi, panels + 1)
        half = 0.5 * np.diff(cuts)
        mid = 0.5 * (cuts[:-1] + cuts[1:])
        xs.append((mid[:, None] + half[:, None] * t[None, :]).ravel())
        ws.append((half[:, None] * w[None, :]).ravel())
    return np.concatenate(xs), np.concatenate(ws)


def quad(f: Callable, breakpoints: Sequence[float] = (), panels: int = GL_PANELS,
         tol: float = QUAD_TOL):
    """Integrate ``f`` over [0, 1] with one refinement check.

    ``f`` takes a 1-D array of nodes and returns an array whose last axis runs
    over the nodes; the integral is taken along that axis.  Raises
    QuadratureNotConverged when the ``panels`` and ``2*panels`` results differ
    by more than ``tol`` in max norm.
    """
    x, w = _panel_rule(breakpoints, panels)
    coarse = np.asarray(f(x)) @ w
    x, w = _panel_rule(breakpoints, 2 * panels)
    fine = np.asarray(f(x)) @ w
    err = float(np.max(np.abs(fine - coarse)))
    if not np.isfinite(err) or err > tol:
        raise QuadratureNotConverged(f"panel refinement changed the integral by {err:.3e}")
    return fine


# -- bases and densities --------------------------------------------------------

def _check_breakpoints(bps) -> tuple:
    bps = tuple(float(b) for b in bps)
    if any(not 0.0 < b < 1.0 for b in bps):
        raise ValueError("breakpoints must lie strictly inside (0, 1)")
    if any(b >= c for b, c in zip(bps, bps[1:])):
        raise ValueError("breakpoints must be strictly increasing")
    return bps


@dataclass(frozen=True)
class FourierCosine:
    """psi_m(x) = cos(2 (m-1) pi x), m = 1..M."""

    M: int
    breakpoints: tuple = ()

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("basis size M must be >= 1")
        object.__setattr__(self, "breakpoints", _check_breakpoints(self.breakpoints))

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        m = np.arange(self.M).reshape((-1,) + (1,) * x.ndim)
        return np.cos(2.0 * m * np.pi * x)

    def with_size(self, M: int) -> "FourierCosine":
        return FourierCosine(M, self.breakpoints)


@dataclass(frozen=True)
class CustomBasis:
    """User supplied basis ``functions`` (vectorised callables on [0, 1])."""

    functions: tuple
    breakpoints: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        if not self.functions:
            raise ValueError("basis size M must be >= 1")
        object.__setattr__(self, "breakpoints", _check_breakpoints(self.breakpoints))

    @property
    def M(self) -> int:
        return len(self.functions)

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
                         for f in self.functions])

    def with_size(self, M: int) -> "CustomBasis":
        if M > self.M:
            raise DimensionMismatch(f"custom basis has only {self.M} functions, {M} requested")
        return CustomBasis(self.functions[:M], self.breakpoints)


BasisSpec = FourierCosine | CustomBasis


@dataclass(frozen=True, eq=False)
class Density:
    """rho(x) = sum_m a_m psi_m(x)."""

    basis: FourierCosine | CustomBasis
    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float).ravel()
        if a.size != self.basis.M:
            raise DimensionMismatch(f"{a.size} coefficients for a basis of size {self.basis.M}")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @classmethod
    def cosine(cls, coefficients) -> "Density":
        coefficients = np.atleast_1d(np.asarray(coefficients, dtype=float))
        return cls(FourierCosine(coefficients.size), coefficients)

    @property
    def breakpoints(self) -> tuple:
        return self.basis.breakpoints

    def __call__(self, x):
        return eval_density(self, x)

    def resized(self, M: int) -> "Density":
        """Zero-pad (or truncate) the coefficient vector to size M."""
        a = np.zeros(M)
        n = min(M, self.a.size)
        a[:n] = self.a[:n]
        return Density(self.basis.with_size(M), a)

    def is_positive(self, npts: int = 1024) -> bool:
        return bool(np.all(self(np.linspace(0.0, 1.0, npts)) > 0.0))


def eval_density(d: Density, x):
    values = np.tensordot(d.a, d.basis.evaluate(x), axes=1)
    return float(values) if np.ndim(values) == 0 else values


def green_kernel(x, y, bc: BoundaryCondition = DIRICHLET):
    g = bc.kernel(x, y)
    return float(g) if np.ndim(g) == 0 else g


def fourier_project(rho: Callable, M: int, breakpoints: Sequence[float] = ()) -> Density:
    """Cosine coefficients a_1 = int rho, a_m = 2 int rho cos(2(m-1) pi x)."""
    basis = FourierCosine(M)
    bps = _check_breakpoints(breakpoints)
    coeffs = quad(lambda x: basis.evaluate(x) * np.asarray(rho(x), dtype=float), bps)
    coeffs = np.array(coeffs, dtype=float)
    coeffs[1:] *= 2.0
    return Density(basis, coeffs)


# -- matrices -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BasisMatrix:
    m: int
    J: int
    entries: np.ndarray


@dataclass(frozen=True, eq=False)
class ModelMatrix:
    J: int
    entries: np.ndarray
    scale: float = 1.0


def _closed_form_cosine(m: int, J: int) -> np.ndarray:
    # int_0^1 sin(i pi x) sin(j pi x) cos(p pi x) dx with p = 2(m-1)
    i = np.arange(1, J + 1)[:, None]
    j = np.arange(1, J + 1)[None, :]
    if m == 1:
        core = np.where(i == j, 0.5, 0.0)
    else:
        p = 2 * (m - 1)
        core = 0.25 * ((i - j == p).astype(float) + (j - i == p) - (i + j == p))
    return core / (np.pi ** 2 * i * j)


def _quadrature_matrices(basis, J: int, bc: BoundaryCondition) -> np.ndarray:
    freq = bc.frequency(np.arange(1, J + 1))

    def integral(panels):
        x, w = _panel_rule(basis.breakpoints, panels)
        s = np.sin(freq[:, None] * x[None, :])  # phi_n / sqrt(2)
        return np.einsum("mx,ix,jx->mij", basis.evaluate(x) * w, s, s, optimize=True)

    coarse, fine = integral(GL_PANELS), integral(2 * GL_PANELS)
    err = float(np.max(np.abs(fine - coarse)))
    if not np.isfinite(err) or err > QUAD_TOL:
        raise QuadratureNotConverged(f"panel refinement changed M(e_m) by {err:.3e}")
    return fine / np.outer(freq, freq)[None, :, :]


def _use_closed_form(basis, bc: BoundaryCondition, method: str) -> bool:
    if method not in ("auto", "closed", "quadrature"):
        raise ValueError(f"unknown assembly method {method!r}")
    closed_ok = isinstance(basis, FourierCosine) and bc is DIRICHLET
    if method == "closed" and not closed_ok:
        raise ValueError("closed form is only available for Dirichlet + Fourier cosine")
    return method == "closed" or (method == "auto" and closed_ok)


def assemble_basis_matrix(m: int, J: int, basis, bc: BoundaryCondition = DIRICHLET,
                          method: str = "auto") -> BasisMatrix:
    """Matrix M(e_m) of size J x J (1-based basis index ``m``).

    ``method`` is ``"closed"`` (Dirichlet + cosine only), ``"quadrature"`` or
    ``"auto"`` (closed form whenever available).
    """
    bc = BoundaryCondition.parse(bc)
    if not 1 <= m <= basis.M:
        raise ValueError(f"basis index {m} outside 1..{basis.M}")
    if J < 1:
        raise ValueError("truncation size J must be >= 1")
    if _use_closed_form(basis, bc, method):
        entries = _closed_form_cosine(m, J)
    else:
        single = basis.with_size(m) if isinstance(basis, FourierCosine) else \
            CustomBasis((basis.functions[m - 1],), basis.breakpoints)
        entries = _quadrature_matrices(single, J, bc)[-1]
    entries = 0.5 * (entries + entries.T)
    return BasisMatrix(m, J, entries)


def assemble_basis_matrices(basis, J: int, bc: BoundaryCondition = DIRICHLET,
                            method: str = "auto") -> list[BasisMatrix]:
    """All M(e_m), m = 1..basis.M, sharing one quadrature pass when needed."""
    bc = BoundaryCondition.parse(bc)
    if J < 1:
        raise ValueError("truncation size J must be >= 1")
    if _use_closed_form(basis, bc, method):
        stack = [_closed_form_cosine(m, J) for m in range(1, basis.M + 1)]
    else:
        stack = list(_quadrature_matrices(basis, J, bc))
    return [BasisMatrix(m, J, 0.5 * (e + e.T)) for m, e in enumerate(stack, start=1)]


def stack_entries(basis_mats) -> np.ndarray:
    """(M, J, J) array from a list of BasisMatrix (or pass an array through)."""
    if isinstance(basis_mats, np.ndarray):
        return basis_mats
    Js = {b.J for b in basis_mats}
    if len(Js) > 1:
        raise DimensionMismatch(f"basis matrices of different sizes {sorted(Js)}")
    return np.stack([b.entries for b in basis_mats])


def assemble_model_matrix(a, basis_mats, scale: float = 1.0) -> ModelMatrix:
    a = np.asarray(a, dtype=float).ravel()
    stack = stack_entries(basis_mats)
    if a.size != stack.shape[0]:
        raise DimensionMismatch(f"{a.size} coefficients for {stack.shape[0]} basis matrices")
    return ModelMatrix(stack.shape[1], np.tensordot(2.0 * a, stack, axes=1), scale)
