"""Gauss-Newton inversion of the Chebyshev trace map and multistep scheduling."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DimensionMismatch,
    DivergedResidual,
    NonPositiveGuess,
    PositivityWarning,
    SpectralRadiusExceeded,
    ZeroJacobian,
)
from .forward import Spectrum, analytic_spectrum
from .operator import (
    DIRICHLET,
    BoundaryCondition,
    CustomBasis,
    Density,
    FourierCosine,
    assemble_basis_matrices,
    quad,
)
from .traces import (
    TraceTargets,
    choose_scale,
    compute_trace_targets,
    model_traces_and_jacobian,
)

log = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 1e6
POSITIVITY_GRID = 1024


@dataclass(frozen=True)
class InversionConfig:
    """Parameters of one Gauss-Newton run.

    K eigenvalues are used as data, M basis functions, J x J model matrices,
    Chebyshev degrees up to N and K1 - K asymptotic tail eigenvalues.
    """

    K: int
    M: int
    J: int
    N: int
    K1: int | None = None
    theta: float = 0.95
    max_iter: int = 100
    tol_factor: float = 1e-5
    svd_rel_cutoff: float = 1e-12
    line_search_max_halvings: int = 10
    cheb_indices: tuple | None = None
    bc: BoundaryCondition = DIRICHLET
    basis: FourierCosine | CustomBasis | None = None
    backtracking: bool = True

    def __post_init__(self):
        if self.K1 is None:
            object.__setattr__(self, "K1", self.J)
        object.__setattr__(self, "bc", BoundaryCondition.parse(self.bc))
        if self.cheb_indices is not None:
            object.__setattr__(self, "cheb_indices", tuple(int(i) for i in self.cheb_indices))
        if min(self.K, self.M, self.J, self.N) < 1:
            raise ValueError("K, M, J and N must all be >= 1")
        if self.J < self.K:
            raise ValueError(f"J={self.J} must be >= K={self.K}")
        if self.K1 < self.K:
            raise ValueError(f"K1={self.K1} must be >= K={self.K}")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if self.basis is not None and self.basis.M != self.M:
            raise DimensionMismatch(f"basis has {self.basis.M} functions but M={self.M}")
        if self.M > self.K:
            log.warning("M=%d exceeds the number of eigenvalues K=%d", self.M, self.K)

    @property
    def basis_spec(self):
        return FourierCosine(self.M) if self.basis is None else self.basis

    @property
    def tolerance(self) -> float:
        return self.tol_factor * self.N


@dataclass
class ReconstructionResult:
    density: Density
    residual_history: list
    final_residual: np.ndarray
    iterations: int
    converged: bool
    stop_reason: str
    t: float
    L_tilde: float
    stage_log: list = field(default_factory=list)

    @property
    def final_residual_norm(self) -> float:
        return float(self.residual_history[-1])

    def summary(self) -> dict:
        return {
            "M": int(self.density.a.size),
            "iterations": self.iterations,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "initial_residual_norm": float(self.residual_history[0]),
            "final_residual_norm": self.final_residual_norm,
            "coefficients": [float(v) for v in self.density.a],
        }


def _diag_kernel_moment(basis, bc: BoundaryCondition) -> float:
    """int_0^1 g(x, x) psi_1(x) dx."""
    return float(quad(lambda x: bc.kernel(x, x) * basis.evaluate(x)[0], basis.breakpoints))


def default_initial_guess(targets: TraceTargets, basis=None) -> Density:
    """Constant-density guess matching the first trace identity.

    With rho = a_1 psi_1 the identity sum 1/lambda_k = int g(x, x) rho dx gives
    a_1 = tau1 / int g(x, x) psi_1 dx (= 6 tau1 for Dirichlet and psi_1 = 1),
    where tau1 sums the K measured and K1 - K surrogate reciprocals.
    """
    basis = FourierCosine(1) if basis is None else basis
    a1 = targets.tau1 / _diag_kernel_moment(basis, targets.bc)
    if not a1 > 0:
        raise NonPositiveGuess(f"trace-based guess a_1 = {a1:.4g} is not positive")
    a = np.zeros(basis.M)
    a[0] = a1
    return Density(basis, a)


def gauss_newton_step(jac, residual, svd_rel_cutoff: float = 1e-12) -> np.ndarray:
    """Minimum-norm least-squares solution of jac @ delta = residual by truncated SVD."""
    jac = np.atleast_2d(np.asarray(jac, dtype=float))
    residual = np.asarray(residual, dtype=float).ravel()
    if jac.shape[0] != residual.size:
        raise DimensionMismatch(f"Jacobian has {jac.shape[0]} rows, residual {residual.size}")
    U, s, Vt = np.linalg.svd(jac, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise ZeroJacobian("Jacobian is identically zero")
    keep = s > svd_rel_cutoff * s[0]
    coef = (U[:, keep].T @ residual) / s[keep]
    return Vt[keep].T @ coef


def _as_stage_density(a0: Density, cfg: InversionConfig) -> Density:
    a = np.zeros(cfg.M)
    n = min(cfg.M, a0.a.size)
    a[:n] = a0.a[:n]
    return Density(cfg.basis_spec, a)


def invert(cfg: InversionConfig, targets: TraceTargets, a0: Density,
           basis_mats=None) -> ReconstructionResult:
    """Gauss-Newton on || r_true - r(a) ||_2 starting from ``a0``.

    With ``cfg.backtracking`` a step is accepted only if it strictly lowers
    the residual norm; it is halved up to ``line_search_max_halvings`` times.
    """
    if a0.a.size != cfg.M:
        raise DimensionMismatch(f"initial guess has {a0.a.size} coefficients, M={cfg.M}")
    if targets.N != cfg.N or targets.K != cfg.K or targets.K1 != cfg.K1:
        raise ValueError("trace targets were built for a different configuration")
    if basis_mats is None:
        basis_mats = assemble_basis_matrices(cfg.basis_spec, cfg.J, cfg.bc)
    B = np.stack([b.entries for b in basis_mats]) if isinstance(basis_mats, list) else basis_mats
    idx = targets.cheb_indices
    t = targets.t

    def evaluate(a):
        r, jac = model_traces_and_jacobian(a, B, cfg.N, t, idx)
        res = targets.r_true - r
        return res, jac, float(np.linalg.norm(res))

    a = np.array(a0.a, dtype=float)
    res, jac, nrm = evaluate(a)
    history = [nrm]
    initial = nrm
    iterations = 0
    stop_reason = "max_iter"
    while True:
        if nrm <= cfg.tolerance:
            stop_reason = "tolerance"
            break
        if iterations >= cfg.max_iter:
            break
        delta = gauss_newton_step(jac, res, cfg.svd_rel_cutoff)
        if cfg.backtracking:
            accepted = None
            for _ in range(cfg.line_search_max_halvings + 1):
                try:
                    trial = evaluate(a + delta)
                except SpectralRadiusExceeded:
                    trial = None
                if trial is not None and trial[2] < nrm:
                    accepted = trial
                    break
                delta = 0.5 * delta
            if accepted is None:
                stop_reason = "line_search_failed"
                break
        else:
            try:
                accepted = evaluate(a + delta)
            except SpectralRadiusExceeded as exc:
                raise DivergedResidual(f"iterate left the Chebyshev range: {exc}") from exc
        a = a + delta
        res, jac, nrm = accepted
        if not np.isfinite(nrm) or nrm > DIVERGENCE_FACTOR * max(initial, 1e-300):
            raise DivergedResidual(f"residual grew from {initial:.3e} to {nrm:.3e}")
        iterations += 1
        history.append(nrm)
        log.debug("iteration %d: residual %.6e", iterations, nrm)

    density = Density(cfg.basis_spec, a)
    if not density.is_positive(POSITIVITY_GRID):
        warnings.warn("reconstructed density is not positive on the check grid",
                      PositivityWarning, stacklevel=2)
    return ReconstructionResult(
        density=density,
        residual_history=history,
        final_residual=res,
        iterations=iterations,
        converged=stop_reason == "tolerance",
        stop_reason=stop_reason,
        t=t,
        L_tilde=targets.L_tilde,
    )


def default_schedule(cfg: InversionConfig, ramp: float = 3.0) -> list[InversionConfig]:
    """Coarse-to-fine stages ending exactly at ``cfg``.

    The basis grows M = 3, 6, 12, ... (K in proportion) with a low degree
    N = max(20, 2 K^2); once M reaches its target, N is raised by ``ramp``
    per stage until it comes within 25% of ``cfg.N``.
    """
    stages = []
    m = min(3, cfg.M)
    while True:
        k = min(max(m, round(m * cfg.K / cfg.M)), cfg.K)
        n = min(cfg.N, max(20, 2 * k * k))
        stages.append((k, m, n))
        if m == cfg.M:
            break
        m = min(2 * m, cfg.M)
    while stages[-1][2] < cfg.N:
        k, m, n = stages[-1]
        n = int(n * ramp)
        stages.append((k, m, cfg.N if 1.25 * n >= cfg.N else n))
    out = []
    for k, m, n in stages[:-1]:
        idx = None
        if cfg.cheb_indices is not None:
            sub = tuple(i for i in cfg.cheb_indices if i <= n)
            idx = sub if len(sub) >= m else None
        basis = None if cfg.basis is None else cfg.basis.with_size(m)
        out.append(replace(cfg, K=k, M=m, N=n, cheb_indices=idx, basis=basis))
    out.append(cfg)
    return out


def multistep(schedule, spectrum: Spectrum, a0: Density | None = None,
              t: float | None = None) -> ReconstructionResult:
    """Run ``invert`` stage by stage, each stage seeded by the previous result.

    The scale ``t`` is fixed once (from the data and the first stage's theta)
    and trace targets are rebuilt for every stage.  Coefficient vectors are
    zero-padded when M grows.
    """
    schedule = list(schedule)
    if not schedule:
        raise ValueError("empty schedule")
    if any(b.M < a.M for a, b in zip(schedule, schedule[1:])):
        raise ValueError("stages must have non-decreasing M")
    if any(cfg.bc is not spectrum.bc for cfg in schedule):
        raise ValueError("boundary condition of the schedule differs from the spectrum")
    t = choose_scale(spectrum, schedule[0].theta) if t is None else t
    stage_log = []
    density = a0
    result = None
    for number, cfg in enumerate(schedule, start=1):
        targets = compute_trace_targets(spectrum, cfg.N, cfg.K, cfg.K1, t, cfg.cheb_indices)
        if density is None:
            density = default_initial_guess(targets, cfg.basis_spec.with_size(1))
        density = _as_stage_density(density, cfg)
        result = invert(cfg, targets, density)
        entry = {"stage": number, "K": cfg.K, "M": cfg.M, "J": cfg.J, "N": cfg.N,
                 "K1": cfg.K1, "L_tilde": targets.L_tilde}
        entry.update(result.summary())
        stage_log.append(entry)
        log.info("stage %d (K=%d M=%d J=%d N=%d): %d iterations, residual %.3e, %s",
                 number, cfg.K, cfg.M, cfg.J, cfg.N, result.iterations,
                 result.final_residual_norm, result.stop_reason)
        density = result.density
    result.stage_log = stage_log
    return result


def reconstruct(cfg: InversionConfig, spectrum: Spectrum, schedule: str = "auto",
                a0: Density | None = None) -> ReconstructionResult:
    """Convenience wrapper: ``multistep`` with ``default_schedule`` or a single stage."""
    if schedule == "auto":
        stages = default_schedule(cfg)
    elif schedule == "single":
        stages = [cfg]
    else:
        raise ValueError(f"unknown schedule {schedule!r}")
    return multistep(stages, spectrum, a0)


def condition_study(M_max: int, N: int = 1000, J: int = 21, theta: float = 0.95,
                    bc: BoundaryCondition = DIRICHLET):
    """[(M, sigma_max / sigma_min)] of the trace Jacobian at rho = 1, M = 1..M_max.

    The scale is chosen from the exact spectrum of rho = 1.  At a = e_1 the
    first M Jacobian columns do not depend on the total basis size, so one
    M_max-column Jacobian serves every M.
    """
    bc = BoundaryCondition.parse(bc)
    t = choose_scale(analytic_spectrum(1.0, 1, bc), theta)
    mats = assemble_basis_matrices(FourierCosine(M_max), J, bc)
    a = np.zeros(M_max)
    a[0] = 1.0
    _, jac = model_traces_and_jacobian(a, mats, N, t)
    rows = []
    for M in range(1, M_max + 1):
        s = np.linalg.svd(jac[:, :M], compute_uv=False)
        rows.append((M, float(s[0] / s[-1])))
    return rows


def loglog_slope(rows, M_min: int = 2) -> float:
    """Least-squares slope of log(cond) against log(M) for M >= M_min."""
    M = np.array([r[0] for r in rows if r[0] >= M_min], dtype=float)
    c = np.array([r[1] for r in rows if r[0] >= M_min], dtype=float)
    return float(np.polyfit(np.log(M), np.log(c), 1)[0])
