"""Chebyshev trace targets from spectra and model traces with their Jacobian.

The polynomials are T~_n(x) = x T_{n-1}(2x - 1) (shifted Chebyshev times x),
generated only through the three-term recurrence

    T~_1 = x,  T~_2 = 2x^2 - x,  T~_{n+1} = (4x - 2) T~_n - T~_{n-1}.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ScaleTooLarge, SpectralRadiusExceeded
from .forward import Spectrum
from .operator import DIRICHLET, BoundaryCondition, stack_entries

RADIUS_BOUND = 1.5


def _resolve_indices(N: int, cheb_indices) -> np.ndarray:
    if N < 1:
        raise ValueError("N must be >= 1")
    if cheb_indices is None:
        return np.arange(1, N + 1)
    idx = np.asarray(sorted(set(int(i) for i in cheb_indices)))
    if idx.size == 0 or idx[0] < 1 or idx[-1] > N:
        raise ValueError(f"Chebyshev degrees must lie in 1..{N}")
    return idx


def scaled_cheb_scalar(x, N: int, cheb_indices=None) -> np.ndarray:
    """T~_n(x) for the requested degrees; shape ``(len(degrees),) + shape(x)``."""
    idx = _resolve_indices(N, cheb_indices)
    x = np.asarray(x, dtype=float)
    out = np.empty((idx[-1],) + x.shape)
    out[0] = x
    if idx[-1] > 1:
        out[1] = 2.0 * x * x - x
    y = 4.0 * x - 2.0
    for n in range(2, idx[-1]):
        out[n] = y * out[n - 1] - out[n - 2]
    return out[idx - 1]


def choose_scale(s: Spectrum, theta: float = 0.95) -> float:
    """t = theta * lambda_1, so the largest scaled reciprocal eigenvalue is theta."""
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    return float(theta * s.lambdas[0])


def estimate_L(s: Spectrum, K: int | None = None) -> float:
    """Asymptotic constant L~ from lambda_k ~ mu_k / L^2.

    Averages sqrt(mu_k / lambda_k) over the last min(3, K) of the first ``K``
    reliable eigenvalues (default: all reliable ones).
    """
    K = s.reliable_count if K is None else K
    if not 1 <= K <= s.reliable_count:
        raise ValueError(f"K={K} outside 1..{s.reliable_count} reliable eigenvalues")
    k = np.arange(K - min(3, K) + 1, K + 1)
    return float(np.mean(s.bc.frequency(k) / np.sqrt(s.lambdas[k - 1])))


@dataclass(frozen=True, eq=False)
class TraceTargets:
    r_true: np.ndarray
    t: float
    K: int
    K1: int
    L_tilde: float
    cheb_indices: np.ndarray
    N: int
    # lambda_1^-1..lambda_K^-1 followed by the K1-K tail surrogates L~^2 / mu_k (unscaled)
    reciprocals: np.ndarray
    bc: BoundaryCondition = DIRICHLET

    @property
    def tau1(self) -> float:
        return float(np.sum(self.reciprocals))


def tail_reciprocals(K: int, K1: int, L_tilde: float, bc: BoundaryCondition = DIRICHLET):
    return L_tilde ** 2 / bc.mu(np.arange(K + 1, K1 + 1))


def compute_trace_targets(s: Spectrum, N: int, K: int, K1: int, t: float,
                          cheb_indices=None, L_tilde: float | None = None) -> TraceTargets:
    """r_true[n] = sum_{k<=K} T~_n(t/lambda_k) + sum_{K<k<=K1} T~_n(t L~^2/mu_k)."""
    if not 1 <= K <= s.reliable_count:
        raise ValueError(f"K={K} needs {K} reliable eigenvalues, spectrum has {s.reliable_count}")
    if K1 < K:
        raise ValueError("K1 must be >= K")
    if t / s.lambdas[0] >= 1.0:
        raise ScaleTooLarge(f"t/lambda_1 = {t / s.lambdas[0]:.6g} >= 1")
    idx = _resolve_indices(N, cheb_indices)
    L_tilde = estimate_L(s, K) if L_tilde is None else float(L_tilde)
    recip = np.concatenate([1.0 / s.lambdas[:K], tail_reciprocals(K, K1, L_tilde, s.bc)])
    r = scaled_cheb_scalar(t * recip, N, idx).sum(axis=1)
    return TraceTargets(r, float(t), K, K1, L_tilde, idx, N, recip, s.bc)


def model_traces_and_jacobian(a, basis_mats, N: int, t: float, cheb_indices=None):
    """Traces r_n = trace T~_n(t M(a)) and J[n, m] = d r_n / d a_m.

    Runs the matrix recurrence together with its derivative recurrence, using
    d(t M(a))/d a_m = 2 t M(e_m); only two previous levels are kept.
    """
    B = stack_entries(basis_mats)
    a = np.asarray(a, dtype=float).ravel()
    idx = _resolve_indices(N, cheb_indices)
    M, J = B.shape[0], B.shape[1]
    X = t * np.tensordot(2.0 * a, B, axes=1)
    bound = float(np.max(np.abs(X).sum(axis=1)))
    if not np.isfinite(bound) or bound > RADIUS_BOUND:
        raise SpectralRadiusExceeded(f"row-sum bound of t*M(a) is {bound:.4g}")
    dX = 2.0 * t * B

    want = np.zeros(idx[-1] + 1, dtype=bool)
    want[idx] = True
    r = np.empty(idx.size)
    jac = np.empty((idx.size, M))
    row = 0

    def record(T, dT):
        nonlocal row
        r[row] = np.trace(T)
        jac[row] = np.trace(dT, axis1=1, axis2=2)
        row += 1

    T_prev, dT_prev = X, dX
    if want[1]:
        record(T_prev, dT_prev)
    if idx[-1] == 1:
        return r, jac
    XdX = np.matmul(X, dX)
    T_cur = 2.0 * X @ X - X
    dT_cur = 2.0 * (XdX + XdX.transpose(0, 2, 1)) - dX  # X and dX symmetric
    if want[2]:
        record(T_cur, dT_cur)
    Y = 4.0 * X - 2.0 * np.eye(J)
    for n in range(3, idx[-1] + 1):
        T_next = Y @ T_cur - T_prev
        dT_next = 4.0 * np.matmul(dX, T_cur) + np.matmul(Y, dT_cur) - dT_prev
        T_prev, T_cur = T_cur, T_next
        dT_prev, dT_cur = dT_cur, dT_next
        if want[n]:
            record(T_cur, dT_cur)
    return r, jac


def power_traces(a, basis_mats, S: int, t: float = 1.0) -> np.ndarray:
    """tau_s = trace((t M(a))^s) for s = 1..S by repeated multiplication."""
    if S < 1:
        raise ValueError("S must be >= 1")
    B = stack_entries(basis_mats)
    X = t * np.tensordot(2.0 * np.asarray(a, dtype=float), B, axes=1)
    out = np.empty(S)
    P = np.eye(X.shape[0])
    for s in range(S):
        P = P @ X
        out[s] = np.trace(P)
    return out
