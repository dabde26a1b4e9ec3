"""Cleartext numerical oracles for the encrypted fits.

Closed-form solutions, spectral quantities for step-size selection, and plain
floating-point implementations of every descent variant. The encrypted engine
is differentially tested against these; nothing here touches ciphertexts.
"""

import math
from dataclasses import dataclass

import numpy as np

from .engine import default_momentum

__all__ = [
    "SpectralInfo",
    "ols_closed_form",
    "ridge_closed_form",
    "spectral_info",
    "suggest_nu",
    "spectral_bound",
    "oscillating_sum",
    "float_gd",
    "float_cd",
    "float_nag",
    "float_vwt",
    "effective_df",
]


@dataclass
class SpectralInfo:
    """Extreme eigenvalues of X'X and the derived step-size quantities."""

    lambda_max: float
    lambda_min: float
    spectral_radius: float
    optimal_step: float  # 2 / (lambda_max + lambda_min)
    optimal_radius: float  # (lambda_max - lambda_min) / (lambda_max + lambda_min)


def ols_closed_form(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares coefficients via QR-backed lstsq; refuses rank-deficient X."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise np.linalg.LinAlgError(
            f"design matrix has rank {rank} < {X.shape[1]}; normal equations are singular"
        )
    return beta


def ridge_closed_form(X: np.ndarray, y: np.ndarray, alpha: float) -> np.ndarray:
    """(X'X + alpha I)^-1 X'y."""
    if alpha < 0:
        raise ValueError(f"penalty must be non-negative, got {alpha}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    p = X.shape[1]
    return np.linalg.solve(X.T @ X + alpha * np.eye(p), X.T @ y)


def spectral_info(X: np.ndarray) -> SpectralInfo:
    X = np.asarray(X, dtype=float)
    eigs = np.linalg.eigvalsh(X.T @ X)
    lam_min, lam_max = float(eigs[0]), float(eigs[-1])
    total = lam_max + lam_min
    return SpectralInfo(
        lambda_max=lam_max,
        lambda_min=lam_min,
        spectral_radius=lam_max,
        optimal_step=2.0 / total,
        optimal_radius=(lam_max - lam_min) / total,
    )


def suggest_nu(X: np.ndarray) -> int:
    """Integer step denominator: ceil(1/optimal_step), at least 1."""
    info = spectral_info(X)
    return max(1, math.ceil(1.0 / info.optimal_step))


def spectral_bound(X: np.ndarray, m: int) -> float:
    """B(m) = ||(X'X)^m||_2^(1/m), an upper bound on the spectral radius
    computable without an eigendecomposition."""
    if m < 1:
        raise ValueError(f"power must be at least 1, got {m}")
    A = np.asarray(X, dtype=float).T @ np.asarray(X, dtype=float)
    norm = np.linalg.norm(np.linalg.matrix_power(A, m), 2)
    return float(norm ** (1.0 / m))


def oscillating_sum(X: np.ndarray, y: np.ndarray, delta: float, k: int) -> np.ndarray:
    """Closed form of the k-th descent iterate:
    sum_{n=1}^{k} (-1)^(n+1) C(k, k-n) delta^n (X'X)^(n-1) X'y."""
    if k < 1:
        raise ValueError(f"iteration index must be at least 1, got {k}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    A = X.T @ X
    term = delta * (X.T @ y)  # n = 1 term before its binomial weight
    total = np.zeros(X.shape[1])
    for n in range(1, k + 1):
        sign = 1.0 if n % 2 == 1 else -1.0
        total = total + sign * math.comb(k, k - n) * term
        term = delta * (A @ term)
    return total


def _step(plan, delta):
    return 1.0 / plan.nu if delta is None else float(delta)


def float_gd(X, y, plan, delta=None):
    """Trajectory [beta_0, ..., beta_K] of simultaneous updates."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    d = _step(plan, delta)
    beta = np.zeros(X.shape[1])
    traj = [beta.copy()]
    for _ in range(plan.K):
        beta = beta + d * (X.T @ (y - X @ beta))
        traj.append(beta.copy())
    return traj


def float_cd(X, y, plan, delta=None):
    """Trajectory of cyclic sequential updates, one entry per full sweep."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    d = _step(plan, delta)
    p = X.shape[1]
    beta = np.zeros(p)
    traj = [beta.copy()]
    for _ in range(plan.K):
        for j in range(p):
            beta[j] = beta[j] + d * (X[:, j] @ (y - X @ beta))
        traj.append(beta.copy())
    return traj


def float_nag(X, y, plan, momentum=None, delta=None):
    """Trajectory of momentum-accelerated updates."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    d = _step(plan, delta)
    momentum = momentum or default_momentum
    p = X.shape[1]
    beta = np.zeros(p)
    s_prev = np.zeros(p)
    traj = [beta.copy()]
    for k in range(1, plan.K + 1):
        s = beta + d * (X.T @ (y - X @ beta))
        eta = momentum(k)
        beta = (1.0 + eta) * s - eta * s_prev
        s_prev = s
        traj.append(beta.copy())
    return traj


def float_vwt(X, y, plan, delta=None):
    """Simultaneous-update trajectory with the averaged combination appended.

    The combination is computed twice, by the pairwise averaging triangle and
    by the closed-form binomial weights, and the two must agree; the triangle
    result is what gets appended."""
    traj = float_gd(X, y, plan, delta)
    K = plan.K
    k_star = K // 3 + 1
    row = [traj[k] for k in range(k_star, K + 1)]
    while len(row) > 1:
        row = [(a + b) / 2.0 for a, b in zip(row, row[1:])]
    triangle = row[0]
    closed = sum(
        math.comb(K - k_star, k - k_star) * traj[k] for k in range(k_star, K + 1)
    ) / 2.0 ** (K - k_star)
    if not np.allclose(triangle, closed, rtol=1e-12, atol=1e-12):
        raise AssertionError("averaging triangle disagrees with the closed-form combine")
    return traj + [triangle]


def effective_df(X: np.ndarray, alpha: float) -> float:
    """trace(X (X'X + alpha I)^-1 X')."""
    if alpha < 0:
        raise ValueError(f"penalty must be non-negative, got {alpha}")
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    return float(np.trace(X @ np.linalg.solve(X.T @ X + alpha * np.eye(p), X.T)))
