"""Comparator estimators: linear shrinkage, adaptive thresholding, NERCOME, oracles.

The linear-rule functions (``linear_risk_estimate``, ``linear_risk_minimizers``,
``lw_estimate``, ``optimal_linear_estimate``) use the known-zero-mean
convention, s_jk = sum_i X_ij X_ik / n. Centre first if the mean is unknown.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, DimensionError, NumericalError
from .linalg import as_data_matrix, center_columns, sample_covariance, sym_eigen, symmetrize


@dataclass(frozen=True)
class LinearCoefs:
    beta_S: float
    beta_I: float
    mu_hat: float
    d2: float
    b2: float
    delta2: np.ndarray


def _delta2(X: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Delta-hat^2_jk = sum_i (X_ij X_ik - s_jk)^2 / n^2."""
    n = X.shape[0]
    # sum_i (x_ij x_ik)^2 - n s_jk^2 avoids an n x p x p temporary
    sq = (X * X).T @ (X * X)
    out = (sq - n * S * S) / (n * n)
    return np.maximum(symmetrize(out), 0.0)


def linear_risk_estimate(X, beta_S: float, beta_I: float) -> float:
    """Unbiased-to-O(1/n) estimate of the scaled Frobenius risk of beta_S*S + beta_I*I."""
    X = as_data_matrix(X, min_rows=1)
    p = X.shape[1]
    S = sample_covariance(X, zero_mean=True)
    D2 = _delta2(X, S)
    resid = (1.0 - beta_S) * S - beta_I * np.eye(p)
    return float(((2.0 * beta_S - 1.0) * D2 + resid * resid).sum() / p**2)


def linear_risk_minimizers(X) -> LinearCoefs:
    X = as_data_matrix(X, min_rows=1)
    p = X.shape[1]
    S = sample_covariance(X, zero_mean=True)
    mu = float(np.trace(S) / p)
    d2 = float(np.sum((S - mu * np.eye(p)) ** 2))
    if not d2 > 0.0:
        raise DataError("sample covariance is a multiple of the identity; linear risk has no unique minimiser")
    D2 = _delta2(X, S)
    # normal equations of the quadratic risk; det(Z'Z) = p * d2
    noise = float(D2.sum())
    beta_I = mu * noise / d2
    beta_S = 1.0 - beta_I / mu
    b2 = min(d2, noise)
    return LinearCoefs(beta_S=beta_S, beta_I=beta_I, mu_hat=mu, d2=d2, b2=b2, delta2=D2)


def lw_estimate(X) -> np.ndarray:
    """Ledoit-Wolf linear shrinkage towards mu_hat * I."""
    X = as_data_matrix(X, min_rows=1)
    n, p = X.shape
    S = sample_covariance(X, zero_mean=True)
    mu = float(np.trace(S) / p)
    if mu <= 0.0:
        raise DataError("all-zero data: shrinkage target scale is undefined")
    d2 = float(np.sum((S - mu * np.eye(p)) ** 2))
    if d2 == 0.0:
        return mu * np.eye(p)
    # sum_i ||x_i x_i' - S||_F^2 = sum_i ||x_i||^4 - n ||S||_F^2
    row_sq = np.einsum("ij,ij->i", X, X)
    noise = float((row_sq @ row_sq - n * np.sum(S * S)) / n**2)
    b2 = min(d2, max(noise, 0.0))
    shrink = b2 / d2
    return symmetrize((1.0 - shrink) * S + shrink * mu * np.eye(p))


def optimal_linear_estimate(X) -> np.ndarray:
    """Minimiser of the linear risk estimate with the positive-part correction."""
    X = as_data_matrix(X, min_rows=1)
    p = X.shape[1]
    S = sample_covariance(X, zero_mean=True)
    coefs = linear_risk_minimizers(X)
    return symmetrize(max(coefs.beta_S, 0.0) * S + min(coefs.beta_I, coefs.mu_hat) * np.eye(p))


def adaptive_threshold_estimate(X, delta: float = 2.0) -> np.ndarray:
    """Entry-adaptive soft thresholding of the (n-1)-denominator sample covariance.

    Off-diagonal (j, k) is soft-thresholded at
    ``delta * sqrt(theta_jk * log(p) / n)`` where ``theta_jk`` is the mean
    squared deviation of the centred products from s_jk. The diagonal is kept.
    """
    Xc = center_columns(X)
    n, p = Xc.shape
    if p < 2:
        raise DimensionError("adaptive thresholding needs p >= 2")
    S = Xc.T @ Xc / (n - 1)
    sq = (Xc * Xc).T @ (Xc * Xc)
    # mean_i (P_i - s)^2 = mean(P^2) - 2 s mean(P) + s^2 with mean(P) = (n-1) s / n
    theta = sq / n - 2.0 * S * S * (n - 1) / n + S * S
    theta = np.maximum(symmetrize(theta), 0.0)
    lam = delta * np.sqrt(theta * math.log(p) / n)
    out = np.sign(S) * np.maximum(np.abs(S) - lam, 0.0)
    np.fill_diagonal(out, np.diag(S))
    return symmetrize(out)


def nercome_estimate(X, n1: int | None = None, splits: int = 50, seed: int = 0) -> np.ndarray:
    """Average over random splits of Q diag(q_i' S2 q_i) Q', Q from the first part.

    Split s draws its permutation from ``default_rng([seed, s])`` so the result
    does not depend on evaluation order.
    """
    X = as_data_matrix(X, min_rows=4)
    n, p = X.shape
    if n1 is None:
        n1 = math.ceil(n / 2)
    if not 2 <= n1 <= n - 2:
        raise ConfigError(f"NERCOME split size n1={n1} must lie in [2, {n - 2}]")
    if splits < 1:
        raise ConfigError("NERCOME needs at least one split")
    perms = [np.random.default_rng([seed, s]).permutation(n) for s in range(splits)]
    return nercome_from_splits(X, perms, n1)


def nercome_from_splits(X, perms, n1: int) -> np.ndarray:
    """NERCOME average for explicit row permutations; the first ``n1`` rows of each form part one."""
    X = as_data_matrix(X, min_rows=4)
    p = X.shape[1]
    acc = np.zeros((p, p))
    for perm in perms:
        S1 = sample_covariance(X[perm[:n1]])
        S2 = sample_covariance(X[perm[n1:]])
        Q = sym_eigen(S1).vectors
        d = np.einsum("ij,ij->j", Q, S2 @ Q)
        acc += (Q * d) @ Q.T
    return symmetrize(acc / len(perms))


def oracle_rotation_invariant(X, Sigma) -> np.ndarray:
    """Sample eigenvectors with oracle eigenvalues u_i' Sigma u_i."""
    X = as_data_matrix(X, min_rows=2)
    Sigma = np.asarray(Sigma, dtype=float)
    p = X.shape[1]
    if Sigma.shape != (p, p):
        raise DimensionError(f"Sigma shape {Sigma.shape} does not match p={p}")
    U = sym_eigen(sample_covariance(X)).vectors
    d = np.einsum("ij,ij->j", U, Sigma @ U)
    out = (U * d) @ U.T
    if not np.all(np.isfinite(out)):
        raise NumericalError("oracle estimate is not finite")
    return symmetrize(out)
