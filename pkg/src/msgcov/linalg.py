"""Dense linear-algebra and statistics primitives shared by every estimator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import DegenerateFeatureError, DimensionError, NumericalError


@dataclass
class SymmetricEstimate:
    """A p x p symmetric matrix plus where it came from."""

    values: np.ndarray
    method: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DimensionError(f"estimate must be square, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NumericalError(f"{self.method}: estimate has non-finite entries")
        self.values = symmetrize(v)

    @property
    def p(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class PairStats:
    """Scatter matrix of two centred columns and its degrees of freedom."""

    scatter: np.ndarray
    dof: int
    j: int
    k: int


@dataclass(frozen=True)
class EigenPair:
    vectors: np.ndarray
    values: np.ndarray


def as_data_matrix(X, min_rows: int = 1) -> np.ndarray:
    """Validate an n x p observation matrix and return it as float64."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionError(f"data matrix must be 2-D, got {X.ndim}-D")
    n, p = X.shape
    if p < 1:
        raise DimensionError("data matrix has no columns")
    if n < min_rows:
        raise DimensionError(f"need at least {min_rows} rows, got {n}")
    if not np.all(np.isfinite(X)):
        raise NumericalError("data matrix has non-finite entries")
    return X


def symmetrize(A: np.ndarray) -> np.ndarray:
    """Exact symmetrisation: mirror the lower triangle onto the upper one."""
    A = np.array(A, dtype=float)
    iu = np.triu_indices(A.shape[0], 1)
    A[iu] = A.T[iu]
    return A


def center_columns(X) -> np.ndarray:
    X = as_data_matrix(X, min_rows=2)
    return X - X.mean(axis=0)


def sample_covariance(X, zero_mean: bool = False) -> np.ndarray:
    """Sample covariance.

    With ``zero_mean`` the mean is taken as known to be zero and the
    denominator is n; otherwise columns are centred and the denominator is
    n - 1.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        if zero_mean:
            X = as_data_matrix(X, min_rows=1)
            S = X.T @ X / X.shape[0]
        else:
            Xc = center_columns(X)
            S = Xc.T @ Xc / (Xc.shape[0] - 1)
    if not np.all(np.isfinite(S)):
        raise NumericalError("sample covariance overflowed")
    return symmetrize(S)


def pair_stats(Xc, j: int, k: int) -> PairStats:
    Xc = as_data_matrix(Xc, min_rows=2)
    if j == k:
        raise DimensionError("pair_stats needs two distinct features")
    cols = Xc[:, [j, k]]
    V = symmetrize(cols.T @ cols)
    if V[0, 0] <= 0.0 or V[1, 1] <= 0.0:
        raise DegenerateFeatureError(f"constant feature in pair ({j}, {k})")
    return PairStats(scatter=V, dof=Xc.shape[0] - 1, j=j, k=k)


def scaled_frobenius_loss(A, B) -> float:
    """(1/p) * ||A - B||_F."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.ndim != 2:
        raise DimensionError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.linalg.norm(A - B, "fro") / A.shape[0])


def sym_eigen(A) -> EigenPair:
    """Eigendecomposition with descending eigenvalues and canonical signs.

    Ties keep eigh's order; each eigenvector is flipped so its largest-magnitude
    entry is positive.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericalError("sym_eigen: non-finite entries")
    w, Q = np.linalg.eigh(symmetrize(A))
    order = np.argsort(-w, kind="stable")
    w = w[order]
    Q = Q[:, order]
    pivot = np.argmax(np.abs(Q), axis=0)
    signs = np.sign(Q[pivot, np.arange(Q.shape[1])])
    signs[signs == 0] = 1.0
    return EigenPair(vectors=Q * signs, values=w)


def eigenvector_distance(Qhat, Q) -> float:
    """Frobenius distance between two eigenvector matrices after per-column sign alignment."""
    Qhat = np.asarray(Qhat, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if Qhat.shape != Q.shape:
        raise DimensionError(f"shape mismatch: {Qhat.shape} vs {Q.shape}")
    dots = np.einsum("ij,ij->j", Qhat, Q)
    flip = np.where(dots < 0, -1.0, 1.0)
    return float(np.linalg.norm(Qhat * flip - Q, "fro"))
