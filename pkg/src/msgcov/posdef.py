"""Eigenvalue-clipping projections onto the PSD / PD cone."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .linalg import symmetrize


@dataclass(frozen=True)
class PdCorrectionConfig:
    grid_size: int = 20
    alpha_max: float = 10.0

    def __post_init__(self):
        if self.grid_size < 1:
            raise ConfigError("grid_size must be >= 1")
        if not self.alpha_max > 0:
            raise ConfigError("alpha_max must be positive")


@dataclass(frozen=True)
class PdCorrection:
    """Output of :func:`correct_pd_report`."""

    values: np.ndarray
    alpha: float | None
    floor: float
    fallback: bool
    changed: bool


def _check_symmetric(B) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise DimensionError(f"expected a square matrix, got {B.shape}")
    scale = max(1.0, float(np.max(np.abs(B)))) if B.size else 1.0
    if np.max(np.abs(B - B.T), initial=0.0) > 1e-10 * scale:
        raise DimensionError("matrix is not symmetric")
    return symmetrize(B)


def _clip(w: np.ndarray, Q: np.ndarray, floor: float) -> np.ndarray:
    return symmetrize((Q * np.maximum(w, floor)) @ Q.T)


def project_psd(B) -> np.ndarray:
    """Frobenius-nearest PSD matrix: negative eigenvalues set to zero."""
    B = _check_symmetric(B)
    w, Q = np.linalg.eigh(B)
    if w[0] >= 0.0:
        return B
    return _clip(w, Q, 0.0)


def correct_pd_report(B, cfg: PdCorrectionConfig | None = None) -> PdCorrection:
    """Raise eigenvalues below c_alpha = 10**-alpha * (least positive eigenvalue) to c_alpha.

    alpha is picked from ``i * alpha_max / grid_size`` (i = 1..grid_size) to
    minimise ``||B - P_c(B)||_F + alpha``; the first minimiser wins ties. An
    already positive definite ``B`` is returned as is.
    """
    cfg = cfg or PdCorrectionConfig()
    B = _check_symmetric(B)
    p = B.shape[0]
    w, Q = np.linalg.eigh(B)
    if w[0] > 0.0:
        return PdCorrection(values=B, alpha=None, floor=0.0, fallback=False, changed=False)

    positive = w[w > 0.0]
    if positive.size == 0:
        floor = 1e-8 * max(1.0, abs(float(np.trace(B))) / p)
        return PdCorrection(values=_clip(w, Q, floor), alpha=None, floor=floor, fallback=True, changed=True)

    lam_min = float(positive[0])
    alphas = cfg.alpha_max * np.arange(1, cfg.grid_size + 1) / cfg.grid_size
    floors = 10.0 ** (-alphas) * lam_min
    # ||B - P_c(B)||_F only involves the eigenvalues that get raised
    gaps = np.maximum(floors[:, None] - w[None, :], 0.0)
    objective = np.sqrt((gaps * gaps).sum(axis=1)) + alphas
    best = int(np.argmin(objective))
    floor = float(floors[best])
    return PdCorrection(
        values=_clip(w, Q, floor), alpha=float(alphas[best]), floor=floor, fallback=False, changed=True
    )


def correct_pd(B, cfg: PdCorrectionConfig | None = None) -> np.ndarray:
    return correct_pd_report(B, cfg).values
