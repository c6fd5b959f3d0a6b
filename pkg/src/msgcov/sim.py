"""Population covariance models 1-6 and seeded Gaussian sampling."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigError, NumericalError
from .linalg import symmetrize

MODEL_NAMES = {
    1: "sparse",
    2: "hypercorrelated",
    3: "dense-0.7",
    4: "dense-0.9",
    5: "orthogonal",
    6: "spiked",
}


@dataclass
class ModelSpec:
    """Which population covariance to build.

    ``params`` overrides model constants: ``sd_low``/``sd_high`` (models 1-4),
    ``rho`` (3-4), ``rho11``/``rho22``/``rho12`` (2), ``band`` (1),
    ``eig_low``/``eig_high`` (5) and ``spikes`` (6). ``seed`` only matters for
    models 5 and 6.
    """

    model_id: int
    p: int
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.model_id not in MODEL_NAMES:
            raise ConfigError(f"unknown model id {self.model_id}; expected 1-6")
        if self.p < 2:
            raise ConfigError("p must be at least 2")
        if self.model_id in (1, 2) and self.p % 2:
            raise ConfigError(f"model {self.model_id} needs even p, got {self.p}")

    @property
    def name(self) -> str:
        return MODEL_NAMES[self.model_id]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ModelSpec":
        try:
            return cls(
                model_id=int(d["model_id"]),
                p=int(d["p"]),
                params=dict(d.get("params") or {}),
                seed=int(d.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad model spec {d!r}: {exc}") from exc


def _split_sds(p: int, low: float, high: float) -> np.ndarray:
    # first p//2 features get the low sd; odd p puts the extra feature in the high half
    sd = np.full(p, float(high))
    sd[: p // 2] = low
    return sd


def _from_correlation(sd: np.ndarray, R: np.ndarray) -> np.ndarray:
    return symmetrize(R * np.outer(sd, sd))


def _from_spectrum(U: np.ndarray, eig: np.ndarray) -> np.ndarray:
    return symmetrize((U.T * eig) @ U)


def haar_orthogonal(p: int, seed) -> np.ndarray:
    """Haar-distributed orthogonal matrix: QR of a Gaussian matrix with R's diagonal made positive."""
    if p < 1:
        raise ConfigError("p must be positive")
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((p, p))
    Q, R = np.linalg.qr(Z)
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    return Q * d


def make_sigma(spec: ModelSpec) -> np.ndarray:
    p, prm, mid = spec.p, spec.params, spec.model_id
    h = p // 2
    if mid == 1:
        sd = _split_sds(p, prm.get("sd_low", 1.0), prm.get("sd_high", 1.5))
        band = float(prm.get("band", 10.0))
        idx = np.arange(h)
        R = np.eye(p)
        R[:h, :h] = np.maximum(1.0 - np.abs(idx[:, None] - idx[None, :]) / band, 0.0)
        Sigma = _from_correlation(sd, R)
    elif mid == 2:
        sd = _split_sds(p, prm.get("sd_low", 1.0), prm.get("sd_high", 2.0))
        R = np.empty((p, p))
        R[:h, :h] = prm.get("rho11", 0.8)
        R[h:, h:] = prm.get("rho22", 0.2)
        R[:h, h:] = prm.get("rho12", 0.4)
        R[h:, :h] = prm.get("rho12", 0.4)
        np.fill_diagonal(R, 1.0)
        Sigma = _from_correlation(sd, R)
    elif mid in (3, 4):
        rho = prm.get("rho", 0.7 if mid == 3 else 0.9)
        sd = _split_sds(p, prm.get("sd_low", 1.0), prm.get("sd_high", 1.5))
        R = np.full((p, p), float(rho))
        np.fill_diagonal(R, 1.0)
        Sigma = _from_correlation(sd, R)
    else:
        rng = np.random.default_rng([spec.seed, 0])
        U = haar_orthogonal(p, [spec.seed, 1])
        if mid == 5:
            eig = rng.uniform(prm.get("eig_low", 1.0), prm.get("eig_high", 4.0), size=p)
        else:
            spikes = np.asarray(prm.get("spikes", [4.0, 3.0, 2.0]), dtype=float)
            if spikes.size > p:
                raise ConfigError("more spikes than dimensions")
            eig = np.ones(p)
            eig[: spikes.size] = spikes
        Sigma = _from_spectrum(U, eig)

    if np.linalg.eigvalsh(Sigma)[0] <= 0.0:
        raise NumericalError(f"model {mid} with p={p} is not positive definite")
    return Sigma


def model_spectrum(spec: ModelSpec) -> np.ndarray | None:
    """Generating eigenvalues for models 5/6 (descending), ``None`` otherwise."""
    if spec.model_id == 5:
        rng = np.random.default_rng([spec.seed, 0])
        eig = rng.uniform(spec.params.get("eig_low", 1.0), spec.params.get("eig_high", 4.0), size=spec.p)
        return np.sort(eig)[::-1]
    if spec.model_id == 6:
        spikes = np.asarray(spec.params.get("spikes", [4.0, 3.0, 2.0]), dtype=float)
        eig = np.ones(spec.p)
        eig[: spikes.size] = spikes
        return np.sort(eig)[::-1]
    return None


def sample_mvn(Sigma, n: int, seed) -> np.ndarray:
    """n rows of N(0, Sigma): standard normals times the transposed Cholesky factor."""
    Sigma = np.asarray(Sigma, dtype=float)
    if n < 1:
        raise ConfigError("n must be positive")
    try:
        L = np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("Sigma is not positive definite") from exc
    Z = np.random.default_rng(seed).standard_normal((n, Sigma.shape[0]))
    return Z @ L.T
