"""Monte-Carlo benchmark harness, train/test split evaluation and eigenvector diagnostic."""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .baselines import adaptive_threshold_estimate, lw_estimate, nercome_estimate, oracle_rotation_invariant
from .errors import ConfigError, MsgcovError
from .gmodel import msg_estimate
from .linalg import (
    SymmetricEstimate,
    as_data_matrix,
    center_columns,
    eigenvector_distance,
    sample_covariance,
    scaled_frobenius_loss,
    sym_eigen,
)
from .posdef import PdCorrectionConfig, correct_pd
from .sim import ModelSpec, make_sigma, sample_mvn

log = logging.getLogger(__name__)

CSV_HEADER = ["model", "p", "n", "method", "median", "q25", "q75", "replicates", "mean_seconds"]


def derive_seed(*keys: int) -> int:
    """Deterministic 32-bit seed from a tuple of integers."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# method dispatch
# ---------------------------------------------------------------------------


@dataclass
class FitContext:
    seed: int = 0
    K_factor: float = 1.0
    Sigma: np.ndarray | None = None


def _k_for(p: int, ctx: FitContext, params: dict) -> int:
    if "K" in params:
        return int(params["K"])
    n_pairs = p * (p - 1) // 2
    return int(min(max(1, round(ctx.K_factor * p)), n_pairs))


def _msg(X, ctx, params):
    est, report = msg_estimate(
        X,
        K=_k_for(X.shape[1], ctx, params),
        seed=ctx.seed,
        tol=params.get("tol", 1e-4),
        max_iter=params.get("max_iter", 200),
    )
    return est, {"iterations": report.iterations, "converged": report.converged}


def _msgcor(X, ctx, params):
    est, meta = _msg(X, ctx, params)
    cfg = PdCorrectionConfig(params.get("grid_size", 20), params.get("alpha_max", 10.0))
    return correct_pd(est, cfg), meta


def _oracle_msg(X, ctx, params):
    if ctx.Sigma is None:
        raise ConfigError("oracle_msg needs the population covariance")
    est, report = msg_estimate(X, K=_k_for(X.shape[1], ctx, params), Sigma=ctx.Sigma, seed=ctx.seed)
    return est, {"iterations": report.iterations}


def _oracle_nonlin(X, ctx, params):
    if ctx.Sigma is None:
        raise ConfigError("oracle_nonlin needs the population covariance")
    return oracle_rotation_invariant(X, ctx.Sigma), {}


METHODS: dict[str, Callable[[np.ndarray, FitContext, dict], tuple[np.ndarray, dict]]] = {
    "msg": _msg,
    "msgcor": _msgcor,
    "sample": lambda X, ctx, prm: (sample_covariance(X), {}),
    # mean treated as unknown: centre, then apply the zero-mean formulas
    "linear": lambda X, ctx, prm: (lw_estimate(center_columns(X)), {}),
    "adap": lambda X, ctx, prm: (adaptive_threshold_estimate(X, prm.get("delta", 2.0)), {}),
    "nercome": lambda X, ctx, prm: (
        nercome_estimate(X, prm.get("n1"), prm.get("splits", 50), seed=ctx.seed),
        {},
    ),
    "oracle_nonlin": _oracle_nonlin,
    "oracle_msg": _oracle_msg,
}
ORACLE_METHODS = {"oracle_nonlin", "oracle_msg"}


@dataclass(frozen=True)
class MethodSpec:
    name: str
    params: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def parse(cls, item) -> "MethodSpec":
        if isinstance(item, str):
            name, params = item, {}
        elif isinstance(item, dict) and "name" in item:
            name, params = item["name"], dict(item.get("params") or {})
        else:
            raise ConfigError(f"bad method entry {item!r}")
        if name not in METHODS:
            raise ConfigError(f"unknown method {name!r}; choose from {sorted(METHODS)}")
        return cls(name, params)


def estimate(X, method: str | MethodSpec, seed: int = 0, K_factor: float = 1.0, Sigma=None) -> SymmetricEstimate:
    """Run one named estimator and wrap the result with its provenance."""
    spec = method if isinstance(method, MethodSpec) else MethodSpec.parse(method)
    X = as_data_matrix(X, min_rows=2)
    ctx = FitContext(seed=seed, K_factor=K_factor, Sigma=None if Sigma is None else np.asarray(Sigma, float))
    values, meta = METHODS[spec.name](X, ctx, spec.params)
    return SymmetricEstimate(values, spec.name, {**spec.params, **meta, "seed": seed})


# ---------------------------------------------------------------------------
# records and aggregation
# ---------------------------------------------------------------------------


@dataclass
class BenchRecord:
    model_id: int
    p: int
    n: int
    method: str
    median_loss: float
    q25: float
    q75: float
    replicates: int
    mean_seconds: float
    failures: int = 0

    def row(self) -> list[str]:
        return [
            str(self.model_id),
            str(self.p),
            str(self.n),
            self.method,
            repr(self.median_loss),
            repr(self.q25),
            repr(self.q75),
            str(self.replicates),
            repr(self.mean_seconds),
        ]


def lower_quantiles(values) -> tuple[float, float, float]:
    """(median, q25, q75) using the lower order statistic; even counts take the lower median."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return math.nan, math.nan, math.nan
    pick = lambda q: float(v[int(math.floor(q * (v.size - 1)))])
    return pick(0.5), pick(0.25), pick(0.75)


def _aggregate(model_id, p, n, method, losses, seconds, failures) -> BenchRecord:
    med, q25, q75 = lower_quantiles(losses)
    mean_s = float(np.mean(seconds)) if seconds else 0.0
    return BenchRecord(model_id, p, n, method, med, q25, q75, len(losses), mean_s, failures)


def write_records(records, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(r.row())


def read_records(path) -> list[BenchRecord]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [
        BenchRecord(
            int(r["model"]),
            int(r["p"]),
            int(r["n"]),
            r["method"],
            float(r["median"]),
            float(r["q25"]),
            float(r["q75"]),
            int(r["replicates"]),
            float(r["mean_seconds"]),
        )
        for r in rows
    ]


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------


@dataclass
class BenchConfig:
    models: list[ModelSpec]
    n: int
    replicates: int
    methods: list[MethodSpec]
    seed: int = 0
    K_factor: float = 1.0
    output_path: str | None = None
    workers: int = 1
    timing: bool = True

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not self.methods:
            raise ConfigError("at least one method is required")
        if not self.models:
            raise ConfigError("at least one model is required")
        if self.n < 3:
            raise ConfigError("n must be >= 3")
        if not self.K_factor > 0:
            raise ConfigError("K_factor must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "BenchConfig":
        try:
            return cls(
                models=[ModelSpec.from_dict(m) for m in d["models"]],
                n=int(d["n"]),
                replicates=int(d["replicates"]),
                methods=[MethodSpec.parse(m) for m in d["methods"]],
                seed=int(d.get("seed", 0)),
                K_factor=float(d.get("K_factor", 1.0)),
                output_path=d.get("output_path"),
                workers=int(d.get("workers", 1)),
                timing=bool(d.get("timing", True)),
            )
        except KeyError as exc:
            raise ConfigError(f"config is missing {exc}") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad config value: {exc}") from exc


def _run_replicate(cfg: BenchConfig, m_idx: int, Sigma: np.ndarray, rep: int):
    """Losses and timings of every method on one replicate, keyed by method index."""
    X = sample_mvn(Sigma, cfg.n, seed=derive_seed(cfg.seed, m_idx, rep))
    out = []
    for k, spec in enumerate(cfg.methods):
        ctx = FitContext(seed=derive_seed(cfg.seed, m_idx, rep, k + 1), K_factor=cfg.K_factor, Sigma=Sigma)
        t0 = time.perf_counter()
        try:
            est, _ = METHODS[spec.name](X, ctx, spec.params)
        except ConfigError:
            raise
        except (MsgcovError, np.linalg.LinAlgError) as exc:
            log.warning("model %d rep %d %s failed: %s", cfg.models[m_idx].model_id, rep, spec.name, exc)
            out.append(None)
            continue
        elapsed = time.perf_counter() - t0
        out.append((scaled_frobenius_loss(est, Sigma), elapsed))
    return out


def run_benchmark(cfg: BenchConfig) -> list[BenchRecord]:
    """Replicate loop over models x methods; one BenchRecord per cell.

    The population covariance is built once per model. Each replicate's data
    and each method's randomness come from seeds derived from
    (master seed, model index, replicate[, method]), and results are
    aggregated in replicate order, so the worker count never changes output.
    """
    records = []
    for m_idx, spec in enumerate(cfg.models):
        Sigma = make_sigma(spec)
        reps = range(cfg.replicates)
        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                results = list(pool.map(lambda r: _run_replicate(cfg, m_idx, Sigma, r), reps))
        else:
            results = [_run_replicate(cfg, m_idx, Sigma, r) for r in reps]
        for k, mspec in enumerate(cfg.methods):
            cells = [res[k] for res in results]
            ok = [c for c in cells if c is not None]
            losses = [c[0] for c in ok]
            seconds = [c[1] for c in ok] if cfg.timing else []
            records.append(_aggregate(spec.model_id, spec.p, cfg.n, mspec.name, losses, seconds, len(cells) - len(ok)))
    if cfg.output_path:
        write_records(records, cfg.output_path)
    return records


# ---------------------------------------------------------------------------
# train / test split evaluation
# ---------------------------------------------------------------------------


def split_eval(
    X,
    methods,
    train_n: int = 10,
    repeats: int = 100,
    seed: int = 0,
    K_factor: float = 1.0,
    model_id: int = 0,
) -> list[BenchRecord]:
    """Estimate on a random training subset, score against the held-out sample covariance.

    The score is the scaled Frobenius loss, (1/p) * ||estimate - S_test||_F.
    ``model_id`` only labels the output rows (0 for external data).
    """
    X = as_data_matrix(X, min_rows=2)
    n, p = X.shape
    specs = [m if isinstance(m, MethodSpec) else MethodSpec.parse(m) for m in methods]
    if not specs:
        raise ConfigError("at least one method is required")
    if train_n < 3:
        raise ConfigError("train_n must be >= 3")
    if n - train_n < 2:
        raise ConfigError(f"need at least 2 test samples; n={n}, train_n={train_n}")
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    for s in specs:
        if s.name in ORACLE_METHODS:
            raise ConfigError(f"{s.name} needs the population covariance and cannot run on data")

    losses = {s.name: [] for s in specs}
    seconds = {s.name: [] for s in specs}
    failures = {s.name: 0 for s in specs}
    for r in range(repeats):
        perm = np.random.default_rng(derive_seed(seed, r)).permutation(n)
        train, test = X[perm[:train_n]], X[perm[train_n:]]
        target = sample_covariance(test)
        for k, s in enumerate(specs):
            ctx = FitContext(seed=derive_seed(seed, r, k + 1), K_factor=K_factor)
            t0 = time.perf_counter()
            try:
                est, _ = METHODS[s.name](train, ctx, s.params)
            except (MsgcovError, np.linalg.LinAlgError) as exc:
                if isinstance(exc, ConfigError):
                    raise
                log.warning("repeat %d %s failed: %s", r, s.name, exc)
                failures[s.name] += 1
                continue
            seconds[s.name].append(time.perf_counter() - t0)
            losses[s.name].append(scaled_frobenius_loss(est, target))
    return [
        _aggregate(model_id, p, n, s.name, losses[s.name], seconds[s.name], failures[s.name]) for s in specs
    ]


# ---------------------------------------------------------------------------
# eigenvector diagnostic
# ---------------------------------------------------------------------------


@dataclass
class EigenDiagRecord:
    model_id: int
    p: int
    n: int
    median: float
    q25: float
    q75: float
    replicates: int

    HEADER = ("model", "p", "n", "median", "q25", "q75", "replicates")

    def row(self) -> list[str]:
        return [str(self.model_id), str(self.p), str(self.n), repr(self.median), repr(self.q25), repr(self.q75), str(self.replicates)]


def eigen_diagnostic(spec: ModelSpec, n: int, replicates: int, seed: int = 0) -> EigenDiagRecord:
    """Distance between sample and population eigenvector matrices over replicates."""
    if replicates < 1:
        raise ConfigError("replicates must be >= 1")
    if n < 2:
        raise ConfigError("n must be >= 2")
    Sigma = make_sigma(spec)
    Q = sym_eigen(Sigma).vectors
    dist = []
    for r in range(replicates):
        X = sample_mvn(Sigma, n, seed=derive_seed(seed, spec.model_id, r))
        dist.append(eigenvector_distance(sym_eigen(sample_covariance(X)).vectors, Q))
    med, q25, q75 = lower_quantiles(dist)
    return EigenDiagRecord(spec.model_id, spec.p, n, med, q25, q75, replicates)
