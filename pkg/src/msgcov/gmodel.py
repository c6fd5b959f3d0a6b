"""Matrix shrinkage via g-modeling (MSG).

Each off-diagonal entry sigma_jk = sigma_j * sigma_k * r_jk is treated as one
coordinate of a compound decision problem. A discrete prior over
(sd_j, sd_k, correlation) triples is fitted by EM on the pairwise composite
likelihood of the 2 x 2 scatter matrices (Wishart) and the per-feature
scatters (scaled chi-square). Entries are then estimated by their posterior
means under the fitted prior.

Support points come from k-means on the observed triples plus their
(sd_j, sd_k) swaps, and the weights of swapped points are tied, so the prior
is symmetric in its first two coordinates.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, DataError, DegenerateFeatureError, DimensionError, NumericalError
from .linalg import PairStats, as_data_matrix, center_columns, symmetrize

log = logging.getLogger(__name__)

GAMMA_CLAMP = 1e-4
SIGMA_FLOOR_REL = 1e-6


# ---------------------------------------------------------------------------
# data structures
# ---------------------------------------------------------------------------


@dataclass
class SupportGrid:
    """D = 2K atoms (a, b, gamma); atom t + K is atom t with a and b swapped.

    ``weights[t]`` and ``weights[t + K]`` are always equal.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if atoms.ndim != 2 or atoms.shape[1] != 3:
            raise DimensionError(f"atoms must be D x 3, got {atoms.shape}")
        D = atoms.shape[0]
        if D == 0 or D % 2:
            raise ConfigError(f"number of atoms must be even and positive, got {D}")
        if weights.shape != (D,):
            raise DimensionError("one weight per atom required")
        h = D // 2
        if not np.array_equal(atoms[h:], atoms[:h][:, [1, 0, 2]]):
            raise ConfigError("second half of the atoms must be the swaps of the first half")
        if not np.array_equal(weights[:h], weights[h:]):
            raise ConfigError("swapped atoms must carry identical weights")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ConfigError("weights must be nonnegative and sum to one")
        if np.any(atoms[:, :2] <= 0) or np.any(np.abs(atoms[:, 2]) >= 1):
            raise ConfigError("atoms need a, b > 0 and |gamma| < 1")
        self.atoms = atoms
        self.weights = weights

    @classmethod
    def from_half(cls, half_atoms, half_weights=None) -> "SupportGrid":
        """Build from the first K atoms; weights given for those K are halved onto each pair."""
        half_atoms = np.atleast_2d(np.asarray(half_atoms, dtype=float))
        K = half_atoms.shape[0]
        if half_weights is None:
            hw = np.full(K, 0.5 / K)
        else:
            hw = np.asarray(half_weights, dtype=float)
            hw = 0.5 * hw / hw.sum()
        atoms = np.vstack([half_atoms, half_atoms[:, [1, 0, 2]]])
        return cls(atoms=atoms, weights=np.concatenate([hw, hw]))

    @property
    def D(self) -> int:
        return self.atoms.shape[0]

    @property
    def a(self) -> np.ndarray:
        return self.atoms[:, 0]

    @property
    def b(self) -> np.ndarray:
        return self.atoms[:, 1]

    @property
    def gamma(self) -> np.ndarray:
        return self.atoms[:, 2]

    def with_weights(self, weights) -> "SupportGrid":
        return SupportGrid(atoms=self.atoms, weights=weights)


@dataclass
class FitReport:
    loglik_trace: list[float]
    iterations: int
    converged: bool
    grid: SupportGrid | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {
            "loglik_trace": [float(v) for v in self.loglik_trace],
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }
        if self.grid is not None:
            out["atoms"] = self.grid.atoms.tolist()
            out["weights"] = self.grid.weights.tolist()
        return out


@dataclass
class SufficientStats:
    """Scatter matrix V = Xc'Xc of centred data and its degrees of freedom m = n - 1.

    Pairs are the lower triangle j > k, in ``np.tril_indices`` order.
    """

    scatter: np.ndarray
    dof: int

    def __post_init__(self):
        V = symmetrize(np.asarray(self.scatter, dtype=float))
        if V.ndim != 2 or V.shape[0] != V.shape[1]:
            raise DimensionError("scatter must be square")
        if self.dof < 1:
            raise DataError("need at least one degree of freedom")
        bad = np.flatnonzero(np.diag(V) <= 0.0)
        if bad.size:
            raise DegenerateFeatureError(f"features with zero sample variance: {bad.tolist()}")
        self.scatter = V
        self.j, self.k = np.tril_indices(V.shape[0], -1)
        det = self.v11 * self.v22 - self.v12**2
        if np.any(det <= 0.0):
            i = int(np.flatnonzero(det <= 0.0)[0])
            raise DegenerateFeatureError(
                f"singular scatter for pair ({self.j[i]}, {self.k[i]}): columns are collinear"
            )

    @classmethod
    def from_data(cls, X) -> "SufficientStats":
        Xc = center_columns(X)
        return cls(scatter=Xc.T @ Xc, dof=Xc.shape[0] - 1)

    @property
    def p(self) -> int:
        return self.scatter.shape[0]

    @property
    def diag(self) -> np.ndarray:
        return np.diag(self.scatter).copy()

    @property
    def v11(self) -> np.ndarray:
        return self.scatter[self.j, self.j]

    @property
    def v22(self) -> np.ndarray:
        return self.scatter[self.k, self.k]

    @property
    def v12(self) -> np.ndarray:
        return self.scatter[self.j, self.k]

    def triples(self) -> np.ndarray:
        """Sample (s_j, s_k, r_jk) for every lower-triangular pair."""
        sd = np.sqrt(self.diag / self.dof)
        r = self.v12 / np.sqrt(self.v11 * self.v22)
        return np.column_stack([sd[self.j], sd[self.k], r])

    def pair(self, idx: int) -> PairStats:
        j, k = int(self.j[idx]), int(self.k[idx])
        V = self.scatter[np.ix_([j, k], [j, k])]
        return PairStats(scatter=V, dof=self.dof, j=j, k=k)


def true_triples(Sigma) -> np.ndarray:
    """(sigma_j, sigma_k, r_jk) for the lower-triangular pairs of a population covariance."""
    Sigma = np.asarray(Sigma, dtype=float)
    sd = np.sqrt(np.diag(Sigma))
    j, k = np.tril_indices(Sigma.shape[0], -1)
    return np.column_stack([sd[j], sd[k], Sigma[j, k] / (sd[j] * sd[k])])


# ---------------------------------------------------------------------------
# support construction
# ---------------------------------------------------------------------------


def _kmeans_pp_init(points: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # every point coincides with a centre already; any unused index will do
            free = np.setdiff1d(np.arange(n), chosen)
            idx = int(free[rng.integers(free.size)])
        chosen.append(idx)
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return points[chosen].copy()


def kmeans(points, K: int, seed: int = 0, max_iter: int = 100) -> np.ndarray:
    """Lloyd's algorithm from a k-means++ start.

    An emptied cluster is restarted at the point currently farthest from its
    own centroid. Returns the K x d centroid array.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] == 0:
        raise DataError("kmeans needs a non-empty 2-D point array")
    n = points.shape[0]
    if K < 1:
        raise ConfigError("K must be at least 1")
    if K > n:
        raise ConfigError(f"K={K} exceeds the number of points ({n})")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(points, K, rng)
    labels = None
    for _ in range(max_iter):
        new_labels, dist = kernels.nearest_centroid(points, centroids)
        counts = np.bincount(new_labels, minlength=K)
        sums = np.zeros_like(centroids)
        np.add.at(sums, new_labels, points)
        nonempty = counts > 0
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]
        for c in np.flatnonzero(~nonempty):
            far = int(np.argmax(dist))
            centroids[c] = points[far]
            dist[far] = 0.0
        if labels is not None and np.array_equal(new_labels, labels) and nonempty.all():
            break
        labels = new_labels
    return centroids


def build_support_grid(
    triples,
    K: int,
    gamma_clamp: float = GAMMA_CLAMP,
    sigma_floor: float | None = None,
    seed: int = 0,
    max_iter: int = 100,
) -> SupportGrid:
    """K-means centroids of the (s_j, s_k, r_jk) triples plus their swaps, uniform weights."""
    triples = np.asarray(triples, dtype=float)
    if triples.ndim != 2 or triples.shape[0] == 0 or triples.shape[1] != 3:
        raise DataError("need a non-empty n x 3 array of triples")
    if K < 1:
        raise ConfigError("K must be at least 1")
    if sigma_floor is None:
        sigma_floor = SIGMA_FLOOR_REL * float(np.median(triples[:, :2]))
    centres = kmeans(triples, K, seed=seed, max_iter=max_iter)
    centres[:, :2] = np.maximum(centres[:, :2], sigma_floor)
    lim = 1.0 - gamma_clamp
    centres[:, 2] = np.clip(centres[:, 2], -lim, lim)
    return SupportGrid.from_half(centres)


# ---------------------------------------------------------------------------
# likelihoods
# ---------------------------------------------------------------------------


def log_lik_pair(stats: PairStats, atom) -> float:
    """log Wishart_2(V; m, Sigma(a, b, gamma)) of a pair scatter."""
    V = np.asarray(stats.scatter, dtype=float)
    m = stats.dof
    if m < 2:
        raise DataError("pair likelihood needs at least 2 degrees of freedom")
    if V[0, 0] * V[1, 1] - V[0, 1] ** 2 <= 0.0:
        raise DegenerateFeatureError("singular pair scatter")
    a, b, g = (np.array([float(x)]) for x in atom)
    out = kernels.pair_loglik_matrix_numpy(
        V[0:1, 0], V[0:1, 1], V[1:2, 1], float(m), a, b, g, kernels.wishart2_const(m)
    )
    return float(out[0, 0])


def log_lik_diag(s2: float, m: int, a: float) -> float:
    """log density of the scatter V = m * s2 under V / a^2 ~ chi-square(m)."""
    if not s2 > 0:
        raise DegenerateFeatureError("sample variance must be positive")
    v = np.array([m * float(s2)])
    out = kernels.diag_loglik_matrix_numpy(v, float(m), np.array([float(a)]), kernels.chi2_const(m))
    return float(out[0, 0])


@dataclass
class LikelihoodTable:
    """Per-observation log-likelihoods at every atom: pairs (N x D) and diagonals (p x D)."""

    pairs: np.ndarray
    diags: np.ndarray

    @classmethod
    def build(cls, stats: SufficientStats, grid: SupportGrid) -> "LikelihoodTable":
        m = stats.dof
        if m < 2 and stats.p > 1:
            raise DataError("pair likelihoods need n >= 3")
        a, b, g = grid.a.copy(), grid.b.copy(), grid.gamma.copy()
        pairs = kernels.pair_loglik_matrix(
            stats.v11.copy(), stats.v12.copy(), stats.v22.copy(), float(m), a, b, g, kernels.wishart2_const(m)
        )
        diags = kernels.diag_loglik_matrix(stats.diag, float(m), a, kernels.chi2_const(m))
        if not (np.all(np.isfinite(pairs)) and np.all(np.isfinite(diags))):
            raise NumericalError("non-finite log-likelihood at a support atom")
        return cls(pairs=pairs, diags=diags)

    @property
    def n_obs(self) -> int:
        return self.pairs.shape[0] + self.diags.shape[0]


def _log_weights(w: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(w)


def composite_loglik(stats: SufficientStats, grid: SupportGrid, table: LikelihoodTable | None = None) -> float:
    """Sum over pairs and features of log sum_l w_l f(obs | atom_l)."""
    if not np.any(grid.weights > 0):
        raise ConfigError("all weights are zero")
    table = table or LikelihoodTable.build(stats, grid)
    logw = _log_weights(grid.weights)
    return kernels.mixture_loglik(table.pairs, logw) + kernels.mixture_loglik(table.diags, logw)


def em_step(table: LikelihoodTable, weights: np.ndarray) -> tuple[np.ndarray, float]:
    """One EM update of tied weights; also returns the composite log-likelihood at ``weights``.

    Responsibilities of an atom and its swap are pooled, averaged over the
    p(p+1)/2 observations and split evenly between the two.
    """
    D = weights.shape[0]
    h = D // 2
    logw = _log_weights(weights)
    acc = np.zeros(D)
    ll = kernels.accumulate_responsibilities(table.pairs, logw, acc)
    ll += kernels.accumulate_responsibilities(table.diags, logw, acc)
    half = (acc[:h] + acc[h:]) / (2.0 * table.n_obs)
    half = half / (2.0 * half.sum())
    return np.concatenate([half, half]), float(ll)


def em_fit(
    stats: SufficientStats,
    grid: SupportGrid,
    tol: float = 1e-4,
    max_iter: int = 200,
    table: LikelihoodTable | None = None,
) -> tuple[np.ndarray, FitReport]:
    """Maximise the composite likelihood over the grid weights.

    Stops once the relative change between successive log-likelihoods drops
    below ``tol`` or after ``max_iter`` updates. The returned weights are the
    ones whose log-likelihood is last in the trace.
    """
    if max_iter < 0:
        raise ConfigError("max_iter must be nonnegative")
    table = table or LikelihoodTable.build(stats, grid)
    w = grid.weights.copy()
    trace: list[float] = []
    converged = False
    iterations = 0
    while True:
        w_next, ll = em_step(table, w)
        if not math.isfinite(ll):
            raise NumericalError("composite log-likelihood became non-finite")
        trace.append(ll)
        if len(trace) > 1 and abs(ll - trace[-2]) <= tol * abs(trace[-2]):
            converged = True
            break
        if iterations == max_iter:
            break
        w = w_next
        iterations += 1
    return w, FitReport(loglik_trace=trace, iterations=iterations, converged=converged, grid=grid.with_weights(w))


# ---------------------------------------------------------------------------
# posterior means
# ---------------------------------------------------------------------------


def posterior_offdiag(stats: PairStats, grid: SupportGrid) -> float:
    """Posterior mean of a * b * gamma given one pair scatter."""
    ll = np.array([[log_lik_pair(stats, atom) for atom in grid.atoms]])
    vals = grid.a * grid.b * grid.gamma
    return float(kernels.posterior_mean_numpy(ll, _log_weights(grid.weights), vals)[0])


def posterior_diag(s2: float, m: int, grid: SupportGrid) -> float:
    """Posterior mean of a^2 given one feature's sample variance."""
    ll = np.array([[log_lik_diag(s2, m, a) for a in grid.a]])
    return float(kernels.posterior_mean_numpy(ll, _log_weights(grid.weights), grid.a**2)[0])


def pair_responsibilities(table: LikelihoodTable, weights: np.ndarray) -> np.ndarray:
    """N x D posterior atom probabilities for every pair."""
    z = table.pairs + _log_weights(weights)
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def posterior_matrix(stats: SufficientStats, grid: SupportGrid, table: LikelihoodTable | None = None) -> np.ndarray:
    """Fill a p x p matrix with posterior means: a^2 on the diagonal, a*b*gamma off it."""
    table = table or LikelihoodTable.build(stats, grid)
    logw = _log_weights(grid.weights)
    off = kernels.posterior_mean(table.pairs, logw, grid.a * grid.b * grid.gamma)
    diag = kernels.posterior_mean(table.diags, logw, grid.a**2)
    out = np.diag(diag)
    out[stats.j, stats.k] = off
    out[stats.k, stats.j] = off
    return out


# ---------------------------------------------------------------------------
# full estimator
# ---------------------------------------------------------------------------


def msg_estimate(
    X,
    K: int | None = None,
    Sigma=None,
    seed: int = 0,
    tol: float = 1e-4,
    max_iter: int = 200,
    gamma_clamp: float = GAMMA_CLAMP,
    sigma_floor: float | None = None,
) -> tuple[np.ndarray, FitReport]:
    """MSG covariance estimate of ``X`` (rows are samples).

    ``K`` defaults to p. Passing the population ``Sigma`` clusters the true
    (sigma_j, sigma_k, r_jk) instead of the sample triples (the oracle_msg
    variant); everything else is unchanged. The result is symmetric but not
    necessarily positive definite.
    """
    X = as_data_matrix(X, min_rows=3)
    p = X.shape[1]
    if p < 2:
        raise DimensionError("MSG needs at least two features")
    stats = SufficientStats.from_data(X)
    n_pairs = p * (p - 1) // 2
    K = p if K is None else int(K)
    if not 1 <= K <= n_pairs:
        raise ConfigError(f"K={K} must lie in [1, {n_pairs}] for p={p}")

    sample_triples = stats.triples()
    if sigma_floor is None:
        sigma_floor = SIGMA_FLOOR_REL * float(np.median(np.sqrt(stats.diag / stats.dof)))
    if Sigma is None:
        triples = sample_triples
    else:
        Sigma = np.asarray(Sigma, dtype=float)
        if Sigma.shape != (p, p):
            raise DimensionError(f"Sigma shape {Sigma.shape} does not match p={p}")
        triples = true_triples(Sigma)
    grid = build_support_grid(triples, K, gamma_clamp=gamma_clamp, sigma_floor=sigma_floor, seed=seed)

    table = LikelihoodTable.build(stats, grid)
    weights, report = em_fit(stats, grid, tol=tol, max_iter=max_iter, table=table)
    if not report.converged:
        log.debug("EM stopped after %d iterations without meeting tol=%g", report.iterations, tol)
    est = posterior_matrix(stats, report.grid, table)
    return est, report
