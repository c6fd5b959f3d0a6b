"""Hot numeric kernels with a numba path and a pure-numpy path.

Each kernel exists twice, ``*_numba`` and ``*_numpy``; the unsuffixed name is
bound to whichever backend :mod:`msgcov._accel` selected. The two paths agree
to rounding (the numba loops reduce in row order, numpy in pairwise order).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, multigammaln

from ._accel import USE_NUMBA, njit

LOG2 = math.log(2.0)


def wishart2_const(m: int) -> float:
    """log Gamma_2(m/2), the bivariate multivariate-gamma normaliser."""
    return float(multigammaln(0.5 * m, 2))


def chi2_const(m: int) -> float:
    return float(gammaln(0.5 * m))


# ---------------------------------------------------------------------------
# Wishart_2 log density of pair scatters, one row per pair, one column per atom
# ---------------------------------------------------------------------------


@njit
def pair_loglik_matrix_numba(v11, v12, v22, m, a, b, g, const):
    n_pairs = v11.shape[0]
    n_atoms = a.shape[0]
    out = np.empty((n_pairs, n_atoms))
    half_m = 0.5 * m
    for i in range(n_pairs):
        logdet_v = math.log(v11[i] * v22[i] - v12[i] * v12[i])
        base = 0.5 * (m - 3.0) * logdet_v - m * LOG2 - const
        for l in range(n_atoms):
            one_m_g2 = 1.0 - g[l] * g[l]
            quad = (
                v11[i] / (a[l] * a[l])
                - 2.0 * g[l] * v12[i] / (a[l] * b[l])
                + v22[i] / (b[l] * b[l])
            ) / one_m_g2
            logdet_s = 2.0 * math.log(a[l]) + 2.0 * math.log(b[l]) + math.log(one_m_g2)
            out[i, l] = base - 0.5 * quad - half_m * logdet_s
    return out


def pair_loglik_matrix_numpy(v11, v12, v22, m, a, b, g, const):
    v11 = v11[:, None]
    v12 = v12[:, None]
    v22 = v22[:, None]
    one_m_g2 = 1.0 - g * g
    logdet_v = np.log(v11 * v22 - v12 * v12)
    quad = (v11 / (a * a) - 2.0 * g * v12 / (a * b) + v22 / (b * b)) / one_m_g2
    logdet_s = 2.0 * np.log(a) + 2.0 * np.log(b) + np.log(one_m_g2)
    return (
        0.5 * (m - 3.0) * logdet_v - m * LOG2 - const - 0.5 * quad - 0.5 * m * logdet_s
    )


# ---------------------------------------------------------------------------
# scaled chi-square log density of diagonal scatters
# ---------------------------------------------------------------------------


@njit
def diag_loglik_matrix_numba(v, m, a, const):
    n_feat = v.shape[0]
    n_atoms = a.shape[0]
    out = np.empty((n_feat, n_atoms))
    for j in range(n_feat):
        base = 0.5 * (m - 2.0) * math.log(v[j]) - const
        for l in range(n_atoms):
            a2 = a[l] * a[l]
            out[j, l] = base - v[j] / (2.0 * a2) - 0.5 * m * math.log(2.0 * a2)
    return out


def diag_loglik_matrix_numpy(v, m, a, const):
    v = v[:, None]
    a2 = a * a
    return 0.5 * (m - 2.0) * np.log(v) - const - v / (2.0 * a2) - 0.5 * m * np.log(2.0 * a2)


# ---------------------------------------------------------------------------
# E-step: log-sum-exp per row, responsibility column sums
# ---------------------------------------------------------------------------


@njit
def accumulate_responsibilities_numba(loglik, logw, acc):
    """Add row-normalised responsibilities into ``acc``; return the sum of row log-mixtures."""
    n_rows, n_atoms = loglik.shape
    row = np.empty(n_atoms)
    total = 0.0
    for i in range(n_rows):
        mx = -np.inf
        for l in range(n_atoms):
            val = loglik[i, l] + logw[l]
            row[l] = val
            if val > mx:
                mx = val
        s = 0.0
        for l in range(n_atoms):
            e = math.exp(row[l] - mx)
            row[l] = e
            s += e
        total += mx + math.log(s)
        inv = 1.0 / s
        for l in range(n_atoms):
            acc[l] += row[l] * inv
    return total


def accumulate_responsibilities_numpy(loglik, logw, acc):
    z = loglik + logw
    mx = z.max(axis=1, keepdims=True)
    e = np.exp(z - mx)
    s = e.sum(axis=1)
    acc += (e / s[:, None]).sum(axis=0)
    return float(np.sum(mx[:, 0] + np.log(s)))


@njit
def mixture_loglik_numba(loglik, logw):
    n_rows, n_atoms = loglik.shape
    total = 0.0
    for i in range(n_rows):
        mx = -np.inf
        for l in range(n_atoms):
            val = loglik[i, l] + logw[l]
            if val > mx:
                mx = val
        s = 0.0
        for l in range(n_atoms):
            s += math.exp(loglik[i, l] + logw[l] - mx)
        total += mx + math.log(s)
    return total


def mixture_loglik_numpy(loglik, logw):
    z = loglik + logw
    mx = z.max(axis=1, keepdims=True)
    return float(np.sum(mx[:, 0] + np.log(np.exp(z - mx).sum(axis=1))))


# ---------------------------------------------------------------------------
# posterior means of an atom-level quantity
# ---------------------------------------------------------------------------


@njit
def posterior_mean_numba(loglik, logw, values):
    n_rows, n_atoms = loglik.shape
    out = np.empty(n_rows)
    for i in range(n_rows):
        mx = -np.inf
        for l in range(n_atoms):
            val = loglik[i, l] + logw[l]
            if val > mx:
                mx = val
        num = 0.0
        den = 0.0
        for l in range(n_atoms):
            e = math.exp(loglik[i, l] + logw[l] - mx)
            num += e * values[l]
            den += e
        out[i] = num / den
    return out


def posterior_mean_numpy(loglik, logw, values):
    z = loglik + logw
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return (e @ values) / e.sum(axis=1)


# ---------------------------------------------------------------------------
# k-means assignment
# ---------------------------------------------------------------------------


@njit
def nearest_centroid_numba(points, centroids):
    n, d = points.shape
    k = centroids.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dist = np.empty(n)
    for i in range(n):
        best = np.inf
        arg = 0
        for c in range(k):
            s = 0.0
            for t in range(d):
                diff = points[i, t] - centroids[c, t]
                s += diff * diff
            if s < best:
                best = s
                arg = c
        labels[i] = arg
        dist[i] = best
    return labels, dist


def nearest_centroid_numpy(points, centroids):
    # explicit differences (not the expanded-square trick) so ties match the loop version
    sq = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = sq.argmin(axis=1)
    return labels.astype(np.int64), sq[np.arange(points.shape[0]), labels]


if USE_NUMBA:
    pair_loglik_matrix = pair_loglik_matrix_numba
    diag_loglik_matrix = diag_loglik_matrix_numba
    accumulate_responsibilities = accumulate_responsibilities_numba
    mixture_loglik = mixture_loglik_numba
    posterior_mean = posterior_mean_numba
    nearest_centroid = nearest_centroid_numba
else:
    pair_loglik_matrix = pair_loglik_matrix_numpy
    diag_loglik_matrix = diag_loglik_matrix_numpy
    accumulate_responsibilities = accumulate_responsibilities_numpy
    mixture_loglik = mixture_loglik_numpy
    posterior_mean = posterior_mean_numpy
    nearest_centroid = nearest_centroid_numpy
