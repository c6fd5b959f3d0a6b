import json
import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.stats as st
from scipy.special import logsumexp

from msgcov import kernels
from msgcov._accel import BACKEND, HAS_NUMBA


def random_pairs(rng, n_pairs, m):
    V = np.array([st.wishart.rvs(df=m, scale=np.array([[1.0, 0.3], [0.3, 2.0]]), random_state=rng) for _ in range(n_pairs)])
    return V[:, 0, 0].copy(), V[:, 0, 1].copy(), V[:, 1, 1].copy()


def random_atoms(rng, D):
    return rng.uniform(0.5, 2.0, D), rng.uniform(0.5, 2.0, D), rng.uniform(-0.95, 0.95, D)


class TestPairLoglik:
    def test_matches_scipy_wishart(self):
        rng = np.random.default_rng(0)
        m = 11
        v11, v12, v22 = random_pairs(rng, 6, m)
        a, b, g = random_atoms(rng, 4)
        out = kernels.pair_loglik_matrix(v11, v12, v22, float(m), a, b, g, kernels.wishart2_const(m))
        for i in range(6):
            V = np.array([[v11[i], v12[i]], [v12[i], v22[i]]])
            for l in range(4):
                C = np.array([[a[l] ** 2, g[l] * a[l] * b[l]], [g[l] * a[l] * b[l], b[l] ** 2]])
                assert out[i, l] == pytest.approx(st.wishart.logpdf(V, df=m, scale=C), rel=1e-11)

    @pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")
    def test_backends_agree(self):
        rng = np.random.default_rng(1)
        m = 29
        v11, v12, v22 = random_pairs(rng, 50, m)
        a, b, g = random_atoms(rng, 16)
        args = (v11, v12, v22, float(m), a, b, g, kernels.wishart2_const(m))
        np.testing.assert_allclose(
            kernels.pair_loglik_matrix_numba(*args), kernels.pair_loglik_matrix_numpy(*args), rtol=1e-12, atol=1e-12
        )


class TestDiagLoglik:
    def test_matches_scipy_chi2(self):
        rng = np.random.default_rng(2)
        m = 9
        v = rng.chisquare(m, size=5) * 1.3
        a = rng.uniform(0.5, 2.0, 3)
        out = kernels.diag_loglik_matrix(v, float(m), a, kernels.chi2_const(m))
        for i in range(5):
            for l in range(3):
                # V = a^2 * chi2_m
                ref = st.chi2.logpdf(v[i] / a[l] ** 2, m) - 2 * np.log(a[l])
                assert out[i, l] == pytest.approx(ref, rel=1e-12)

    @pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")
    def test_backends_agree(self):
        rng = np.random.default_rng(3)
        v = rng.chisquare(20, size=40)
        a = rng.uniform(0.3, 3.0, 12)
        args = (v, 20.0, a, kernels.chi2_const(20))
        np.testing.assert_allclose(kernels.diag_loglik_matrix_numba(*args), kernels.diag_loglik_matrix_numpy(*args), rtol=1e-13)


class TestMixtureKernels:
    rng = np.random.default_rng(4)
    L = rng.normal(-50, 20, size=(30, 7))
    w = rng.dirichlet(np.ones(7))
    logw = np.log(w)

    def test_mixture_loglik_oracle(self):
        ref = logsumexp(self.L + self.logw, axis=1).sum()
        assert kernels.mixture_loglik(self.L, self.logw) == pytest.approx(ref, rel=1e-13)

    def test_accumulate_oracle(self):
        acc = np.full(7, 0.5)
        total = kernels.accumulate_responsibilities(self.L, self.logw, acc)
        z = self.L + self.logw
        resp = np.exp(z - logsumexp(z, axis=1, keepdims=True))
        np.testing.assert_allclose(acc, 0.5 + resp.sum(axis=0), rtol=1e-12)
        assert total == pytest.approx(logsumexp(z, axis=1).sum(), rel=1e-13)

    def test_posterior_mean_oracle(self):
        vals = self.rng.normal(size=7)
        z = self.L + self.logw
        resp = np.exp(z - logsumexp(z, axis=1, keepdims=True))
        np.testing.assert_allclose(kernels.posterior_mean(self.L, self.logw, vals), resp @ vals, rtol=1e-12, atol=1e-15)

    def test_extreme_logliks_stay_finite(self):
        L = np.array([[-1e5, -1e5 - 1.0], [-800.0, -2000.0]])
        logw = np.log([0.5, 0.5])
        assert np.isfinite(kernels.mixture_loglik(L, logw))
        out = kernels.posterior_mean(L, logw, np.array([1.0, 0.0]))
        np.testing.assert_allclose(out, [1 / (1 + np.exp(-1.0)), 1.0], rtol=1e-12)

    @pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")
    def test_backends_agree(self):
        vals = self.rng.normal(size=7)
        acc1, acc2 = np.zeros(7), np.zeros(7)
        t1 = kernels.accumulate_responsibilities_numba(self.L, self.logw, acc1)
        t2 = kernels.accumulate_responsibilities_numpy(self.L, self.logw, acc2)
        assert t1 == pytest.approx(t2, rel=1e-13)
        np.testing.assert_allclose(acc1, acc2, rtol=1e-12)
        assert kernels.mixture_loglik_numba(self.L, self.logw) == pytest.approx(
            kernels.mixture_loglik_numpy(self.L, self.logw), rel=1e-13
        )
        np.testing.assert_allclose(
            kernels.posterior_mean_numba(self.L, self.logw, vals),
            kernels.posterior_mean_numpy(self.L, self.logw, vals),
            rtol=1e-12,
            atol=1e-15,
        )


class TestNearestCentroid:
    def test_brute_force(self):
        rng = np.random.default_rng(5)
        P, C = rng.normal(size=(40, 3)), rng.normal(size=(5, 3))
        labels, dist = kernels.nearest_centroid(P, C)
        for i in range(40):
            d = [np.sum((P[i] - c) ** 2) for c in C]
            assert labels[i] == int(np.argmin(d))
            assert dist[i] == pytest.approx(min(d), rel=1e-14)

    def test_ties_go_to_first(self):
        P = np.array([[0.0, 0.0, 0.0]])
        C = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
        assert kernels.nearest_centroid(P, C)[0][0] == 0

    @pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")
    def test_backends_agree(self):
        rng = np.random.default_rng(6)
        P, C = rng.normal(size=(300, 3)), rng.normal(size=(20, 3))
        l1, d1 = kernels.nearest_centroid_numba(P, C)
        l2, d2 = kernels.nearest_centroid_numpy(P, C)
        np.testing.assert_array_equal(l1, l2)
        np.testing.assert_array_equal(d1, d2)


SCRIPT = """
import json, sys
import numpy as np
import msgcov
from msgcov.gmodel import msg_estimate
from msgcov.sim import ModelSpec, make_sigma, sample_mvn
X = sample_mvn(make_sigma(ModelSpec(2, 12)), 30, seed=7)
est, rep = msg_estimate(X, K=12, seed=3)
json.dump({"backend": msgcov.BACKEND, "est": est.tolist(), "trace": rep.loglik_trace}, sys.stdout)
"""


def run_backend(env_extra):
    env = {k: v for k, v in os.environ.items() if not k.startswith("MSGCOV_")}
    env.update(env_extra)
    out = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


class TestBackendSwitch:
    def test_env_flag_selects_numpy(self):
        res = run_backend({"MSGCOV_BACKEND": "numpy"})
        assert res["backend"] == "numpy"
        res = run_backend({"MSGCOV_DISABLE_NUMBA": "1"})
        assert res["backend"] == "numpy"

    @pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")
    def test_end_to_end_agreement(self):
        a = run_backend({"MSGCOV_BACKEND": "numpy"})
        b = run_backend({"MSGCOV_BACKEND": "numba", "MSGCOV_DISABLE_NUMBA": "0"})
        assert b["backend"] == "numba"
        np.testing.assert_allclose(a["est"], b["est"], rtol=1e-10, atol=1e-12)
        assert len(a["trace"]) == len(b["trace"])
        np.testing.assert_allclose(a["trace"], b["trace"], rtol=1e-10)

    def test_in_process_backend_label(self):
        assert BACKEND in ("numba", "numpy")
