"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``ACCEPTANCE <k> PASS|FAIL`` line with the measured
quantities, then asserts. Run with ``pytest tests/test_acceptance.py -v``.
"""

import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest
import scipy.stats as st

from msgcov.baselines import linear_risk_estimate, lw_estimate, optimal_linear_estimate
from msgcov.bench import BenchConfig, MethodSpec, eigen_diagnostic, run_benchmark, split_eval
from msgcov.gmodel import (
    LikelihoodTable,
    SufficientStats,
    SupportGrid,
    build_support_grid,
    composite_loglik,
    em_fit,
    posterior_offdiag,
)
from msgcov.linalg import PairStats
from msgcov.posdef import correct_pd
from msgcov.sim import ModelSpec, make_sigma, sample_mvn


@pytest.fixture
def report(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {k} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return emit


def test_01_linear_rule_equals_ledoit_wolf(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(100):
        X = rng.normal(size=(50, 20)) * rng.uniform(0.5, 2.0, size=20)
        worst = max(worst, float(np.abs(optimal_linear_estimate(X) - lw_estimate(X)).max()))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 10
    report(1, ok, f"max |optimal_linear - lw| = {worst:.2e} over 100 sets, {elapsed:.2f}s")
    assert ok


def _risk_gap(Sigma, n, reps, beta_S, beta_I, rng, batch=2000):
    """Per-replicate (risk estimate - realized loss) minus a mean-zero control variate."""
    p = Sigma.shape[0]
    L = np.linalg.cholesky(Sigma)
    C = (1 - beta_S) * Sigma - beta_I * np.eye(p)
    out = []
    for start in range(0, reps, batch):
        b = min(batch, reps - start)
        X = rng.standard_normal((b, n, p)) @ L.T
        S = np.einsum("rij,rik->rjk", X, X) / n
        P2 = np.einsum("rij,rik->rjk", X * X, X * X)
        D2 = np.maximum((P2 - n * S * S) / n**2, 0.0)
        resid = (1 - beta_S) * S - beta_I * np.eye(p)
        risk = ((2 * beta_S - 1) * D2 + resid**2).sum(axis=(1, 2)) / p**2
        loss = ((beta_S * S + beta_I * np.eye(p) - Sigma) ** 2).sum(axis=(1, 2)) / p**2
        # E[s - sigma] = 0, so this term has mean zero and only adds noise
        cv = 2 * ((S - Sigma) * C).sum(axis=(1, 2)) / p**2
        out.append(risk - loss - cv)
    return np.concatenate(out)


def test_02_risk_estimate_bias(report):
    t0 = time.perf_counter()
    Sigma = make_sigma(ModelSpec(3, 5))
    p = 5
    beta_S, beta_I = 0.7, 0.3
    rng = np.random.default_rng(202)

    # spot-check the vectorised risk against the library for one data set
    X = sample_mvn(Sigma, 25, seed=1)
    S = X.T @ X / 25
    D2 = np.maximum(((X * X).T @ (X * X) - 25 * S * S) / 625, 0)
    direct = ((2 * beta_S - 1) * D2 + ((1 - beta_S) * S - beta_I * np.eye(p)) ** 2).sum() / p**2
    assert direct == pytest.approx(linear_risk_estimate(X, beta_S, beta_I), rel=1e-12)

    frob2, tr2 = float((Sigma**2).sum()), float(np.trace(Sigma) ** 2)
    lines, gaps, ok = [], [], True
    for n in (25, 50, 100):
        d = _risk_gap(Sigma, n, 20_000, beta_S, beta_I, rng)
        obs, se = d.mean(), d.std(ddof=1) / np.sqrt(d.size)
        # E||S - Sigma||_F^2 = (||Sigma||_F^2 + tr(Sigma)^2) / n for zero-mean normal data
        target = -(2 * beta_S - 1) / n * (frob2 + tr2) / n / p**2
        z = (obs - target) / se
        ok &= abs(z) <= 3
        gaps.append(abs(obs))
        lines.append(f"n={n}: obs={obs:.3e} target={target:.3e} z={z:+.2f}")
    monotone = gaps[0] > gaps[1] > gaps[2]
    elapsed = time.perf_counter() - t0
    ok = ok and monotone and elapsed < 120
    report(2, ok, "; ".join(lines) + f"; monotone={monotone}; {elapsed:.1f}s")
    assert ok


def _naive_em_step(stats, grid):
    p, m, D = stats.p, stats.dof, grid.D
    h = D // 2
    w = grid.weights
    f1 = lambda v, a: st.chi2.pdf(v / a**2, m) / a**2
    f2 = lambda V, a, b, g: st.wishart.pdf(V, df=m, scale=np.array([[a * a, a * b * g], [a * b * g, b * b]]))
    diag_dens = np.array([[f1(v, grid.a[l]) for l in range(D)] for v in stats.diag])
    pair_dens = np.array([[f2(stats.pair(i).scatter, *grid.atoms[l]) for l in range(D)] for i in range(len(stats.j))])
    new = np.zeros(D)
    for t in range(h):
        total = 0.0
        for dens in (diag_dens, pair_dens):
            for row in dens:
                total += w[t] * (row[t] + row[t + h]) / np.dot(w, row)
        new[t] = new[t + h] = total / (p * (p + 1))
    return new


def test_03_em_correctness(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    worst_drop, worst_rel, tied = 0.0, 0.0, True
    for inst in range(20):
        p = (5, 10)[inst % 2]
        D = (4, 8)[(inst // 2) % 2]
        A = rng.normal(size=(p, p)) / np.sqrt(p)
        X = rng.normal(size=(30, p)) @ (np.eye(p) + A)
        stats = SufficientStats.from_data(X)
        grid = build_support_grid(stats.triples(), K=D // 2, seed=inst)
        table = LikelihoodTable.build(stats, grid)

        # trace from the fitted path, recomputed independently at each weight vector
        w, rep = em_fit(stats, grid, tol=0.0, max_iter=60, table=table)
        trace = np.array(rep.loglik_trace)
        worst_drop = max(worst_drop, float(np.max(trace[:-1] - trace[1:], initial=0.0)))
        assert composite_loglik(stats, grid.with_weights(w), table) == pytest.approx(trace[-1], rel=1e-12)
        tied &= bool(np.array_equal(w[: D // 2], w[D // 2 :]))

        w1, _ = em_fit(stats, grid, tol=0.0, max_iter=1, table=table)
        ref = _naive_em_step(stats, grid)
        worst_rel = max(worst_rel, float(np.max(np.abs(w1 - ref) / ref)))
    elapsed = time.perf_counter() - t0
    ok = worst_drop <= 1e-8 and tied and worst_rel <= 1e-10 and elapsed < 60
    report(3, ok, f"max trace drop {worst_drop:.1e}, tied={tied}, one-step rel err {worst_rel:.1e}, {elapsed:.1f}s")
    assert ok


def test_04_exact_prior_rule_beats_perturbations(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    # three atoms with a = b, so the swap-tied grid is exactly this prior
    # close atoms, so the posterior stays genuinely uncertain at n = 40
    half = np.array([[1.0, 1.0, 0.3], [1.2, 1.2, 0.15], [0.9, 0.9, 0.0]])
    prior_w = np.array([0.5, 0.3, 0.2])
    grid = SupportGrid.from_half(half, prior_w)
    n, N = 40, 5000
    draws = rng.choice(3, size=N, p=prior_w)
    theta = half[draws, 0] * half[draws, 1] * half[draws, 2]
    est = np.empty(N)
    for i, t in enumerate(draws):
        a, b, g = half[t]
        C = np.array([[a * a, g * a * b], [g * a * b, b * b]])
        Z = rng.multivariate_normal(np.zeros(2), C, size=n)
        Zc = Z - Z.mean(axis=0)
        est[i] = posterior_offdiag(PairStats(Zc.T @ Zc, n - 1, 0, 1), grid)
    err = est - theta
    mse = float(np.mean(err**2))
    eps = rng.uniform(0.01, 0.2, size=50) * rng.choice([-1.0, 1.0], size=50)
    perturbed = np.array([np.mean((err + e) ** 2) for e in eps])
    margin = float((perturbed - mse).min())
    elapsed = time.perf_counter() - t0
    ok = margin > 0 and elapsed < 120
    report(4, ok, f"exact-prior MSE {mse:.5f}, smallest excess of 50 perturbed rules {margin:.2e}, {elapsed:.1f}s")
    assert ok


def test_05_pd_correction(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(505)
    min_eig, indefinite, drift = np.inf, 0, 0.0
    for _ in range(100):
        A = rng.normal(size=(20, 20))
        B = (A + A.T) / 2
        w = np.linalg.eigvalsh(B)
        indefinite += int(w[0] < 0 < w[-1])
        min_eig = min(min_eig, float(np.linalg.eigvalsh(correct_pd(B))[0]))
        P = A @ A.T + 0.01 * np.eye(20)
        drift = max(drift, float(np.abs(correct_pd(P) - P).max()))
    elapsed = time.perf_counter() - t0
    ok = indefinite == 100 and min_eig > 0 and drift <= 1e-10 and elapsed < 10
    report(5, ok, f"{indefinite}/100 indefinite inputs, min output eigenvalue {min_eig:.2e}, PD drift {drift:.1e}, {elapsed:.2f}s")
    assert ok


def _medians(records):
    return {(r.model_id, r.method): r.median_loss for r in records}


def test_06_msgcor_beats_sample_and_linear(report):
    t0 = time.perf_counter()
    cfg = BenchConfig(
        models=[ModelSpec(m, 100) for m in (1, 2, 3, 4)],
        n=100,
        replicates=50,
        methods=[MethodSpec("msgcor"), MethodSpec("sample"), MethodSpec("linear")],
        seed=606,
        K_factor=1.0,
    )
    recs = run_benchmark(cfg)
    med = _medians(recs)
    fit_s = np.mean([r.mean_seconds for r in recs if r.method == "msgcor"])
    beats_sample = {m: med[m, "msgcor"] < med[m, "sample"] for m in (1, 2, 3, 4)}
    beats_linear2 = med[2, "msgcor"] < med[2, "linear"]
    elapsed = time.perf_counter() - t0
    ok = all(beats_sample.values()) and beats_linear2 and elapsed < 1800
    table = "; ".join(
        f"M{m}: msgcor {med[m, 'msgcor']:.4f} sample {med[m, 'sample']:.4f} linear {med[m, 'linear']:.4f}"
        for m in (1, 2, 3, 4)
    )
    report(6, ok, f"{table}; mean msgcor fit {fit_s:.2f}s; {elapsed:.0f}s total")
    assert ok


def test_07_loss_flat_in_k(report):
    t0 = time.perf_counter()
    med = {}
    for r in (2.0, 1.0, 0.5, 0.25):
        cfg = BenchConfig(
            models=[ModelSpec(1, 100)], n=100, replicates=25, methods=[MethodSpec("msgcor")], seed=707, K_factor=r
        )
        med[r] = run_benchmark(cfg)[0].median_loss
    spread = max(med.values()) - min(med.values())
    ratio = spread / med[1.0]
    elapsed = time.perf_counter() - t0
    ok = ratio <= 0.15
    vals = ", ".join(f"r={r}: {v:.4f}" for r, v in med.items())
    report(7, ok, f"{vals}; spread/K=p value {ratio:.3f}; {elapsed:.0f}s")
    assert ok


def test_08_eigenvector_distance_ordering(report):
    t0 = time.perf_counter()
    d2 = eigen_diagnostic(ModelSpec(2, 100), 100, 25, seed=808)
    d6 = eigen_diagnostic(ModelSpec(6, 100), 100, 25, seed=808)
    elapsed = time.perf_counter() - t0
    ok = d2.median > d6.median
    report(
        8,
        ok,
        f"median eigenvector distance model 2 {d2.median:.3f} [{d2.q25:.3f}, {d2.q75:.3f}] vs "
        f"model 6 {d6.median:.3f} [{d6.q25:.3f}, {d6.q75:.3f}]; {elapsed:.1f}s",
    )
    assert ok


def test_09_split_eval_substitute(report):
    t0 = time.perf_counter()
    X = sample_mvn(make_sigma(ModelSpec(2, 50)), 15, seed=909)
    methods = ["msgcor", "sample"]
    a = split_eval(X, methods, train_n=10, repeats=100, seed=9, model_id=2)
    b = split_eval(X, methods, train_n=10, repeats=100, seed=9, model_id=2)
    same = [(r.median_loss, r.q25, r.q75) for r in a] == [(r.median_loss, r.q25, r.q75) for r in b]
    med = {r.method: r.median_loss for r in a}
    elapsed = time.perf_counter() - t0
    ok = same and med["msgcor"] <= med["sample"]
    report(9, ok, f"deterministic={same}; median msgcor {med['msgcor']:.4f} vs sample {med['sample']:.4f}; {elapsed:.1f}s")
    assert ok


def test_10_benchmark_cli_determinism(report, tmp_path):
    t0 = time.perf_counter()
    cfg = {
        "models": [{"model_id": 1, "p": 20}, {"model_id": 6, "p": 20, "seed": 3}],
        "n": 30,
        "replicates": 8,
        "methods": ["msgcor", "sample", "linear", "adap", "nercome", "oracle_nonlin"],
        "seed": 1010,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    outputs = {}
    for workers in (1, 4):
        for run in (0, 1):
            out = tmp_path / f"w{workers}_r{run}.csv"
            subprocess.run(
                [sys.executable, "-m", "msgcov.cli", "benchmark", "--config", str(path), "--output", str(out),
                 "--workers", str(workers), "--no-timing"],
                check=True,
                env=os.environ.copy(),
            )
            outputs[workers, run] = out.read_bytes()
    same_1 = outputs[1, 0] == outputs[1, 1]
    same_4 = outputs[4, 0] == outputs[4, 1]
    cross = outputs[1, 0] == outputs[4, 0]
    elapsed = time.perf_counter() - t0
    ok = same_1 and same_4 and cross
    report(10, ok, f"byte-identical at 1 worker={same_1}, at 4 workers={same_4}, across worker counts={cross}; {elapsed:.1f}s")
    assert ok
