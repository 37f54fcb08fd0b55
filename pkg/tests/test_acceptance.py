"""Acceptance criteria, one test per criterion, each reporting PASS/FAIL."""

import math
import os
from collections import Counter
from pathlib import Path

import mpmath as mp
import numpy as np
import pytest
from scipy.stats import poisson

from mfmzip.mfm import MfmPrior, compute_vn, log_partition_prob, sample_partition, set_partitions
from mfmzip.posterior import dahl_select
from mfmzip.sampler import ClusterState, FitConfig, ZipMfmSampler, run_chain
from mfmzip.simgen import synthetic_design
from mfmzip.study import run_study
from mfmzip.zipoisson import link_mean, zip_pmf

REAL_SHOTS_ENV = "MFMZIP_REAL_SHOTS"
REAL_HISTORICAL_ENV = "MFMZIP_REAL_HISTORICAL"


# 1 -----------------------------------------------------------------------


def test_1_distribution_correctness(acceptance_report):
    k = np.arange(501)
    worst_sum = max(
        abs(float(zip_pmf(k, mu, rho).sum()) - 1.0) for mu in (0.1, 1, 10, 50) for rho in (0, 0.3, 0.9)
    )
    worst_pois = max(float(np.max(np.abs(zip_pmf(k, mu, 0.0) - poisson.pmf(k, mu)))) for mu in (0.1, 1, 10, 50))
    acceptance_report(
        "1 ZIP pmf normalisation and Poisson reduction",
        worst_sum < 1e-10 and worst_pois < 1e-14,
        f"max |sum - 1| = {worst_sum:.2e}, max |zip - poisson| = {worst_pois:.2e}",
    )


# 2 -----------------------------------------------------------------------


def vn_direct(n, t, psi, form):
    with mp.workdps(200):
        psi = mp.mpf(psi)
        total = mp.mpf(0)
        for kk in range(t, t + 600):
            if form == "shifted":
                pk = mp.exp(-psi) * psi ** (kk - 1) / mp.factorial(kk - 1)
            else:
                pk = mp.exp(-psi) * psi**kk / mp.factorial(kk) / (1 - mp.exp(-psi))
            total += mp.ff(kk, t) / mp.rf(kk, n) * pk
        return total


def test_2_vn_oracle(acceptance_report):
    worst = 0.0
    for form in ("shifted", "truncated"):
        for psi in (0.5, 1.0, 2.0):
            for n in (5, 20, 100):
                vn = compute_vn(n, 5, MfmPrior(psi, 1.0, form))
                for t in range(1, 6):
                    ref = vn_direct(n, t, psi, form)
                    got = mp.exp(mp.mpf(vn.log_v(t)))
                    worst = max(worst, float(abs(got / ref - 1)))
    acceptance_report("2 V_n matches 200-digit direct summation", worst < 1e-8, f"max rel err = {worst:.2e}")


# 3 -----------------------------------------------------------------------


def test_3_prior_law(acceptance_report):
    n, sweeps = 6, 10**6
    y = np.zeros((n, 1), dtype=np.int64)
    cfg = FitConfig(n_iter=2, n_burnin=1, likelihood=False, seed=20240601)
    s = ZipMfmSampler(y, np.ones((1, 1)), cfg)
    state = s.initial_state()
    counts = Counter()
    for _ in range(sweeps):
        s.update_labels(state)
        counts[tuple(state.z.tolist())] += 1
    vn = compute_vn(n, n, cfg.prior)
    parts = list(set_partitions(n))
    exact = np.array([math.exp(log_partition_prob(np.bincount(z), vn)) for z in parts])
    emp = np.array([counts.get(z, 0) for z in parts]) / sweeps
    assert sum(counts.values()) == sweeps and set(counts) <= set(parts)
    tv = 0.5 * float(np.abs(emp - exact).sum())
    acceptance_report("3 prior-only sampler matches enumerated partition law (n=6)", tv < 0.02, f"TV = {tv:.4f}")


# 4 -----------------------------------------------------------------------


def dahl_reference(Z):
    # materialises every membership matrix and the mean, in exact integers (T * mean)
    T = len(Z)
    A = np.array([[[int(a == b) for b in z] for a in z] for z in Z], dtype=np.int64)
    S = A.sum(axis=0)
    d = [int(np.sum((T * A[t] - S) ** 2)) for t in range(T)]
    return int(np.argmin(d))


def test_4_dahl_brute_force(acceptance_report):
    rng = np.random.default_rng(4)
    mismatches = 0
    for _ in range(100):
        T = int(rng.integers(1, 51))
        n = int(rng.integers(1, 21))
        Z = rng.integers(0, int(rng.integers(1, 6)), (T, n))
        if rng.random() < 0.3:  # repeated draws force exact ties
            Z[rng.integers(T, size=T // 2)] = Z[0]
        mismatches += dahl_select(Z)[0] != dahl_reference(Z.tolist())
    acceptance_report("4 Dahl selection matches brute force on 100 traces", mismatches == 0, f"{mismatches} mismatches")


# 5, 6 --------------------------------------------------------------------

DESK_CONFIG = FitConfig(n_iter=3000, n_burnin=1000)


@pytest.fixture(scope="module")
def desk_studies():
    return {kind: run_study(kind, "desk", 10, seed=0, config=DESK_CONFIG) for kind in ("balanced", "imbalanced")}


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["balanced", "imbalanced"])
def test_5_clustering_performance(desk_studies, kind, acceptance_report):
    st = desk_studies[kind]
    ri = {m: st.mean_ri(m) for m in ("mfm", "kmeans", "meanshift")}
    ok = st.cover_rate >= 0.8 and ri["mfm"] >= 0.9 and ri["mfm"] >= ri["kmeans"] >= ri["meanshift"]
    acceptance_report(
        f"5 desk-scale clustering ({kind})",
        ok,
        f"cover={st.cover_rate:.2f} RI mfm={ri['mfm']:.4f} kmeans={ri['kmeans']:.4f} meanshift={ri['meanshift']:.4f}",
    )


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["balanced", "imbalanced"])
def test_6_estimation_quality(desk_studies, kind, acceptance_report):
    m = desk_studies[kind].metrics()
    ok = bool(np.all(m.mab <= 0.10) and np.all((m.mcr >= 0.85) & (m.mcr <= 1.0)))
    acceptance_report(
        f"6 desk-scale estimation ({kind})",
        ok,
        "MAB=" + np.array2string(m.mab, precision=4) + " MCR=" + np.array2string(m.mcr, precision=3),
    )


# 7 -----------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.skipif(not os.environ.get(REAL_SHOTS_ENV), reason=f"set {REAL_SHOTS_ENV} to the public shot file")
def test_7_real_data(tmp_path, acceptance_report):
    import csv
    import json

    from mfmzip.cli import main
    from mfmzip.court import count_histogram, read_counts_csv

    shots = os.environ[REAL_SHOTS_ENV]
    historical = os.environ.get(REAL_HISTORICAL_ENV, shots)
    rc = main([
        "pipeline", "--shots", shots, "--historical", historical, "--reflect",
        "--iters", "15000", "--burnin", "5000", "--out", str(tmp_path),
    ])
    counts = read_counts_csv(tmp_path / "ingest" / "counts.csv")
    info = json.loads((tmp_path / "summary" / "summary.json").read_text())
    with open(tmp_path / "summary" / "estimates.csv") as fh:
        header = next(csv.reader(fh))
    ok = rc == 0 and 3 <= info["k_hat"] <= 6 and header[2:] == ["rho"] + [f"beta{m}" for m in range(6)]
    detail = f"rc={rc} k_hat={info['k_hat']} n={counts.n}"
    if "Clint Capela" in counts.player_ids:
        h = count_histogram(counts, counts.player_ids.index("Clint Capela"))
        ok &= [h[k] for k in (0, 1, 2, 3, 4, 5, "6+")] == [1123, 25, 8, 2, 4, 0, 13]
        detail += f" capela={h}"
    acceptance_report("7 real-data protocol", ok, detail)


# 8 -----------------------------------------------------------------------

GEWEKE_N, GEWEKE_J, GEWEKE_P, GEWEKE_SD = 10, 50, 3, 0.5
GEWEKE_ITERS = 80_000
GEWEKE_STATS = ("k", "beta0 of player 0", "beta1 of player 0", "rho of player 0", "z0 == z1", "mean y", "zero fraction")


def geyer_mcse(x):
    """Monte Carlo standard error from the initial monotone sequence estimator."""
    x = np.asarray(x, float) - np.mean(x)
    T = len(x)
    f = np.fft.rfft(x, 2 * T)
    acov = np.fft.irfft(f * np.conj(f))[:T] / T
    if acov[0] == 0:
        return 0.0
    pairs = acov[: 2 * (T // 2)].reshape(-1, 2).sum(axis=1)
    stop = np.argmax(pairs <= 0) if np.any(pairs <= 0) else len(pairs)
    pairs = np.minimum.accumulate(pairs[:stop])
    tau_var = max(-acov[0] + 2 * pairs.sum(), acov[0])
    return math.sqrt(tau_var / T)


def geweke_model():
    X = synthetic_design(GEWEKE_J, GEWEKE_P - 1, np.random.default_rng(0))
    cfg = FitConfig(n_iter=2, n_burnin=1, sigma0_scale=GEWEKE_SD, adapt=False, rw_step=1.0, seed=81)
    return X, cfg, compute_vn(GEWEKE_N, GEWEKE_N, cfg.prior)


def draw_params(vn, rng):
    z = sample_partition(vn, rng)
    k = int(z.max()) + 1
    return z, rng.normal(0, GEWEKE_SD, (k, GEWEKE_P)), rng.uniform(0, 1, k)


def draw_counts(X, z, betas, rhos, rng):
    mu = link_mean(X, betas.T).T[z]
    w = rng.random(mu.shape) < rhos[z][:, None]
    return np.where(w, 0, rng.poisson(mu)), w


def geweke_stats(z, betas, rhos, y):
    return [z.max() + 1, betas[z[0], 0], betas[z[0], 1], rhos[z[0]], float(z[0] == z[1]), y.mean(), (y == 0).mean()]


def synthetic_counts_for_determinism():
    rng = np.random.default_rng(84)
    X = synthetic_design(60, 2, rng)
    z = np.repeat([0, 1], 4)
    mu = link_mean(X, np.array([[0.3, 0.2, -0.1], [-1.0, 0.2, -0.1]]).T).T[z]
    return np.where(rng.random(mu.shape) < 0.2, 0, rng.poisson(mu)), X


@pytest.mark.slow
def test_8_sampler_sanity(acceptance_report):
    X, cfg, vn = geweke_model()
    rng = np.random.default_rng(82)
    fwd = []
    for _ in range(GEWEKE_ITERS):
        params = draw_params(vn, rng)
        fwd.append(geweke_stats(*params, draw_counts(X, *params, rng)[0]))
    fwd = np.array(fwd)

    # successive conditional: one full sweep, then fresh data given the parameters
    z, betas, rhos = draw_params(vn, rng)
    y, w = draw_counts(X, z, betas, rhos, rng)
    s = ZipMfmSampler(y, X, cfg)
    state = ClusterState(z, betas, rhos, w, cfg.psi, vn)
    chain = []
    for _ in range(GEWEKE_ITERS):
        s.sweep(state)
        y, state.w = draw_counts(X, state.z, state.betas, state.rhos, s.rng)
        s.set_counts(y)
        chain.append(geweke_stats(state.z, state.betas, state.rhos, y))
    chain = np.array(chain)

    zs = []
    for j in range(fwd.shape[1]):
        se = math.hypot(fwd[:, j].std(ddof=1) / math.sqrt(GEWEKE_ITERS), geyer_mcse(chain[:, j]))
        zs.append((chain[:, j].mean() - fwd[:, j].mean()) / se)
    geweke_ok = all(abs(v) < 3 for v in zs)

    y, X2 = synthetic_counts_for_determinism()
    run_cfg = FitConfig(n_iter=200, n_burnin=50, seed=83)
    a, b = run_chain(y, X2, run_cfg), run_chain(y, X2, run_cfg)
    same = (
        np.array_equal(a.z, b.z)
        and np.array_equal(a.logpost, b.logpost)
        and all(np.array_equal(u, v) for u, v in zip(a.betas, b.betas))
        and all(np.array_equal(u, v) for u, v in zip(a.rhos, b.rhos))
    )
    detail = ", ".join(f"{name}: z={v:+.2f}" for name, v in zip(GEWEKE_STATS, zs))
    acceptance_report("8 Geweke joint-distribution test and seeded reproducibility", geweke_ok and same,
                      f"{detail}; identical traces={same}")

