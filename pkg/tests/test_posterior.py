import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfmzip.posterior import (
    dahl_select,
    hpd_interval,
    hpd_intervals,
    mean_membership,
    membership_matrix,
    sim_metrics,
    summarize,
)
from mfmzip.sampler import MCMCTrace


def brute_dahl(Z):
    # exact rational arithmetic: T^2 * distance is an integer
    T, n = len(Z), len(Z[0])
    A = [[[int(z[i] == z[j]) for j in range(n)] for i in range(n)] for z in Z]
    S = [[sum(A[t][i][j] for t in range(T)) for j in range(n)] for i in range(n)]
    d = [sum((T * A[t][i][j] - S[i][j]) ** 2 for i in range(n) for j in range(n)) for t in range(T)]
    return d.index(min(d))


def make_trace(Z, betas, rhos):
    T = len(Z)
    return MCMCTrace(
        z=np.asarray(Z),
        betas=[np.asarray(b, float) for b in betas],
        rhos=[np.asarray(r, float) for r in rhos],
        psi=np.ones(T),
        k=np.array([len(r) for r in rhos]),
        logpost=np.zeros(T),
        iteration=np.arange(T),
    )


def test_membership():
    A = membership_matrix([0, 0, 1])
    assert A.tolist() == [[1, 1, 0], [1, 1, 0], [0, 0, 1]]
    np.testing.assert_allclose(mean_membership([[0, 0, 1], [0, 1, 1]])[0], [1, 0.5, 0])


def test_dahl_single_draw():
    assert dahl_select(np.array([[2, 0, 2]]))[0] == 0


def test_dahl_hand_case():
    t, z = dahl_select(np.array([[1, 1, 2], [1, 1, 2], [1, 2, 2]]))
    assert t == 0 and z.tolist() == [1, 1, 2]


def test_dahl_ties_earliest():
    t, _ = dahl_select(np.array([[0, 1], [0, 0], [0, 1], [0, 0]]))
    assert t == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 50), st.integers(1, 20), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_dahl_brute_force(T, n, k, seed):
    Z = np.random.default_rng(seed).integers(0, k, (T, n))
    assert dahl_select(Z)[0] == brute_dahl(Z.tolist())


def test_dahl_rejects_empty():
    with pytest.raises(ValueError):
        dahl_select(np.zeros((0, 3), int))


def test_hpd_basic():
    assert hpd_interval([2.5]) == (2.5, 2.5)
    x = np.random.default_rng(0).standard_normal(10**4)
    lo, hi = hpd_interval(x)
    assert lo == pytest.approx(-1.96, abs=0.06) and hi == pytest.approx(1.96, abs=0.06)
    med = np.median(x)
    assert (hi - med) - (med - lo) == pytest.approx(0, abs=0.08)


def test_hpd_uniform_width():
    u = np.random.default_rng(1).uniform(size=10**5)
    lo, hi = hpd_interval(u)
    assert hi - lo == pytest.approx(0.95, abs=0.01)


def test_hpd_skewed_is_shortest():
    x = np.random.default_rng(2).exponential(size=20000)
    lo, hi = hpd_interval(x)
    assert lo < 0.01
    q = np.quantile(x, [0.025, 0.975])
    assert hi - lo < q[1] - q[0]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=60), st.floats(0.05, 1.0))
def test_hpd_brute_force(xs, level):
    x = sorted(xs)
    T = len(x)
    m = math.ceil(level * T)
    widths = [x[i + m - 1] - x[i] for i in range(T - m + 1)]
    i = widths.index(min(widths))
    assert hpd_interval(xs, level) == (x[i], x[i + m - 1])
    np.testing.assert_array_equal(hpd_intervals(np.array(xs)[:, None], level)[0], [x[i], x[i + m - 1]])


def test_hpd_errors():
    with pytest.raises(ValueError):
        hpd_interval([])
    with pytest.raises(ValueError):
        hpd_interval([1.0], level=0)


def test_summarize_constant_trace():
    Z = [[0, 0, 1]] * 4
    betas = [[[1.0, 2.0], [3.0, 4.0]]] * 4
    rhos = [[0.1, 0.6]] * 4
    s = summarize(make_trace(Z, betas, rhos))
    assert s.k_hat == 2 and s.cluster_sizes.tolist() == [2, 1]
    np.testing.assert_array_equal(s.player_beta, [[1, 2], [1, 2], [3, 4]])
    np.testing.assert_array_equal(s.beta_hpd[..., 1] - s.beta_hpd[..., 0], 0.0)
    np.testing.assert_array_equal(s.estimates_table(), [[0.1, 1, 2], [0.6, 3, 4]])


def test_summarize_label_switching_invariant():
    # second draw swaps the labels; per-player values must be unaffected
    Z = [[0, 0, 1], [1, 1, 0]]
    betas = [[[1.0], [5.0]], [[5.0], [1.0]]]
    rhos = [[0.2, 0.7], [0.7, 0.2]]
    s = summarize(make_trace(Z, betas, rhos))
    np.testing.assert_array_equal(s.player_beta[:, 0], [1, 1, 5])
    np.testing.assert_array_equal(s.player_rho, [0.2, 0.2, 0.7])


def test_sim_metrics_perfect():
    truth = np.random.default_rng(0).standard_normal((5, 3))
    est = np.repeat(truth[None], 4, axis=0)
    iv = np.stack([est - 0.1, est + 0.1], axis=-1)
    m = sim_metrics(est, truth, iv)
    for v in (m.mab, m.msd, m.mmse):
        np.testing.assert_array_equal(v, 0.0)
    np.testing.assert_array_equal(m.mcr, 1.0)


def test_sim_metrics_by_hand():
    truth = np.array([[0.0], [1.0]])
    est = np.array([[[0.1], [1.2]], [[-0.3], [1.0]]])
    iv = np.array([[[[-1, 1]], [[1.1, 2]]], [[[-1, 0.5]], [[0, 2]]]], dtype=float)
    m = sim_metrics(est, truth, iv)
    assert m.mab[0] == pytest.approx((0.1 + 0.2 + 0.3 + 0.0) / 4)
    assert m.mmse[0] == pytest.approx((0.01 + 0.04 + 0.09 + 0.0) / 4)
    sd0 = np.std([0.1, -0.3], ddof=1)
    sd1 = np.std([1.2, 1.0], ddof=1)
    assert m.msd[0] == pytest.approx((sd0 + sd1) / 2)
    assert m.mcr[0] == pytest.approx(3 / 4)


def test_sim_metrics_single_replicate():
    m = sim_metrics(np.zeros((1, 2, 2)), np.zeros((2, 2)))
    assert np.isnan(m.msd).all() and np.isnan(m.mcr).all()
    with pytest.raises(ValueError):
        sim_metrics(np.zeros((2, 2)), np.zeros((2, 2)))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_mmse_at_least_mab_squared(R, L, seed):
    rng = np.random.default_rng(seed)
    truth = rng.standard_normal((L, 2))
    est = truth + rng.standard_normal((R, L, 2))
    m = sim_metrics(est, truth)
    assert np.all(m.mmse >= m.mab**2 - 1e-12)
