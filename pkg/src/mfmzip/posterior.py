"""Posterior summaries: Dahl's partition, per-player estimates, HPD intervals, metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def membership_matrix(z) -> np.ndarray:
    z = np.asarray(z)
    return (z[:, None] == z[None, :]).astype(float)


def mean_membership(Z) -> np.ndarray:
    """Element-wise mean of the membership matrices of the rows of ``Z`` (T x n)."""
    Z = np.asarray(Z)
    if Z.ndim != 2 or Z.shape[0] == 0:
        raise ValueError("need a non-empty T x n label array")
    acc = np.zeros((Z.shape[1], Z.shape[1]))
    for z in Z:
        acc += z[:, None] == z[None, :]
    return acc / Z.shape[0]


def dahl_select(Z):
    """Index and labels of the draw closest to the mean membership matrix.

    ``Z`` is a T x n array of labels (or an object with a ``z`` attribute).
    Squared Frobenius distance; ties go to the earliest draw. Distances are
    compared as exact integers, T^2 * d_t = T |A_t| - 2 <A_t, S> + const
    with S the summed membership counts, so ties are detected exactly.
    """
    Z = np.asarray(getattr(Z, "z", Z))
    if Z.ndim != 2 or Z.shape[0] == 0:
        raise ValueError("empty trace")
    T = Z.shape[0]
    S = np.zeros((Z.shape[1], Z.shape[1]), dtype=np.int64)
    for z in Z:
        S += z[:, None] == z[None, :]
    score = np.empty(T, dtype=np.int64)
    for t, z in enumerate(Z):
        A = z[:, None] == z[None, :]
        score[t] = T * int(A.sum()) - 2 * int(S[A].sum())
    t_star = int(np.argmin(score))
    return t_star, Z[t_star].copy()


def hpd_interval(draws, level: float = 0.95):
    """Shortest interval spanning ceil(level * T) consecutive order statistics."""
    x = np.sort(np.asarray(draws, dtype=float).ravel())
    T = x.size
    if T == 0:
        raise ValueError("no draws")
    if not 0 < level <= 1:
        raise ValueError("level must be in (0, 1]")
    m = min(T, math.ceil(level * T))
    widths = x[m - 1:] - x[: T - m + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + m - 1])


def hpd_intervals(draws, level: float = 0.95) -> np.ndarray:
    """HPD intervals along axis 0 of ``draws``; returns shape draws.shape[1:] + (2,)."""
    draws = np.asarray(draws, dtype=float)
    T = draws.shape[0]
    m = min(T, math.ceil(level * T))
    x = np.sort(draws, axis=0)
    widths = x[m - 1:] - x[: T - m + 1]
    i = np.argmin(widths, axis=0)
    lo = np.take_along_axis(x, i[None, ...], axis=0)[0]
    hi = np.take_along_axis(x, (i + m - 1)[None, ...], axis=0)[0]
    return np.stack([lo, hi], axis=-1)


@dataclass
class PosteriorSummary:
    dahl_index: int
    z_hat: np.ndarray
    k_hat: int
    player_beta: np.ndarray  # n x (p+1) posterior means
    player_rho: np.ndarray  # n
    beta_hpd: np.ndarray  # n x (p+1) x 2
    rho_hpd: np.ndarray  # n x 2
    cluster_beta: np.ndarray  # k_hat x (p+1)
    cluster_rho: np.ndarray  # k_hat
    cluster_sizes: np.ndarray

    def estimates_table(self) -> np.ndarray:
        """One row per cluster: rho, beta_0 .. beta_p."""
        return np.column_stack([self.cluster_rho, self.cluster_beta])


def summarize(trace, z_hat=None, level: float = 0.95, dahl_index=None) -> PosteriorSummary:
    """Per-player posterior means and HPD intervals, aggregated over Dahl clusters.

    Each retained draw's cluster parameters are mapped to players through that
    draw's own labels, so the result does not depend on label switching.
    """
    if z_hat is None:
        dahl_index, z_hat = dahl_select(trace.z)
    z_hat = np.asarray(z_hat)
    beta, rho = trace.player_draws()
    pb = beta.mean(axis=0)
    pr = rho.mean(axis=0)
    b_hpd = hpd_intervals(beta, level)
    r_hpd = hpd_intervals(rho, level)
    # relabel z_hat by first appearance
    _, first = np.unique(z_hat, return_index=True)
    order = z_hat[np.sort(first)]
    relabel = {int(c): h for h, c in enumerate(order)}
    z = np.array([relabel[int(c)] for c in z_hat])
    k = len(order)
    cb = np.stack([pb[z == h].mean(axis=0) for h in range(k)])
    cr = np.array([pr[z == h].mean() for h in range(k)])
    return PosteriorSummary(
        dahl_index=-1 if dahl_index is None else int(dahl_index),
        z_hat=z,
        k_hat=k,
        player_beta=pb,
        player_rho=pr,
        beta_hpd=b_hpd,
        rho_hpd=r_hpd,
        cluster_beta=cb,
        cluster_rho=cr,
        cluster_sizes=np.bincount(z, minlength=k),
    )


@dataclass
class SimMetrics:
    mab: np.ndarray
    msd: np.ndarray
    mmse: np.ndarray
    mcr: np.ndarray


def sim_metrics(estimates, truth, intervals=None) -> SimMetrics:
    """Mean absolute bias, mean sd, mean MSE and mean coverage per coefficient.

    ``estimates``: R x L x P posterior point estimates over R replicates and
    L players; ``truth``: L x P; ``intervals``: R x L x P x 2 credible
    intervals. Coverage counts replicates whose interval holds the true value.
    MSD needs R >= 2 (it is NaN otherwise).
    """
    est = np.asarray(estimates, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.ndim != 3 or est.shape[1:] != truth.shape:
        raise ValueError("estimates must be R x L x P with truth L x P")
    R = est.shape[0]
    err = est - truth[None]
    mab = np.abs(err).mean(axis=(0, 1))
    mmse = (err**2).mean(axis=(0, 1))
    if R >= 2:
        msd = est.std(axis=0, ddof=1).mean(axis=0)
    else:
        msd = np.full(truth.shape[1], np.nan)
    if intervals is None:
        mcr = np.full(truth.shape[1], np.nan)
    else:
        iv = np.asarray(intervals, dtype=float)
        covered = (iv[..., 0] <= truth[None]) & (truth[None] <= iv[..., 1])
        mcr = covered.mean(axis=(0, 1))
    return SimMetrics(mab, msd, mmse, mcr)
