"""Baseline clusterings (k-means, mean shift) and the Rand index."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls
from scipy.sparse.csgraph import connected_components

from .zipoisson import fit_zip_mle

FEATURE_KINDS = ("zip_mle", "nmf_weights")


def rand_index(labels_a, labels_b) -> float:
    """Fraction of item pairs on which two partitions agree."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape:
        raise ValueError("label vectors differ in length")
    n = a.size
    if n < 2:
        return 1.0
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def pairs(x):
        return float(np.sum(x * (x - 1)) / 2)

    total = n * (n - 1) / 2
    together_both = pairs(table)
    disagreements = pairs(table.sum(axis=1)) + pairs(table.sum(axis=0)) - 2 * together_both
    return (total - disagreements) / total


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    objective: list


def _kmeans_pp(X, k, rng):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def _sq_dists(X, C):
    return np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=2)


def _lloyd(X, centers, max_iter, tol):
    objective = []
    labels = None
    for _ in range(max_iter):
        d2 = _sq_dists(X, centers)
        labels = d2.argmin(axis=1)
        objective.append(float(d2[np.arange(len(X)), labels].sum()))
        new = centers.copy()
        for h in range(len(centers)):
            members = labels == h
            if members.any():
                new[h] = X[members].mean(axis=0)
        shift = np.max(np.abs(new - centers))
        centers = new
        if shift <= tol:
            break
    d2 = _sq_dists(X, centers)
    labels = d2.argmin(axis=1)
    objective.append(float(d2[np.arange(len(X)), labels].sum()))
    return labels, centers, objective


def kmeans_fit(features, k: int, restarts: int = 10, seed: int = 0, max_iter: int = 300, tol: float = 1e-10) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding; best of ``restarts`` by within-cluster SS."""
    X = np.asarray(features, dtype=float)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(restarts, 1)):
        labels, centers, obj = _lloyd(X, _kmeans_pp(X, k, rng), max_iter, tol)
        if best is None or obj[-1] < best.inertia:
            best = KMeansResult(labels, centers, obj[-1], obj)
    return best


def kmeans(features, k: int, restarts: int = 10, seed: int = 0) -> np.ndarray:
    return kmeans_fit(features, k, restarts, seed).labels


def silverman_bandwidth(features) -> np.ndarray:
    """Per-dimension Silverman rule: sd * (4 / ((d + 2) n)) ** (1 / (d + 4))."""
    X = np.asarray(features, dtype=float)
    n, d = X.shape
    sd = X.std(axis=0, ddof=1) if n > 1 else np.ones(d)
    sd = np.where(sd > 0, sd, 1.0)
    return sd * (4.0 / ((d + 2) * n)) ** (1.0 / (d + 4))


def mean_shift_modes(features, bandwidth=None, tol: float = 1e-6, max_iter: int = 500) -> np.ndarray:
    """Gaussian-kernel mean-shift fixed point reached from every data point."""
    X = np.asarray(features, dtype=float)
    h = silverman_bandwidth(X) if bandwidth is None else np.broadcast_to(np.asarray(bandwidth, float), X.shape[1:])
    S = X / h
    pts = S.copy()
    active = np.ones(len(S), dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        P = pts[active]
        logk = -0.5 * _sq_dists(P, S)
        logk -= logk.max(axis=1, keepdims=True)
        wgt = np.exp(logk)
        new = (wgt @ S) / wgt.sum(axis=1, keepdims=True)
        step = np.sqrt(np.sum((new - P) ** 2, axis=1))
        pts[active] = new
        idx = np.flatnonzero(active)
        active[idx[step < tol]] = False
    return pts * h


def mean_shift(features, bandwidth=None, tol: float = 1e-6, max_iter: int = 500) -> np.ndarray:
    """Cluster by mean-shift mode; modes closer than half a bandwidth are merged.

    ``bandwidth`` is a scalar or per-dimension vector; Silverman's rule per
    dimension when omitted.
    """
    X = np.asarray(features, dtype=float)
    h = silverman_bandwidth(X) if bandwidth is None else np.broadcast_to(np.asarray(bandwidth, float), X.shape[1:])
    modes = mean_shift_modes(X, h, tol, max_iter) / h
    close = np.sqrt(_sq_dists(modes, modes)) < 0.5
    _, labels = connected_components(close, directed=False)
    return labels


def build_features(counts, X, kind: str = "zip_mle", basis=None) -> np.ndarray:
    """Per-player feature vectors for the baselines.

    ``zip_mle``: fitted coefficients followed by the fitted zero-inflation
    probability. ``nmf_weights``: nonnegative least-squares weights of the
    count row on the basis surfaces (``basis`` K x J, defaulting to
    ``exp`` of the design's non-intercept columns).
    """
    y = np.asarray(getattr(counts, "y", counts))
    X = np.asarray(X, dtype=float)
    if kind == "zip_mle":
        out = np.empty((y.shape[0], X.shape[1] + 1))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            for i, row in enumerate(y):
                fit = fit_zip_mle(row, X)
                out[i, :-1] = fit.beta
                out[i, -1] = fit.rho
        return out
    if kind == "nmf_weights":
        B = np.exp(X[:, 1:].T) if basis is None else np.asarray(basis, dtype=float)
        return np.array([nnls(B.T, row.astype(float))[0] for row in y])
    raise ValueError(f"unknown feature kind {kind!r}; expected one of {FEATURE_KINDS}")
