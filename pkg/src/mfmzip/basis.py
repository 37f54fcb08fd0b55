"""Spatial basis construction: grid KDE, KL-NMF and the standardized design."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import logsumexp, xlogy

from .court import CourtGrid, ShotRecord

log = logging.getLogger(__name__)

FACTOR_FLOOR = 1e-12
KDE_FLOOR = 1e-300


def _axis_weights(coords, centres, bandwidth):
    # each shot's Gaussian weights over block centres, renormalised to sum to 1
    logk = -0.5 * ((centres[None, :] - coords[:, None]) / bandwidth) ** 2
    return np.exp(logk - logsumexp(logk, axis=1, keepdims=True))


def kde_grid(records: Sequence[ShotRecord], grid: CourtGrid = CourtGrid(), bandwidth: float = 2.5):
    """Shot intensity per block from a Gaussian product-kernel KDE.

    Every shot's kernel is renormalised over the court, so the
    area-weighted row sum equals the number of shots exactly.
    """
    if len(records) == 0:
        raise ValueError("kde_grid needs at least one record")
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    xs = np.array([r.x for r in records], dtype=float)
    ys = np.array([r.y for r in records], dtype=float)
    cx = (np.arange(grid.nx) + 0.5) * grid.block_len_x
    cy = (np.arange(grid.ny) + 0.5) * grid.block_len_y
    kx = _axis_weights(xs, cx, bandwidth)
    ky = _axis_weights(ys, cy, bandwidth)
    lam = (kx.T @ ky).ravel() / grid.block_area
    return np.maximum(lam, KDE_FLOOR)


def intensity_matrix(
    records_by_player: Mapping[str, Sequence[ShotRecord]],
    grid: CourtGrid = CourtGrid(),
    bandwidth: float = 2.5,
) -> np.ndarray:
    """Stack ``kde_grid`` rows, one per player, into an N x J matrix."""
    rows = [kde_grid(recs, grid, bandwidth) for recs in records_by_player.values()]
    return np.vstack(rows)


def kl_divergence(V, WH) -> float:
    """Generalised KL divergence D(V || WH)."""
    return float(np.sum(xlogy(V, V) - xlogy(V, WH) - V + WH))


@dataclass
class NmfFactors:
    W: np.ndarray
    B: np.ndarray
    objective: list = field(default_factory=list)

    @property
    def K(self) -> int:
        return self.B.shape[0]

    @property
    def divergence(self) -> float:
        return self.objective[-1]


def _nmf_single(V, K, rng, max_iter, tol):
    N, J = V.shape
    W = rng.uniform(0.0, 1.0, (N, K))
    B = rng.uniform(0.0, 1.0, (K, J))
    # (0, 1] and matched to the data mean
    W = 1.0 - W
    B = 1.0 - B
    scale = np.sqrt(V.mean() / (W @ B).mean())
    W *= scale
    B *= scale
    WB = W @ B
    trace = [kl_divergence(V, WB)]
    for _ in range(max_iter):
        B *= (W.T @ (V / WB)) / W.sum(axis=0)[:, None]
        np.maximum(B, FACTOR_FLOOR, out=B)
        WB = W @ B
        W *= ((V / WB) @ B.T) / B.sum(axis=1)[None, :]
        np.maximum(W, FACTOR_FLOOR, out=W)
        WB = W @ B
        trace.append(kl_divergence(V, WB))
        prev, cur = trace[-2], trace[-1]
        if abs(prev - cur) <= tol * max(abs(prev), np.finfo(float).tiny):
            break
    return NmfFactors(W, B, trace)


def nmf(
    Lambda,
    K: int = 5,
    max_iter: int = 2000,
    tol: float = 1e-6,
    restarts: int = 5,
    seed: int = 0,
) -> NmfFactors:
    """KL-divergence NMF ``Lambda ~= W @ B`` by Lee-Seung multiplicative updates.

    Runs ``restarts`` seeded random initialisations and keeps the one with
    the smallest final divergence. ``objective`` holds that run's
    divergence after every iteration (entry 0 is the initial value).
    """
    V = np.asarray(Lambda, dtype=float)
    if V.ndim != 2:
        raise ValueError("Lambda must be a 2-D matrix")
    if not np.all(np.isfinite(V)):
        raise ValueError("Lambda has non-finite entries")
    if np.any(V < 0):
        raise ValueError("Lambda must be nonnegative")
    if not 1 <= K <= min(V.shape):
        raise ValueError(f"rank K={K} must lie in [1, {min(V.shape)}]")
    seeds = np.random.SeedSequence(seed).spawn(max(restarts, 1))
    best = None
    for r, ss in enumerate(seeds):
        fit = _nmf_single(V, K, np.random.default_rng(ss), max_iter, tol)
        log.debug("nmf restart %d: divergence %.6g after %d iters", r, fit.divergence, len(fit.objective) - 1)
        if best is None or fit.divergence < best.divergence:
            best = fit
    return best


def build_design(B) -> np.ndarray:
    """J x (K+1) design: intercept column, then standardized log basis rows."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 2:
        raise ValueError("basis matrix must be K x J")
    if not np.all(B > 0):
        raise ValueError("basis entries must be strictly positive to take logs")
    L = np.log(B)
    sd = L.std(axis=1, ddof=1)
    # rounding leaves a constant row with sd ~ 1e-16 rather than 0
    if np.any(~(sd > 1e-12 * np.maximum(1.0, np.abs(L).max(axis=1)))):
        raise ValueError("a basis row is constant and cannot be standardized")
    Z = (L - L.mean(axis=1, keepdims=True)) / sd[:, None]
    return np.column_stack([np.ones(B.shape[1]), Z.T])


def check_design(X, J=None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValueError("design must be a J x (p+1) matrix")
    if J is not None and X.shape[0] != J:
        raise ValueError(f"design has {X.shape[0]} rows but counts have {J} blocks")
    if not np.all(np.isfinite(X)):
        raise ValueError("design has non-finite entries")
    return X


def write_matrix_csv(M, path, header: Sequence[str]) -> None:
    np.savetxt(path, np.asarray(M), delimiter=",", header=",".join(header), comments="", fmt="%.17g")


def read_matrix_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1, dtype=float))
