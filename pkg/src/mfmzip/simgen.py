"""Synthetic ZIP datasets for the balanced and imbalanced three-group designs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .court import CountMatrix
from .zipoisson import link_mean, zip_sample

TRUE_BETAS = np.array(
    [
        [-1.0, 1.2, 0.95, 1.1, 1.0, 0.8],
        [-0.4, 0.6, 0.7, 0.5, 0.8, 0.3],
        [-0.9, 0.2, 0.1, 0.3, 0.2, 0.4],
    ]
)
TRUE_RHOS = np.array([0.1, 0.3, 0.4])

GROUP_SIZES = {
    ("balanced", "full"): (25, 25, 25),
    ("imbalanced", "full"): (10, 35, 30),
    ("balanced", "desk"): (10, 10, 10),
    ("imbalanced", "desk"): (4, 14, 12),
}
BLOCKS = {"full": 1175, "desk": 200}


@dataclass
class SimDesign:
    group_sizes: tuple
    true_betas: np.ndarray
    true_rhos: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        self.true_betas = np.atleast_2d(np.asarray(self.true_betas, dtype=float))
        self.true_rhos = np.asarray(self.true_rhos, dtype=float)
        k0 = len(self.group_sizes)
        if self.true_betas.shape[0] != k0 or self.true_rhos.shape[0] != k0:
            raise ValueError("group_sizes, true_betas and true_rhos must share one length")
        if self.true_betas.shape[1] != self.X.shape[1]:
            raise ValueError("coefficient length does not match the design")
        if any(s < 1 for s in self.group_sizes):
            raise ValueError("group sizes must be positive")

    @property
    def n(self) -> int:
        return int(sum(self.group_sizes))

    @property
    def J(self) -> int:
        return self.X.shape[0]

    @property
    def labels(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.group_sizes)), self.group_sizes)

    def player_betas(self) -> np.ndarray:
        return self.true_betas[self.labels]


def synthetic_design(J: int, K: int = 5, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Intercept plus K standard-normal columns, standardized to mean 0, sd 1."""
    rng = np.random.default_rng(0) if rng is None else rng
    Z = rng.standard_normal((J, K))
    Z = (Z - Z.mean(axis=0)) / Z.std(axis=0, ddof=1)
    return np.column_stack([np.ones(J), Z])


def study_design(kind: str = "balanced", X=None, scale: str = "full", seed: int = 0) -> SimDesign:
    """Three-group design with fixed reference coefficients and zero-inflation levels.

    ``scale="desk"`` shrinks to 30 players and 200 blocks. A supplied design
    with more rows than the scale needs is row-subsampled (seeded); without
    one, a synthetic standard-normal design is generated.
    """
    if (kind, scale) not in GROUP_SIZES:
        raise ValueError(f"unknown design {kind!r} at scale {scale!r}")
    J = BLOCKS[scale]
    rng = np.random.default_rng(seed)
    if X is None:
        X = synthetic_design(J, TRUE_BETAS.shape[1] - 1, rng)
    else:
        X = np.asarray(X, dtype=float)
        if X.shape[0] > J:
            X = X[np.sort(rng.choice(X.shape[0], J, replace=False))]
    return SimDesign(GROUP_SIZES[(kind, scale)], TRUE_BETAS.copy(), TRUE_RHOS.copy(), X)


def generate(design: SimDesign, rng: np.random.Generator):
    """Counts y_ij ~ ZIP(exp(x_j beta_g), rho_g) for each player i in group g."""
    labels = design.labels
    mu = link_mean(design.X, design.true_betas.T).T  # groups x J
    y = zip_sample(mu[labels], design.true_rhos[labels][:, None], rng, size=(design.n, design.J))
    ids = [f"sim{i:03d}" for i in range(design.n)]
    return CountMatrix(y, ids), labels


def replicate_rngs(seed: int, replicates: int) -> list:
    """Independent per-replicate generators split from one master seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(replicates)]
