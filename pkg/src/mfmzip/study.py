"""Replicated simulation study: MFM-ZIP fits versus k-means and mean shift."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import build_features, kmeans, mean_shift, rand_index
from .posterior import sim_metrics, summarize
from .sampler import FitConfig, run_chain
from .simgen import generate, study_design

WORKERS_ENV = "MFMZIP_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class ReplicateResult:
    replicate: int
    k_hat: int
    ri: dict
    player_beta: np.ndarray
    beta_hpd: np.ndarray
    labels_true: np.ndarray
    labels: dict = field(default_factory=dict)


def run_replicate(kind, scale, replicate, seed, config: FitConfig, X=None, design_seed=0) -> ReplicateResult:
    design = study_design(kind, X=X, scale=scale, seed=design_seed)
    data_ss, chain_ss = np.random.SeedSequence([seed, replicate]).spawn(2)
    counts, truth = generate(design, np.random.default_rng(data_ss))
    cfg = replace(config, seed=int(chain_ss.generate_state(1)[0]))
    trace = run_chain(counts.y, design.X, cfg)
    summ = summarize(trace)
    feats = build_features(counts, design.X, "zip_mle")
    sd = feats.std(axis=0)
    scaled = feats / np.where(sd > 0, sd, 1.0)
    labels = {
        "mfm": summ.z_hat,
        "kmeans": kmeans(scaled, summ.k_hat, restarts=10, seed=replicate),
        "meanshift": mean_shift(feats),
    }
    ri = {name: rand_index(lab, truth) for name, lab in labels.items()}
    return ReplicateResult(replicate, summ.k_hat, ri, summ.player_beta, summ.beta_hpd, truth, labels)


def _run_one(args):
    return run_replicate(*args)


@dataclass
class StudyResult:
    kind: str
    scale: str
    replicates: list
    true_k: int
    truth_beta: np.ndarray

    @property
    def cover_rate(self) -> float:
        return float(np.mean([r.k_hat == self.true_k for r in self.replicates]))

    def mean_ri(self, method: str) -> float:
        return float(np.mean([r.ri[method] for r in self.replicates]))

    def metrics(self):
        est = np.stack([r.player_beta for r in self.replicates])
        hpd = np.stack([r.beta_hpd for r in self.replicates])
        return sim_metrics(est, self.truth_beta, hpd)


def run_study(
    kind: str = "balanced",
    scale: str = "desk",
    replicates: int = 10,
    seed: int = 0,
    config: FitConfig = FitConfig(n_iter=3000, n_burnin=1000),
    X=None,
    workers: int | None = None,
) -> StudyResult:
    workers = default_workers() if workers is None else workers
    jobs = [(kind, scale, r, seed, config, X) for r in range(replicates)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    design = study_design(kind, X=X, scale=scale)
    return StudyResult(kind, scale, results, len(design.group_sizes), design.player_betas())
