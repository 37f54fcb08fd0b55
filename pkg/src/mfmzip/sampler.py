"""MCMC for the MFM zero-inflated Poisson clustering model.

One sweep updates, in order: structural-zero indicators, cluster labels
(urn conditionals with auxiliary components, Neal's algorithm 8 adapted to
MFM weights), per-cluster coefficients by coordinate-wise random-walk
Metropolis, per-cluster zero-inflation probabilities (conjugate Beta) and,
optionally, the Poisson rate of the k-prior.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .mfm import MfmPrior, compute_vn, log_partition_prob, sample_k_given_t, sample_psi
from .zipoisson import ETA_BOUND, _logpmf, fit_zip_mle

log = logging.getLogger(__name__)

RHO_CLAMP = 1e-8
TARGET_ACCEPT = 0.44
PROPOSALS = ("whitened", "coordinate")


class SamplerError(RuntimeError):
    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


@dataclass
class FitConfig:
    n_iter: int = 15_000
    n_burnin: int = 5_000
    thin: int = 1
    sigma0_scale: float = 5.0
    rw_step: float = 2.4
    m_aux: int = 2
    psi: float = 1.0
    update_psi: bool = False
    k_prior: str = "shifted"
    gamma: float = 1.0
    adapt: bool = True
    adapt_batch: int = 50
    init_clusters: int = 10
    likelihood: bool = True
    proposal: str = "whitened"
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.n_burnin < self.n_iter:
            raise ValueError("need 0 <= n_burnin < n_iter")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if not np.all(np.asarray(self.rw_step) > 0):
            raise ValueError("rw_step must be positive")
        if self.m_aux < 1:
            raise ValueError("m_aux must be >= 1")
        if not self.sigma0_scale > 0:
            raise ValueError("sigma0_scale must be positive")
        if self.proposal not in PROPOSALS:
            raise ValueError(f"proposal must be one of {PROPOSALS}")

    @property
    def n_keep(self) -> int:
        return (self.n_iter - self.n_burnin) // self.thin

    @property
    def prior(self) -> MfmPrior:
        return MfmPrior(self.psi, self.gamma, self.k_prior)


@dataclass
class ClusterState:
    """Sampler state. Labels are 0-based and compact (0..t-1)."""

    z: np.ndarray
    betas: np.ndarray
    rhos: np.ndarray
    w: np.ndarray
    psi: float
    vn: object = field(repr=False)

    @property
    def k(self) -> int:
        return len(self.rhos)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.z, minlength=self.k)

    def to_dict(self) -> dict:
        return {
            "z": self.z.tolist(),
            "beta": self.betas.tolist(),
            "rho": self.rhos.tolist(),
            "psi": self.psi,
        }


@dataclass
class MCMCTrace:
    z: np.ndarray
    betas: list
    rhos: list
    psi: np.ndarray
    k: np.ndarray
    logpost: np.ndarray
    iteration: np.ndarray
    step_sizes: Optional[np.ndarray] = None
    accept_rate: Optional[np.ndarray] = None

    @property
    def T(self) -> int:
        return len(self.z)

    def player_draws(self):
        """Per-player (T, n, p+1) coefficient and (T, n) rho draws via each draw's labels."""
        beta = np.stack([b[z] for b, z in zip(self.betas, self.z)])
        rho = np.stack([r[z] for r, z in zip(self.rhos, self.z)])
        return beta, rho

    def records(self):
        for t in range(self.T):
            yield {
                "iter": int(self.iteration[t]),
                "k": int(self.k[t]),
                "psi": float(self.psi[t]),
                "logpost": float(self.logpost[t]),
                "z": self.z[t].tolist(),
                "beta": self.betas[t].tolist(),
                "rho": self.rhos[t].tolist(),
            }

    def write_ndjson(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records():
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def from_records(cls, records) -> "MCMCTrace":
        records = list(records)
        if not records:
            raise ValueError("empty trace")
        return cls(
            z=np.array([r["z"] for r in records], dtype=np.int64),
            betas=[np.array(r["beta"], dtype=float) for r in records],
            rhos=[np.array(r["rho"], dtype=float) for r in records],
            psi=np.array([r["psi"] for r in records], dtype=float),
            k=np.array([r["k"] for r in records], dtype=np.int64),
            logpost=np.array([r["logpost"] for r in records], dtype=float),
            iteration=np.array([r["iter"] for r in records], dtype=np.int64),
        )

    @classmethod
    def read_ndjson(cls, *paths) -> "MCMCTrace":
        records = []
        for path in paths:
            with open(path, encoding="utf-8") as fh:
                records.extend(json.loads(line) for line in fh if line.strip())
        return cls.from_records(records)


def loglik_cluster(Y, X, beta, rho) -> float:
    """Total ZIP log-likelihood of member rows ``Y`` (m x J) under (beta, rho)."""
    Y = np.atleast_2d(np.asarray(Y))
    if Y.size == 0:
        return 0.0
    eta = np.clip(np.asarray(X) @ np.asarray(beta), -ETA_BOUND, ETA_BOUND)
    return float(np.sum(_logpmf(Y, eta[None, :], np.exp(eta)[None, :], rho)))


def _compact(z):
    _, first = np.unique(z, return_index=True)
    order = np.argsort(first)
    old_labels = z[np.sort(first)]
    remap = np.empty(z.max() + 1, dtype=np.int64)
    remap[old_labels] = np.arange(len(order))
    return remap[z], old_labels


class ZipMfmSampler:
    """Holds the data, configuration, RNG and adaptive proposal scales for one chain."""

    def __init__(self, y, X, config: FitConfig = FitConfig(), rng=None):
        self.y = np.asarray(y, dtype=np.int64)
        self.X = np.asarray(X, dtype=float)
        if self.y.ndim != 2 or self.X.ndim != 2 or self.y.shape[1] != self.X.shape[0]:
            raise ValueError(
                f"dimension mismatch: counts {self.y.shape}, design {self.X.shape}"
            )
        self.config = config
        self.rng = np.random.default_rng(config.seed) if rng is None else rng
        self.n, self.J = self.y.shape
        self.P = self.X.shape[1]
        self.set_counts(self.y)
        self.log_step = np.log(np.broadcast_to(np.asarray(config.rw_step, dtype=float), (self.P,))).copy()
        self._acc = np.zeros(self.P)
        self._tries = np.zeros(self.P)
        self._batch = 0
        self._ll = None

    def set_counts(self, y) -> None:
        """Swap in a new n x J count matrix (same shape) and refresh cached summaries."""
        y = np.asarray(y, dtype=np.int64)
        if y.shape != (self.n, self.J):
            raise ValueError(f"counts must have shape {(self.n, self.J)}")
        self.y = y
        self.zero = y == 0
        self.zero_f = self.zero.astype(float)
        self.pos_f = (~self.zero).astype(float)
        self.y_f = y.astype(float)
        self.n_pos = self.pos_f.sum(axis=1)
        self.log_fact = gammaln(self.y_f + 1.0).sum(axis=1)
        self._ll = None

    # likelihood pieces -------------------------------------------------

    def _eta(self, betas):
        return np.clip(np.atleast_2d(betas) @ self.X.T, -ETA_BOUND, ETA_BOUND)

    def player_loglik(self, betas, rhos, rows=None) -> np.ndarray:
        """ZIP log-likelihood of each player (rows) under each parameter set (columns)."""
        betas = np.atleast_2d(betas)
        rhos = np.atleast_1d(np.asarray(rhos, dtype=float))
        eta = self._eta(betas)
        mu = np.exp(eta)
        with np.errstate(divide="ignore"):
            log_rho = np.log(rhos)
            log_1m = np.log1p(-rhos)
        log0 = np.logaddexp(log_rho[:, None], log_1m[:, None] - mu)
        sl = slice(None) if rows is None else rows
        zero_f, y_f, pos_f = self.zero_f[sl], self.y_f[sl], self.pos_f[sl]
        out = zero_f @ log0.T + y_f @ eta.T - pos_f @ mu.T
        with np.errstate(invalid="ignore"):
            pos_term = np.outer(self.n_pos[sl], log_1m)
        # 0 * log(0) when rho == 1 and the player has no positive counts
        out += np.where(np.isnan(pos_term), 0.0, pos_term)
        out -= self.log_fact[sl][..., None]
        return out

    def _draw_prior_theta(self, m):
        betas = self.rng.normal(0.0, self.config.sigma0_scale, (m, self.P))
        rhos = self.rng.uniform(RHO_CLAMP, 1.0 - RHO_CLAMP, m)
        return betas, rhos

    def _draw_w_rows(self, rows, betas, rhos):
        mu = np.exp(self._eta(betas))
        rho = np.asarray(rhos)[:, None]
        p = rho / (rho + (1.0 - rho) * np.exp(-mu))
        u = self.rng.random(p.shape)
        return self.zero[rows] & (u < p)

    # initial state -----------------------------------------------------

    def initial_state(self) -> ClusterState:
        cfg = self.config
        vn = compute_vn(self.n, self.n, cfg.prior)
        if not cfg.likelihood or cfg.init_clusters <= 1 or self.n == 1:
            betas, rhos = self._draw_prior_theta(1)
            if cfg.likelihood:
                fit = fit_zip_mle(self.y.sum(axis=0), self.X, max_iter=100)
                betas[0] = fit.beta
                betas[0, 0] -= np.log(self.n)
                rhos[0] = np.clip(fit.rho, 0.01, 0.99)
            z = np.zeros(self.n, dtype=np.int64)
        else:
            from .baselines import kmeans

            feats = np.empty((self.n, self.P + 1))
            for i in range(self.n):
                if not self.y[i].any():
                    feats[i] = np.r_[np.zeros(self.P), 1.0]
                    continue
                fit = fit_zip_mle(self.y[i], self.X, max_iter=100)
                feats[i] = np.r_[fit.beta, fit.rho]
            k0 = min(cfg.init_clusters, self.n)
            sd = feats.std(axis=0)
            sd[sd == 0] = 1.0
            z = kmeans(feats / sd, k0, restarts=3, seed=int(self.rng.integers(2**31)))
            z, _ = _compact(z)
            k = z.max() + 1
            betas = np.stack([feats[z == h, : self.P].mean(axis=0) for h in range(k)])
            rhos = np.array([np.clip(feats[z == h, self.P].mean(), 0.01, 0.99) for h in range(k)])
        w = np.zeros((self.n, self.J), dtype=bool)
        state = ClusterState(z, betas, rhos, w, cfg.psi, vn)
        if cfg.likelihood:
            state.w = self._draw_w_rows(slice(None), betas[z], rhos[z])
        self._ll = None
        return state

    # updates -----------------------------------------------------------

    def update_indicators(self, state: ClusterState) -> ClusterState:
        """Draw w_ij ~ Bernoulli(rho / (rho + (1 - rho) e^-mu)) on zero cells."""
        if not self.config.likelihood:
            state.w = np.zeros((self.n, self.J), dtype=bool)
            return state
        state.w = self._draw_w_rows(slice(None), state.betas[state.z], state.rhos[state.z])
        return state

    def update_labels(self, state: ClusterState) -> ClusterState:
        cfg = self.config
        g = cfg.gamma
        m = cfg.m_aux
        log_m = np.log(m)
        use_lik = cfg.likelihood
        vn = state.vn
        if vn.t_max < self.n:
            vn = state.vn = vn.extend(self.n)
        log_v = np.concatenate([[0.0], vn.log_values])

        betas = list(state.betas)
        rhos = list(state.rhos)
        sizes = list(np.bincount(state.z, minlength=state.k))
        if use_lik:
            ll = self._ll if self._ll is not None else self.player_loglik(state.betas, state.rhos)
            cols = [ll[:, h] for h in range(state.k)]
        alive = [True] * state.k
        n_alive = state.k
        z = state.z.copy()

        if not use_lik:
            return self._update_labels_prior(state, betas, rhos, sizes, log_v)

        for i in range(self.n):
            c_old = z[i]
            sizes[c_old] -= 1
            singleton = sizes[c_old] == 0
            if singleton:
                alive[c_old] = False
                n_alive -= 1
            t = n_alive
            existing = [h for h in range(len(sizes)) if alive[h]]

            n_fresh = m - 1 if singleton else m
            aux_b, aux_r = self._draw_prior_theta(n_fresh)
            if singleton:
                aux_b = np.vstack([betas[c_old][None, :], aux_b])
                aux_r = np.concatenate([[rhos[c_old]], aux_r])

            lw = np.empty(len(existing) + m)
            lw[: len(existing)] = np.log(np.array([sizes[h] for h in existing], dtype=float) + g)
            lw[len(existing):] = np.log(g) + log_v[t + 1] - log_v[t] - log_m
            if use_lik:
                lw[: len(existing)] += np.array([cols[h][i] for h in existing])
                if singleton:
                    aux_ll = np.empty(m)
                    aux_ll[0] = cols[c_old][i]
                    if n_fresh:
                        aux_ll[1:] = self.player_loglik(aux_b[1:], aux_r[1:], rows=[i])[0]
                else:
                    aux_ll = self.player_loglik(aux_b, aux_r, rows=[i])[0]
                lw[len(existing):] += aux_ll
            p = np.exp(lw - lw.max())
            choice = int(np.searchsorted(np.cumsum(p), self.rng.random() * p.sum(), side="right"))
            choice = min(choice, len(p) - 1)

            if choice < len(existing):
                c_new = existing[choice]
            else:
                a = choice - len(existing)
                if singleton and a == 0:
                    c_new = c_old
                    alive[c_old] = True
                    n_alive += 1
                else:
                    betas.append(aux_b[a].copy())
                    rhos.append(float(aux_r[a]))
                    sizes.append(0)
                    alive.append(True)
                    n_alive += 1
                    c_new = len(sizes) - 1
                    if use_lik:
                        cols.append(self.player_loglik(aux_b[a], aux_r[a])[:, 0])
            sizes[c_new] += 1
            if use_lik and c_new != c_old:
                state.w[i] = self._draw_w_rows([i], betas[c_new][None, :], [rhos[c_new]])[0]
            z[i] = c_new

        z, old = _compact(z)
        state.z = z
        state.betas = np.array([betas[h] for h in old]).reshape(len(old), self.P)
        state.rhos = np.array([rhos[h] for h in old], dtype=float)
        self._ll = np.column_stack([cols[h] for h in old]) if use_lik else None
        return state

    def _update_labels_prior(self, state, betas, rhos, sizes, log_v):
        # flat likelihood: auxiliary parameters only matter once chosen, so draw lazily
        g = self.config.gamma
        m = self.config.m_aux
        new_w = g * np.exp(np.diff(log_v))
        alive = [True] * len(sizes)
        n_alive = len(sizes)
        z = state.z.tolist()
        rand = self.rng.random
        for i in range(self.n):
            c_old = z[i]
            sizes[c_old] -= 1
            singleton = sizes[c_old] == 0
            if singleton:
                alive[c_old] = False
                n_alive -= 1
            existing = [h for h in range(len(sizes)) if alive[h]]
            weights = [sizes[h] + g for h in existing]
            total = sum(weights) + new_w[n_alive]
            u = rand() * total
            c_new = -1
            for h, wt in zip(existing, weights):
                u -= wt
                if u < 0:
                    c_new = h
                    break
            if c_new < 0:
                if singleton and rand() * m < 1.0:
                    c_new = c_old
                else:
                    b, r = self._draw_prior_theta(1)
                    betas.append(b[0])
                    rhos.append(float(r[0]))
                    sizes.append(0)
                    alive.append(False)
                    c_new = len(sizes) - 1
                alive[c_new] = True
                n_alive += 1
            sizes[c_new] += 1
            z[i] = c_new
        z, old = _compact(np.array(z, dtype=np.int64))
        state.z = z
        state.betas = np.array([betas[h] for h in old]).reshape(len(old), self.P)
        state.rhos = np.array([rhos[h] for h in old], dtype=float)
        self._ll = None
        return state

    def beta_sufficient_stats(self, state: ClusterState, h: int):
        """Poisson-part sums over member cells with w = 0: (sum y, cell count) per block."""
        members = state.z == h
        if not self.config.likelihood or not members.any():
            return np.zeros(self.J), np.zeros(self.J)
        keep = ~state.w[members]
        return (self.y_f[members] * keep).sum(axis=0), keep.sum(axis=0).astype(float)

    def proposal_directions(self, s):
        """Columns of chol((X' diag(s) X + I / sigma0^2)^-1).

        Depends only on the summed counts ``s``, never on the current
        coefficients, so the random walk stays symmetric. With
        ``proposal="coordinate"`` the directions are the unit axes.
        """
        if self.config.proposal == "coordinate":
            return np.eye(self.P)
        inv_var = 1.0 / self.config.sigma0_scale**2
        prec = (self.X * s[:, None]).T @ self.X + inv_var * np.eye(self.P)
        try:
            return np.linalg.cholesky(np.linalg.inv(prec))
        except np.linalg.LinAlgError:
            return np.diag(1.0 / np.sqrt(np.diag(prec)))

    def rw_beta(self, beta, s, c, n_steps=1, record=True):
        """Random-walk Metropolis on one coefficient vector, one direction at a time.

        Targets N(0, sigma0^2 I) x prod_j Poisson(y; exp(x_j beta)) written as
        s . eta - c . exp(eta). Direction m moves beta along the m-th column of
        ``proposal_directions(s)`` with its own adaptive scale.
        """
        inv_var = 1.0 / self.config.sigma0_scale**2
        L = self.proposal_directions(s)
        XL = self.X @ L
        scale = np.exp(self.log_step)
        beta = np.array(beta, dtype=float)
        eta_raw = self.X @ beta
        rng = self.rng
        for _ in range(n_steps):
            for mcoord in range(self.P):
                delta = scale[mcoord] * rng.standard_normal()
                eta_new_raw = eta_raw + delta * XL[:, mcoord]
                eta = np.clip(eta_raw, -ETA_BOUND, ETA_BOUND)
                eta_new = np.clip(eta_new_raw, -ETA_BOUND, ETA_BOUND)
                b_new = beta + delta * L[:, mcoord]
                log_ratio = (
                    s @ (eta_new - eta)
                    - c @ (np.exp(eta_new) - np.exp(eta))
                    - 0.5 * inv_var * (b_new @ b_new - beta @ beta)
                )
                accept = np.log(rng.random()) < log_ratio
                if record:
                    self._tries[mcoord] += 1
                    self._acc[mcoord] += accept
                if accept:
                    beta = b_new
                    eta_raw = eta_new_raw
        return beta

    def update_beta(self, state: ClusterState) -> ClusterState:
        for h in range(state.k):
            s, c = self.beta_sufficient_stats(state, h)
            state.betas[h] = self.rw_beta(state.betas[h], s, c)
        self._ll = None
        return state

    def update_rho(self, state: ClusterState) -> ClusterState:
        """rho_h ~ Beta(1 + sum w, 1 + cells - sum w) over the cluster's cells."""
        sizes = state.sizes()
        if self.config.likelihood:
            w_sum = np.bincount(state.z, weights=state.w.sum(axis=1), minlength=state.k)
            cells = sizes * self.J
        else:
            w_sum = np.zeros(state.k)
            cells = np.zeros(state.k)
        rho = self.rng.beta(1.0 + w_sum, 1.0 + cells - w_sum)
        state.rhos = np.clip(rho, RHO_CLAMP, 1.0 - RHO_CLAMP)
        self._ll = None
        return state

    def update_psi(self, state: ClusterState) -> ClusterState:
        """Draw k | t by the MFM posterior on components, then psi | k; refresh V_n."""
        if not self.config.update_psi:
            return state
        prior = state.vn.prior.with_psi(state.psi)
        k = sample_k_given_t(state.k, self.n, prior, self.rng)
        state.psi = sample_psi(k, prior, self.rng)
        state.vn = compute_vn(self.n, self.n, prior.with_psi(state.psi))
        return state

    def adapt(self, iteration: int) -> None:
        """Batch-wise step-size tuning toward the target acceptance rate."""
        if not self.config.adapt or iteration % self.config.adapt_batch:
            return
        self._batch += 1
        rate = self._acc / np.maximum(self._tries, 1)
        delta = min(0.5, 1.0 / np.sqrt(self._batch))
        self.log_step += np.where(self._tries > 0, np.where(rate > TARGET_ACCEPT, delta, -delta), 0.0)
        self._acc[:] = 0
        self._tries[:] = 0

    def log_posterior(self, state: ClusterState) -> float:
        cfg = self.config
        sizes = state.sizes()
        lp = log_partition_prob(sizes, state.vn)
        s2 = cfg.sigma0_scale**2
        lp += float(np.sum(-0.5 * state.betas**2 / s2 - 0.5 * np.log(2 * np.pi * s2)))
        if cfg.update_psi:
            lp -= state.psi
        if cfg.likelihood:
            if self._ll is None:
                self._ll = self.player_loglik(state.betas, state.rhos)
            lp += float(self._ll[np.arange(self.n), state.z].sum())
        return lp

    def sweep(self, state: ClusterState) -> ClusterState:
        self.update_indicators(state)
        self.update_labels(state)
        self.update_beta(state)
        self.update_rho(state)
        self.update_psi(state)
        return state


def run_chain(y, X, config: FitConfig = FitConfig(), progress_every: int = 0) -> MCMCTrace:
    """Run one chain and return the retained draws after burn-in and thinning."""
    sampler = ZipMfmSampler(y, X, config)
    state = sampler.initial_state()
    zs, betas, rhos, psis, ks, lps, its = [], [], [], [], [], [], []
    for it in range(1, config.n_iter + 1):
        sampler.sweep(state)
        if it <= config.n_burnin:
            sampler.adapt(it)
        keep = it > config.n_burnin and (it - config.n_burnin) % config.thin == 0
        if keep or (progress_every and it % progress_every == 0):
            lp = sampler.log_posterior(state)
            if not np.isfinite(lp):
                raise SamplerError(f"non-finite log-posterior at iteration {it}", state.to_dict())
            if progress_every and it % progress_every == 0:
                log.info("iter %d: k=%d psi=%.3g logpost=%.6g", it, state.k, state.psi, lp)
            if keep:
                zs.append(state.z.copy())
                betas.append(state.betas.copy())
                rhos.append(state.rhos.copy())
                psis.append(state.psi)
                ks.append(state.k)
                lps.append(lp)
                its.append(it)
    return MCMCTrace(
        z=np.array(zs, dtype=np.int64).reshape(len(zs), sampler.n),
        betas=betas,
        rhos=rhos,
        psi=np.array(psis),
        k=np.array(ks, dtype=np.int64),
        logpost=np.array(lps),
        iteration=np.array(its, dtype=np.int64),
        step_sizes=np.exp(sampler.log_step),
    )


def config_dict(config: FitConfig) -> dict:
    return asdict(config)
