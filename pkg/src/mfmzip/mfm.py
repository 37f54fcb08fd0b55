"""Mixture-of-finite-mixtures prior: k-prior, V_n(t) table, urn scheme, stick-breaking."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.special import gammaln, logsumexp

K_PRIOR_FORMS = ("shifted", "truncated")
TAIL_LOG_TOL = -40.0
MAX_TERMS = 10_000
_CHUNK = 64


class SeriesError(ArithmeticError):
    pass


@dataclass(frozen=True)
class MfmPrior:
    """Prior on the number of components and the Dirichlet concentration.

    ``shifted``: (k - 1) ~ Poisson(psi).  ``truncated``: k ~ Poisson(psi)
    conditioned on k >= 1.
    """

    psi: float = 1.0
    gamma: float = 1.0
    k_prior: str = "shifted"

    def __post_init__(self):
        if not self.psi > 0:
            raise ValueError("psi must be positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.k_prior not in K_PRIOR_FORMS:
            raise ValueError(f"k_prior must be one of {K_PRIOR_FORMS}")

    def log_pk(self, k):
        k = np.asarray(k, dtype=float)
        lp = np.log(self.psi)
        if self.k_prior == "shifted":
            out = (k - 1) * lp - self.psi - gammaln(k)
        else:
            out = k * lp - self.psi - gammaln(k + 1) - np.log(-np.expm1(-self.psi))
        return np.where(k >= 1, out, -np.inf)

    def with_psi(self, psi: float) -> "MfmPrior":
        return MfmPrior(psi, self.gamma, self.k_prior)


def _log_terms(k, t, n, prior):
    """log[k_(t) / (gamma k)^(n) p(k)] on a (t, k) grid; -inf where k < t."""
    g = prior.gamma
    k = k[None, :].astype(float)
    t = t[:, None].astype(float)
    with np.errstate(invalid="ignore"):
        falling = gammaln(k + 1) - gammaln(np.maximum(k - t + 1, 1.0))
    rising = gammaln(g * k + n) - gammaln(g * k)
    out = falling - rising + prior.log_pk(k)
    return np.where(k >= t, out, -np.inf)


def _series(n, ts, prior, weights_only=False):
    """Sum the V_n(t) series over k for each t in ``ts`` (log scale)."""
    ts = np.asarray(ts)
    running = np.full(ts.shape, -np.inf)
    chunks = []
    start = 1
    while True:
        if start > MAX_TERMS:
            raise SeriesError(f"V_n series did not converge within {MAX_TERMS} terms")
        ks = np.arange(start, min(start + _CHUNK, MAX_TERMS + 1))
        terms = _log_terms(ks, ts, n, prior)
        if weights_only:
            chunks.append(terms)
        running = np.logaddexp(running, logsumexp(terms, axis=1))
        start = ks[-1] + 1
        if ks.size < 2:
            continue
        last, prev = terms[:, -1], terms[:, -2]
        with np.errstate(invalid="ignore"):
            log_r = last - prev
        decreasing = np.isfinite(last) & (log_r < 0)
        if not np.all(decreasing):
            continue
        # geometric bound on the remaining tail: term * r / (1 - r)
        tail = last + log_r - np.log(-np.expm1(log_r))
        if np.all(tail - running < TAIL_LOG_TOL):
            break
    if weights_only:
        return np.concatenate(chunks, axis=1)
    return running


@dataclass(frozen=True)
class VnTable:
    """log V_n(t) for t = 1..t_max under a fixed prior."""

    n: int
    prior: MfmPrior
    log_values: np.ndarray = field(repr=False)

    @property
    def t_max(self) -> int:
        return len(self.log_values)

    def log_v(self, t: int) -> float:
        if not 1 <= t <= self.t_max:
            raise IndexError(f"t={t} outside table range 1..{self.t_max}")
        return float(self.log_values[t - 1])

    def log_ratio(self, t: int) -> float:
        """log V_n(t+1) - log V_n(t)."""
        return self.log_v(t + 1) - self.log_v(t)

    def extend(self, t_max: int) -> "VnTable":
        if t_max <= self.t_max:
            return self
        return compute_vn(self.n, t_max, self.prior)


def compute_vn(n: int, t_max: int, prior: MfmPrior = MfmPrior()) -> VnTable:
    """Tabulate log V_n(t) = log sum_k k_(t) / (gamma k)^(n) p(k), t = 1..t_max."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 1 <= t_max <= n:
        raise ValueError(f"t_max={t_max} must lie in [1, n={n}]")
    logs = _series(n, np.arange(1, t_max + 1), prior)
    if not np.all(np.isfinite(logs)):
        raise SeriesError("non-finite V_n(t) entry")
    logs.setflags(write=False)
    return VnTable(n, prior, logs)


def log_rising(x, m):
    """log of x (x+1) ... (x+m-1)."""
    return gammaln(np.asarray(x, dtype=float) + m) - gammaln(x)


def log_partition_prob(sizes, vn: VnTable) -> float:
    """Log prior probability of one set partition with block ``sizes``."""
    sizes = np.asarray(sizes)
    if sizes.sum() != vn.n:
        raise ValueError("block sizes must sum to n")
    t = len(sizes)
    if t > vn.t_max:
        vn = vn.extend(t)
    return vn.log_v(t) + float(np.sum(log_rising(vn.prior.gamma, sizes)))


def urn_log_weights(cluster_sizes, vn: VnTable) -> np.ndarray:
    """Log urn weights for the held-out item: existing clusters, then a new one."""
    sizes = np.asarray(cluster_sizes, dtype=float)
    if sizes.sum() > vn.n - 1:
        raise ValueError("cluster sizes must leave one item held out")
    t = len(sizes)
    g = vn.prior.gamma
    if t + 1 > vn.t_max:
        vn = vn.extend(t + 1)
    new = np.log(g) + (vn.log_ratio(t) if t > 0 else 0.0)
    return np.append(np.log(sizes + g), new)


def urn_weights(cluster_sizes, vn: VnTable) -> np.ndarray:
    """Unnormalised urn weights ``|c| + gamma`` and ``gamma V_n(t+1)/V_n(t)``."""
    return np.exp(urn_log_weights(cluster_sizes, vn))


def sample_partition(vn: VnTable, rng: np.random.Generator) -> np.ndarray:
    """Draw labels for n items by sequential seating under the MFM prior.

    Item m+1 is seated with the urn weights of an (m+1)-item table, so the
    coefficients come from V_{m+1}, not V_n. (Weights built on V_n are the
    full conditionals used by the Gibbs sampler.)
    """
    n = vn.n
    z = np.empty(n, dtype=np.int64)
    z[0] = 0
    sizes: list[int] = [1]
    tables = [None] + [compute_vn(m, m, vn.prior) for m in range(1, n + 1)]
    for i in range(1, n):
        lw = urn_log_weights(sizes, tables[i + 1])
        p = np.exp(lw - lw.max())
        c = int(rng.choice(len(p), p=p / p.sum()))
        if c == len(sizes):
            sizes.append(1)
        else:
            sizes[c] += 1
        z[i] = c
    return z


def set_partitions(n: int) -> Iterator[tuple]:
    """All set partitions of n items as restricted-growth label tuples."""
    if n == 0:
        yield ()
        return

    def rec(prefix, m):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for c in range(m + 1):
            yield from rec(prefix + [c], max(m, c + 1))

    yield from rec([0], 1)


def stick_breaking_sim(psi: float, rng: np.random.Generator):
    """Mixture weights from exponential gaps on [0, 1).

    eta_1, eta_2, ... ~ Exp(rate psi); k is the first j with
    eta_1 + ... + eta_j >= 1; pi_h = eta_h for h < k and pi_k takes the
    remainder, so k - 1 ~ Poisson(psi).
    """
    if not psi > 0:
        raise ValueError("psi must be positive")
    etas = []
    total = 0.0
    while True:
        eta = rng.exponential(1.0 / psi)
        if total + eta >= 1.0:
            break
        etas.append(eta)
        total += eta
    weights = np.array(etas + [1.0 - total])
    return len(weights), weights


def sample_k_given_t(t: int, n: int, prior: MfmPrior, rng: np.random.Generator) -> int:
    """Draw the component count k given t occupied clusters among n items."""
    logs = _series(n, np.array([t]), prior, weights_only=True)[0]
    p = np.exp(logs - logs.max())
    return int(rng.choice(len(p), p=p / p.sum())) + 1


def sample_psi(k: int, prior: MfmPrior, rng: np.random.Generator) -> float:
    """Update psi given k under a Gamma(1, 1) hyperprior."""
    if prior.k_prior == "shifted":
        return float(rng.gamma(1.0 + (k - 1), 1.0 / 2.0))
    # truncated Poisson: independence Metropolis with the untruncated conjugate proposal
    prop = float(rng.gamma(1.0 + k, 1.0 / 2.0))
    log_acc = np.log(-np.expm1(-prior.psi)) - np.log(-np.expm1(-prop))
    return prop if np.log(rng.random()) < log_acc else prior.psi
