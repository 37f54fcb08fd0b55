"""Zero-inflated Poisson distribution with a log link.

``ZIP(mu, rho)`` puts mass ``rho`` on a structural zero and ``1 - rho`` on a
Poisson(mu) count.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

ETA_BOUND = 30.0


class ParameterError(ValueError):
    pass


def _check_params(mu, rho):
    mu = np.asarray(mu, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if np.any(~(mu > 0)):
        raise ParameterError("mu must be positive")
    if np.any(~((rho >= 0) & (rho <= 1))):
        raise ParameterError("rho must lie in [0, 1]")
    return mu, rho


def _check_kappa(kappa):
    kappa = np.asarray(kappa)
    if np.any(kappa < 0) or np.any(kappa != np.floor(kappa)):
        raise ParameterError("kappa must be a nonnegative integer")
    return kappa


def zip_logpmf(kappa, mu, rho):
    """Log-probability of ``kappa`` under ZIP(mu, rho); broadcasts."""
    kappa = _check_kappa(kappa)
    mu, rho = _check_params(mu, rho)
    return _logpmf(kappa, np.log(mu), mu, rho)


def _logpmf(kappa, log_mu, mu, rho):
    # unchecked core shared with the sampler
    with np.errstate(divide="ignore"):
        log_rho = np.log(rho)
        log_1m = np.log1p(-rho)
    pois = kappa * log_mu - mu - gammaln(kappa + 1.0)
    zero = np.logaddexp(log_rho, log_1m - mu)
    with np.errstate(invalid="ignore"):
        out = np.where(kappa == 0, zero, log_1m + pois)
    return out[()] if np.ndim(out) == 0 else out


def zip_pmf(kappa, mu, rho):
    """Probability of ``kappa`` under ZIP(mu, rho).

    >>> round(float(zip_pmf(0, 1.0, 0.3)), 6)
    0.557516
    """
    return np.exp(zip_logpmf(kappa, mu, rho))


def zip_sample(mu, rho, rng: np.random.Generator, size=None):
    """Draw from ZIP(mu, rho): a Bernoulli(rho) structural zero, else Poisson(mu)."""
    mu, rho = _check_params(mu, rho)
    if size is None:
        size = np.broadcast(mu, rho).shape
    structural = rng.random(size) < rho
    counts = rng.poisson(np.broadcast_to(mu, size))
    out = np.where(structural, 0, counts)
    return int(out) if np.ndim(out) == 0 else out


def linear_predictor(X, beta, bound: float = ETA_BOUND):
    return np.clip(np.asarray(X) @ np.asarray(beta), -bound, bound)


def link_mean(x, beta, bound: float = ETA_BOUND):
    """Poisson mean ``exp(x . beta)`` with the linear predictor clamped to +-bound."""
    return np.exp(linear_predictor(x, beta, bound))


@dataclass
class ZipFit:
    beta: np.ndarray
    rho: float
    loglik: float
    n_iter: int
    converged: bool
    degenerate: bool = False


def zip_loglik(y, X, beta, rho) -> float:
    eta = linear_predictor(X, beta)
    return float(np.sum(_logpmf(y, eta, np.exp(eta), rho)))


def _weighted_poisson_newton(y, X, v, beta, max_newton=25, tol=1e-10):
    """Maximise sum_j v_j (y_j eta_j - exp(eta_j)) over beta."""

    def objective(b):
        eta = linear_predictor(X, b)
        return float(np.sum(v * (y * eta - np.exp(eta))))

    f = objective(beta)
    ridge = 1e-10 * np.eye(X.shape[1])
    for _ in range(max_newton):
        mu = link_mean(X, beta)
        grad = X.T @ (v * (y - mu))
        hess = (X * (v * mu)[:, None]).T @ X + ridge
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        t = 1.0
        while True:
            cand = beta + t * step
            f_new = objective(cand)
            if f_new >= f or t < 1e-8:
                break
            t *= 0.5
        if f_new < f:
            break
        improvement = f_new - f
        beta, f = cand, f_new
        if improvement < tol * (1.0 + abs(f)):
            break
    return beta


def fit_zip_mle(y_row, X, max_iter: int = 500, tol: float = 1e-8) -> ZipFit:
    """Per-player ZIP maximum likelihood by EM over structural-zero indicators.

    The M-step solves a weighted Poisson regression by damped Newton steps.
    An all-zero row has no Poisson information; it returns ``rho = 1`` with
    ``beta = 0`` and ``degenerate=True``.
    """
    y = np.asarray(y_row, dtype=float)
    X = np.asarray(X, dtype=float)
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"row has {y.shape[0]} blocks, design has {X.shape[0]}")
    P = X.shape[1]
    if not np.any(y > 0):
        warnings.warn("all-zero count row: degenerate ZIP fit", RuntimeWarning, stacklevel=2)
        return ZipFit(np.zeros(P), 1.0, 0.0, 0, True, degenerate=True)

    zero = y == 0
    beta = np.zeros(P)
    beta[0] = np.log(y.mean())
    rho = float(np.clip(zero.mean() - np.exp(-y.mean()), 0.05, 0.95)) if zero.any() else 0.0
    ll = zip_loglik(y, X, beta, rho)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = link_mean(X, beta)
        tau = np.zeros_like(y)
        if rho > 0:
            tau[zero] = rho / (rho + (1 - rho) * np.exp(-mu[zero]))
        rho = float(tau.mean())
        beta = _weighted_poisson_newton(y, X, 1.0 - tau, beta)
        ll_new = zip_loglik(y, X, beta, rho)
        improvement = ll_new - ll
        ll = ll_new
        if improvement < tol:
            converged = True
            break
    return ZipFit(beta, rho, ll, it, converged)
