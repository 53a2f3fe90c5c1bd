"""Gaussian-mixture anomaly detector.

Fits k full-covariance Gaussians to one user's gesture features by EM, then
scores a gesture as the best cluster's log joint probability
log(phi_j * N(x; mu_j, Sigma_j)). Scores below a threshold calibrated on
the user's own training scores are rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class AnomalyError(ValueError):
    pass


@dataclass
class GmmModel:
    k: int
    phi: np.ndarray              # (k,) mixing weights
    mu: np.ndarray               # (k, d)
    sigma: np.ndarray            # (k, d, d), already includes reg_eps * I
    reg_eps: float
    log_likelihood_trace: list[float] = field(default_factory=list)


@dataclass
class AnomalyThreshold:
    threshold: float
    acceptance_quantile: float


def _logsumexp(a, axis=None):
    amax = np.max(a, axis=axis, keepdims=True)
    amax = np.where(np.isfinite(amax), amax, 0.0)
    out = np.log(np.sum(np.exp(a - amax), axis=axis, keepdims=True)) + amax
    return np.squeeze(out, axis=axis) if axis is not None else float(out)


def _log_gaussian(X, mu, sigma):
    """Row-wise log N(x; mu, sigma) via Cholesky."""
    d = len(mu)
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise AnomalyError(
            "singular covariance; fit with reg_eps > 0 to regularize") from None
    diff = X - mu
    sol = np.linalg.solve(L, diff.T)
    maha = np.sum(sol ** 2, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * (d * math.log(2 * math.pi) + logdet + maha)


def _component_log_joint(model_or_params, X):
    phi, mu, sigma = model_or_params
    X = np.atleast_2d(X)
    k = len(phi)
    out = np.empty((len(X), k))
    for j in range(k):
        out[:, j] = math.log(max(phi[j], 1e-300)) + _log_gaussian(X, mu[j], sigma[j])
    return out


def _init_means(X, k, rng):
    """k-means++-style seeding: spread initial means across the data."""
    m = len(X)
    idx = [rng.integers(m)]
    for _ in range(k - 1):
        d2 = np.min([np.sum((X - X[i]) ** 2, axis=1) for i in idx], axis=0)
        total = d2.sum()
        if total <= 0:
            idx.append(rng.integers(m))
            continue
        idx.append(int(rng.choice(m, p=d2 / total)))
    return X[idx].copy()


def gmm_fit(X, k, reg_eps=1e-6, seed=0, max_iter=200, tol=1e-7) -> GmmModel:
    """EM for a k-component full-covariance mixture.

    E-step computes responsibilities in log space; M-step re-estimates
    weights, means, and covariances, adding reg_eps to each covariance
    diagonal.
    """
    X = np.asarray(X, dtype=float)
    m, d = X.shape
    if m < k:
        raise AnomalyError(f"need at least k={k} samples, got {m}")
    if reg_eps < 0:
        raise AnomalyError("reg_eps must be non-negative")

    rng = np.random.default_rng(seed)
    mu = _init_means(X, k, rng)
    global_cov = np.cov(X.T, bias=True).reshape(d, d) + reg_eps * np.eye(d)
    sigma = np.tile(global_cov, (k, 1, 1))
    phi = np.full(k, 1.0 / k)

    trace = []
    prev_ll = -np.inf
    for _ in range(max_iter):
        # E-step
        log_joint = _component_log_joint((phi, mu, sigma), X)   # (m, k)
        log_norm = _logsumexp(log_joint, axis=1)
        ll = float(log_norm.sum())
        if ll < prev_ll:
            # the covariance regularizer is not part of the likelihood, so it
            # can cause a vanishing dip near the optimum; keep the best iterate
            phi, mu, sigma = prev_params
            break
        Q = np.exp(log_joint - log_norm[:, None])
        trace.append(ll)
        prev_params = (phi.copy(), mu.copy(), sigma.copy())
        # M-step
        nj = Q.sum(axis=0)
        phi = nj / m
        safe_nj = np.maximum(nj, 1e-300)
        mu = (Q.T @ X) / safe_nj[:, None]
        for j in range(k):
            diff = X - mu[j]
            sigma[j] = (Q[:, j][:, None] * diff).T @ diff / safe_nj[j]
            sigma[j].flat[::d + 1] += reg_eps
        if ll - prev_ll < tol and np.isfinite(prev_ll):
            break
        prev_ll = ll
    return GmmModel(k=k, phi=phi, mu=mu, sigma=sigma, reg_eps=reg_eps,
                    log_likelihood_trace=trace)


def gmm_score(model: GmmModel, x) -> float | np.ndarray:
    """Best-cluster score: max_j log(phi_j * N(x; mu_j, sigma_j))."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != model.mu.shape[1]:
        raise AnomalyError("feature dimension mismatch")
    scores = _component_log_joint((model.phi, model.mu, model.sigma), X).max(axis=1)
    return float(scores[0]) if single else scores


def log_likelihood(model: GmmModel, X) -> float:
    """Observed-data log-likelihood of the full mixture."""
    lj = _component_log_joint((model.phi, model.mu, model.sigma), np.atleast_2d(X))
    return float(_logsumexp(lj, axis=1).sum())


def calibrate_threshold(training_scores, acceptance_quantile=0.05) -> AnomalyThreshold:
    """Empirical quantile of genuine training scores; gestures scoring at or
    above it are accepted."""
    scores = np.asarray(training_scores, dtype=float)
    if len(scores) < 20:
        raise AnomalyError("need at least 20 training scores to calibrate")
    if not 0 <= acceptance_quantile < 1:
        raise AnomalyError("acceptance_quantile must be in [0, 1)")
    if acceptance_quantile == 0:
        thr = float(scores.min())
    else:
        thr = float(np.quantile(scores, acceptance_quantile, method="lower"))
    return AnomalyThreshold(threshold=thr, acceptance_quantile=acceptance_quantile)


def classify_anomaly(model: GmmModel, threshold: AnomalyThreshold, x):
    """accept iff score >= threshold; returns (accepted, score)."""
    score = gmm_score(model, x)
    if np.isscalar(score) or isinstance(score, float):
        return score >= threshold.threshold, score
    return score >= threshold.threshold, score
