"""Particle clouds, Gaussian perturbation kernels, weights and tolerance schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..errors import DomainError
from ..observation import JITTER, gaussian_logpdf
from .prior import PriorSpec


@dataclass
class ParticleCloud:
    """Weighted parameter particles of one round.

    Attributes:
        round: 1-based round index.
        thetas: ``(M, p)`` particles.
        weights: normalised weights.
        distances: accepted distances.
        cov: perturbation covariance used to propose this round
            (``None`` for prior draws).
        epsilon: acceptance threshold of the round.
    """

    round: int
    thetas: np.ndarray
    weights: np.ndarray
    distances: np.ndarray
    cov: np.ndarray | None = None
    epsilon: float = np.inf

    @property
    def size(self) -> int:
        return self.thetas.shape[0]

    @property
    def ess(self) -> float:
        return effective_sample_size(self.weights)

    def mean(self) -> np.ndarray:
        return self.weights @ self.thetas

    def quantile(self, q) -> np.ndarray:
        """Weighted marginal quantiles, shape ``(len(q), p)``."""
        q = np.atleast_1d(q)
        out = np.empty((q.size, self.thetas.shape[1]))
        for k in range(self.thetas.shape[1]):
            order = np.argsort(self.thetas[:, k], kind="stable")
            cw = np.cumsum(self.weights[order])
            cw /= cw[-1]
            idx = np.minimum(np.searchsorted(cw, q, side="left"), len(cw) - 1)
            out[:, k] = self.thetas[order[idx], k]
        return out


def effective_sample_size(weights) -> float:
    w = np.asarray(weights, dtype=float)
    return float(w.sum() ** 2 / np.sum(w * w))


def normalize_log_weights(logw) -> tuple[np.ndarray, bool]:
    """Normalise log-weights; all ``-inf`` (or NaN) falls back to uniform with a flag."""
    logw = np.asarray(logw, dtype=float)
    finite = np.isfinite(logw)
    if not finite.any():
        return np.full(logw.shape, 1.0 / logw.size), True
    logw = np.where(finite, logw, -np.inf)
    w = np.exp(logw - logw.max())
    return w / w.sum(), False


def weighted_covariance(thetas, weights) -> np.ndarray:
    """``sum_i w_i (theta_i - m)(theta_i - m)^T`` with normalised ``w``."""
    t = np.asarray(thetas, dtype=float)
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    c = t - w @ t
    return (c * w[:, None]).T @ c


def perturbation_cov(cloud: ParticleCloud, jitter: float = JITTER) -> np.ndarray:
    """Twice the weighted particle covariance, jittered on the diagonal."""
    cov = 2.0 * weighted_covariance(cloud.thetas, cloud.weights)
    return cov + jitter * np.eye(cov.shape[0])


def _chol(cov):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise DomainError("perturbation covariance is not positive definite") from exc


def perturb(
    cloud: ParticleCloud,
    prior: PriorSpec,
    rng: np.random.Generator,
    cov=None,
    max_tries: int = 100_000,
) -> tuple[np.ndarray, int]:
    """Draw an ancestor by weight and add ``N(0, cov)`` noise until inside the prior.

    Returns:
        ``(theta, rejections)``: the proposal and the number of draws that
        fell outside the prior box.
    """
    cov = perturbation_cov(cloud) if cov is None else np.asarray(cov, dtype=float)
    chol = _chol(cov)
    cdf = np.cumsum(cloud.weights)
    for tries in range(max_tries):
        j = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), cloud.size - 1)
        theta = cloud.thetas[j] + chol @ rng.standard_normal(cloud.thetas.shape[1])
        if prior.contains(theta):
            return theta, tries
    raise DomainError("perturbation kernel cannot reach the prior support")


def log_kernel_mixture(theta, cloud: ParticleCloud, cov) -> np.ndarray:
    """``log sum_j w_j N(theta | theta_j, cov)``; ``theta`` may be batched ``(..., p)``."""
    theta = np.asarray(theta, dtype=float)
    lp = gaussian_logpdf(theta[..., None, :], cloud.thetas, cov, jitter=0.0)
    with np.errstate(divide="ignore"):
        logw = np.log(cloud.weights)
    return logsumexp(lp + logw, axis=-1)


def smc_log_weight(theta, prior: PriorSpec, cloud: ParticleCloud | None, cov=None) -> np.ndarray:
    """Unnormalised log importance weight of forward-only ABC-SMC."""
    lp = prior.logpdf(theta)
    if cloud is None:
        return lp
    if cov is None:
        cov = perturbation_cov(cloud)
    return lp - log_kernel_mixture(theta, cloud, cov)


def smc_particle_weight(theta, prior: PriorSpec, cloud: ParticleCloud | None, cov=None) -> float:
    """``prior(theta) / sum_j w_j N(theta | theta_j, cov)``."""
    return float(np.exp(smc_log_weight(theta, prior, cloud, cov)))


def dc_log_weight(theta, s_dc, prior: PriorSpec, cloud: ParticleCloud | None, cov, stats) -> np.ndarray:
    """Log of :func:`dc_particle_weight`.

    Without a previous cloud (first round) only the likelihood ratio is
    used.
    """
    ratio = stats.log_ratio(s_dc)
    if cloud is None:
        return ratio
    return smc_log_weight(theta, prior, cloud, cov) + ratio


def dc_particle_weight(theta, s_dc, prior: PriorSpec, cloud: ParticleCloud | None, cov, stats) -> float:
    """Importance weight of a data-conditional proposal.

    The forward-only weight times ``N(s_dc | mu_fwd, cov_fwd) /
    N(s_dc | mu_dc, cov_dc)``, differenced in log space before
    exponentiating. Zero outside the prior.
    """
    return float(np.exp(dc_log_weight(theta, s_dc, prior, cloud, cov, stats)))


def epsilon_update(distances, alpha: float = 0.5) -> float:
    """Linear-interpolation ``alpha``-quantile of the accepted distances."""
    d = np.asarray(distances, dtype=float)
    if d.size == 0:
        raise ValueError("need at least one distance")
    return float(np.quantile(d, alpha, method="linear"))
