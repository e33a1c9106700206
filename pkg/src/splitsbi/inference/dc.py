"""Data-conditional path sampling and its synthetic-likelihood correction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..crn import _propensities
from ..errors import ConfigurationError
from ..observation import JITTER, gaussian_logpdf
from .problem import InferenceProblem

NOISY = "noisy"
NOISELESS = "noiseless"


@dataclass(frozen=True)
class DCConfig:
    """Settings of the data-conditional sampler.

    Attributes:
        p_particles: forward paths per proposal.
        c_scale: inflation of the weighting covariance.
        mode: ``"noisy"`` (weights from the measurement density) or
            ``"noiseless"`` (one-step Gaussian transition surrogate).
        shared_cov: evaluate both Gaussians of the likelihood-ratio
            correction with the forward covariance. The data-conditional
            covariance collapses whenever the lookahead weights pick the
            same particle at most times, which makes the two-covariance
            ratio extremely heavy-tailed.
    """

    p_particles: int = 32
    c_scale: float = 2.0
    mode: str = NOISY
    shared_cov: bool = True

    def __post_init__(self):
        if int(self.p_particles) != self.p_particles or self.p_particles < 1:
            raise ConfigurationError("p_particles must be a positive integer")
        if not self.c_scale >= 1:
            raise ConfigurationError("c_scale must be at least 1")
        if self.mode not in (NOISY, NOISELESS):
            raise ConfigurationError(f"mode must be {NOISY!r} or {NOISELESS!r}")


def _stable_cov(cov, jitter=JITTER):
    """Add ``jitter * I``; escalate (relative to the diagonal) until Cholesky succeeds."""
    k = cov.shape[-1]
    eye = np.eye(k)
    out = cov + jitter * eye
    step = max(float(np.mean(np.diag(cov))), 1.0) * 1e-12
    for _ in range(12):
        try:
            np.linalg.cholesky(out)
            return out
        except np.linalg.LinAlgError:
            step *= 10.0
            out = cov + (jitter + step) * eye
    return out


@dataclass(frozen=True)
class SyntheticLikelihoodStats:
    """Gaussian fits to forward and data-conditional summary samples."""

    mu_fwd: np.ndarray
    cov_fwd: np.ndarray
    mu_dc: np.ndarray
    cov_dc: np.ndarray
    shared_cov: bool = False

    def log_ratio(self, s) -> np.ndarray:
        """``log N(s | fwd) - log N(s | dc)``; with ``shared_cov`` both use ``cov_fwd``."""
        cov_dc = self.cov_fwd if self.shared_cov else self.cov_dc
        return gaussian_logpdf(s, self.mu_fwd, self.cov_fwd, jitter=0.0) - gaussian_logpdf(
            s, self.mu_dc, cov_dc, jitter=0.0
        )


def synthetic_likelihood_stats(s_fwd, s_dc, shared_cov: bool = False) -> SyntheticLikelihoodStats:
    """Sample means and unbiased covariances of two summary samples ``(P, p)``."""
    s_fwd = np.atleast_2d(np.asarray(s_fwd, dtype=float))
    s_dc = np.atleast_2d(np.asarray(s_dc, dtype=float))
    if s_fwd.shape[0] < 2 or s_dc.shape[0] < 2:
        raise ConfigurationError("synthetic likelihood needs at least two samples")

    def fit(s):
        return s.mean(axis=0), _stable_cov(np.atleast_2d(np.cov(s, rowvar=False)))

    mf, cf = fit(s_fwd)
    md, cd = fit(s_dc)
    return SyntheticLikelihoodStats(mf, cf, md, cd, shared_cov)


@dataclass
class DCSample:
    """Output of the data-conditional sampler for one parameter.

    Attributes:
        y_paths: forward pseudo-observations ``(P, n, d_obs)``.
        log_weights: normalised log lookahead weights ``(n, P)``.
        y_dc: the assembled path ``(n, d_obs)``.
        y_extra: further assemblies from the same particle system
            ``(n_extra, n, d_obs)``.
        degenerate: number of observation times whose weights all vanished.
        clamps: integrator clamp events summed over the ``P`` paths.
    """

    y_paths: np.ndarray
    log_weights: np.ndarray
    y_dc: np.ndarray
    y_extra: np.ndarray
    degenerate: int
    clamps: int

    def closest_path(self, y_obs) -> np.ndarray:
        """Forward path nearest to ``y_obs`` in Euclidean distance."""
        d2 = np.sum((self.y_paths - y_obs) ** 2, axis=(1, 2))
        return self.y_paths[int(np.argmin(d2))]


def categorical_assemble(y_paths, log_weights, u) -> np.ndarray:
    """Pick one particle per time by inverse CDF.

    Args:
        y_paths: ``(P, n, d_obs)`` particle values.
        log_weights: ``(n, P)`` normalised log weights.
        u: uniforms ``(k, n)``, one row per assembled path.

    Returns:
        ``(k, n, d_obs)`` assembled paths.
    """
    cdf = np.cumsum(np.exp(log_weights), axis=1)
    cdf /= cdf[:, -1:]
    idx = np.sum(cdf[None, :, :] <= np.asarray(u)[:, :, None], axis=2)
    idx = np.minimum(idx, cdf.shape[1] - 1)
    n = log_weights.shape[0]
    return y_paths[idx, np.arange(n)[None, :]]


def normalize_per_time(logw) -> tuple[np.ndarray, int]:
    """Normalise ``(n, P)`` log weights over particles; returns the number of uniform fallbacks."""
    logw = np.where(np.isnan(logw), -np.inf, logw)
    dead = ~np.isfinite(logw).any(axis=1)
    if dead.any():
        logw = logw.copy()
        logw[dead] = 0.0
    return logw - logsumexp(logw, axis=1, keepdims=True), int(dead.sum())


def _noisy_logw(problem: InferenceProblem, y_paths, theta, c_scale):
    cov = problem.obs_model.cov(theta)
    # y_paths (P, n, d_obs) against y_obs (n, d_obs)
    return gaussian_logpdf(problem.y_obs, y_paths, c_scale * cov).T


def _noiseless_logw(problem: InferenceProblem, pen, theta, c_scale):
    net = problem.net
    g = problem.grid
    th = theta[: net.p]
    a = np.clip(_propensities(net, pen, th), 0.0, None)
    drift = a @ net.nu.T
    obs = problem.obs_model.observed
    nu_o = net.nu[obs].astype(float)
    mean = (pen + g.h * drift)[..., obs]
    cov = c_scale * g.h * (nu_o * a[..., None, :]) @ nu_o.T
    return gaussian_logpdf(problem.y_obs[:, None, :], mean, cov)


def dc_from_states(problem: InferenceProblem, dc: DCConfig, theta, obs_states, pen_states, clamps, rng, n_extra):
    """Weight and assemble the particle system of one proposal.

    ``obs_states`` has shape ``(n + 1, P, d)``; draws from ``rng`` are the
    measurement noise ``(n, P, d_obs)`` (noisy mode) followed by
    ``(1 + n_extra, n)`` uniforms.
    """
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        x = obs_states[1:]
        if dc.mode == NOISY:
            if not problem.obs_model.noisy:
                raise ConfigurationError("noisy data-conditional mode needs a measurement-noise model")
            y = problem.obs_model.project(x) + problem.obs_model.noise(x.shape[:2], theta, rng)
            y_paths = np.swapaxes(y, 0, 1)
            logw = _noisy_logw(problem, y_paths, theta, dc.c_scale)
        else:
            y_paths = np.swapaxes(problem.obs_model.project(x), 0, 1)
            logw = _noiseless_logw(problem, pen_states, theta, dc.c_scale)
    logw, degenerate = normalize_per_time(logw)
    u = rng.random((1 + n_extra, problem.data.n))
    assembled = categorical_assemble(y_paths, logw, u)
    return DCSample(y_paths, logw, assembled[0], assembled[1:], degenerate, int(np.sum(clamps)))


def data_conditional_sample(problem: InferenceProblem, theta, dc: DCConfig, rng: np.random.Generator, n_extra: int | None = None) -> DCSample:
    """Run the data-conditional sampler for one full parameter vector.

    ``P`` forward paths are simulated on the fine grid; at each
    observation time every path's pseudo-observation is weighted against
    the data, and a path is assembled by drawing one particle per time.
    ``n_extra`` further assemblies (default ``P``) feed the synthetic
    likelihood of the assembled summaries.
    """
    theta = np.asarray(theta, dtype=float)
    n_extra = dc.p_particles if n_extra is None else n_extra
    obs, pen, clamps = problem.simulate(theta[None], dc.p_particles, [rng], penultimate=dc.mode == NOISELESS)
    return dc_from_states(
        problem, dc, theta, obs[:, 0], None if pen is None else pen[:, 0], clamps[0], rng, n_extra
    )
