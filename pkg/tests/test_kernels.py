import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import multivariate_normal

from splitsbi.inference import (
    ParticleCloud,
    PriorSpec,
    SyntheticLikelihoodStats,
    dc_particle_weight,
    effective_sample_size,
    epsilon_update,
    perturb,
    perturbation_cov,
    smc_particle_weight,
    weighted_covariance,
)
from splitsbi.inference.kernels import normalize_log_weights

PRIOR = PriorSpec(("a", "b"), [0.0, 0.0], [1.0, 5.0])


def _cloud(thetas, weights=None):
    thetas = np.asarray(thetas, dtype=float)
    if weights is None:
        weights = np.full(len(thetas), 1.0 / len(thetas))
    return ParticleCloud(1, thetas, np.asarray(weights, dtype=float), np.zeros(len(thetas)))


def test_prior_density_and_support():
    assert PRIOR.log_density_inside == pytest.approx(-np.log(5.0))
    assert PRIOR.pdf([0.5, 2.0]) == pytest.approx(0.2)
    assert PRIOR.pdf([1.5, 2.0]) == 0.0
    draws = PRIOR.sample(np.random.default_rng(0), 1000)
    assert np.all(PRIOR.contains(draws))


def test_weighted_covariance_against_numpy():
    rng = np.random.default_rng(1)
    t = rng.normal(size=(50, 3))
    w = rng.random(50)
    np.testing.assert_allclose(weighted_covariance(t, w), np.cov(t.T, aweights=w, bias=True), rtol=1e-12)


def test_perturbation_cov_is_twice_particle_variance():
    cloud = _cloud([[0.0], [2.0]])
    assert perturbation_cov(cloud, jitter=0.0)[0, 0] == pytest.approx(2.0)


def test_epsilon_update_examples():
    assert epsilon_update([1, 2, 3, 4]) == pytest.approx(2.5)
    assert epsilon_update([1, 2, 3, 4], alpha=1.0) == 4.0
    with pytest.raises(ValueError):
        epsilon_update([])


def test_ess_bounds():
    assert effective_sample_size(np.full(10, 0.1)) == pytest.approx(10.0)
    assert effective_sample_size([1.0, 0.0, 0.0]) == pytest.approx(1.0)


def test_normalize_log_weights_fallback():
    w, flat = normalize_log_weights([-np.inf, -np.inf])
    np.testing.assert_allclose(w, 0.5)
    assert flat
    w, flat = normalize_log_weights([0.0, np.log(3.0)])
    np.testing.assert_allclose(w, [0.25, 0.75])
    assert not flat


def test_perturb_stays_inside_prior():
    rng = np.random.default_rng(2)
    cloud = _cloud([[0.99, 0.01], [0.5, 4.9]])
    for _ in range(200):
        theta, rej = perturb(cloud, PRIOR, rng)
        assert PRIOR.contains(theta)
        assert rej >= 0


def test_quantile_of_uniform_cloud():
    cloud = _cloud(np.arange(1, 101, dtype=float)[:, None])
    # probes sit strictly between cumulative-weight steps, away from rounding ties
    q = cloud.quantile([0.025, 0.505, 0.975])
    np.testing.assert_allclose(q[:, 0], [3.0, 51.0, 98.0])


def test_first_round_weight_is_prior_density():
    assert smc_particle_weight([0.5, 1.0], PRIOR, None) == pytest.approx(0.2)


def test_single_particle_weight_matches_formula():
    cloud = _cloud([[0.4, 2.0]], [1.0])
    cov = np.diag([0.1, 0.5])
    theta = np.array([0.5, 2.5])
    want = 0.2 / multivariate_normal([0.4, 2.0], cov).pdf(theta)
    assert smc_particle_weight(theta, PRIOR, cloud, cov) == pytest.approx(want, rel=1e-12)


def test_weight_outside_prior_is_zero():
    cloud = _cloud([[0.4, 2.0], [0.6, 3.0]])
    assert smc_particle_weight([1.2, 2.0], PRIOR, cloud) == 0.0
    stats = SyntheticLikelihoodStats(np.zeros(1), np.eye(1), np.zeros(1), np.eye(1))
    assert dc_particle_weight([1.2, 2.0], [0.0], PRIOR, cloud, None, stats) == 0.0


def test_first_round_dc_weight_is_likelihood_ratio():
    stats = SyntheticLikelihoodStats(np.array([1.0]), np.eye(1) * 2.0, np.array([0.0]), np.eye(1))
    s = np.array([0.3])
    want = multivariate_normal(1.0, 2.0).pdf(0.3) / multivariate_normal(0.0, 1.0).pdf(0.3)
    assert dc_particle_weight([0.5, 1.0], s, PRIOR, None, None, stats) == pytest.approx(want, rel=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 3.0))
def test_dc_weight_reduces_to_smc_weight_when_fits_agree(seed, scale):
    rng = np.random.default_rng(seed)
    cloud = _cloud(PRIOR.sample(rng, 5), rng.random(5) + 0.1)
    cloud.weights /= cloud.weights.sum()
    mu = rng.normal(size=3)
    a = rng.normal(size=(3, 3))
    cov = a @ a.T + scale * np.eye(3)
    stats = SyntheticLikelihoodStats(mu, cov, mu.copy(), cov.copy())
    theta = PRIOR.sample(rng)
    s = rng.normal(size=3)
    kcov = perturbation_cov(cloud)
    assert dc_particle_weight(theta, s, PRIOR, cloud, kcov, stats) == pytest.approx(
        smc_particle_weight(theta, PRIOR, cloud, kcov), rel=1e-12
    )
