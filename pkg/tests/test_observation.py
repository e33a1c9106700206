import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid
from scipy.stats import multivariate_normal

from splitsbi import ConfigurationError, DomainError, two_pool
from splitsbi.observation import Dataset, ObservationModel, gaussian_logpdf, obs_log_density, observe
from splitsbi.sim import SchemeConfig, TimeGrid, simulate_path


def _traj():
    grid = TimeGrid(0.0, 10, 0.2, 5)
    return simulate_path(two_pool(), SchemeConfig("split-twopool-lietrotter", 0), [100, 0], [0.1, 0.2, 0.2, 0.5], grid)


def test_identity_observation_without_noise():
    traj = _traj()
    data = observe(traj, ObservationModel(np.eye(2)), np.random.default_rng(0))
    np.testing.assert_array_equal(data.values, traj.obs_states)
    np.testing.assert_allclose(data.times, traj.grid.obs_times())


def test_zero_covariance_equals_noiseless():
    traj = _traj()
    clean = observe(traj, ObservationModel.select(2, [0]), np.random.default_rng(0))
    zero = observe(traj, ObservationModel.select(2, [0], sigma_err=0.0), np.random.default_rng(0))
    np.testing.assert_array_equal(clean.values, zero.values)


def test_protein_selection():
    m = ObservationModel.select(6, [1, 3, 5], sigma_err=5.0)
    assert m.d_obs == 3 and m.d_state == 6
    np.testing.assert_array_equal(m.observed, [1, 3, 5])
    np.testing.assert_allclose(m.cov(), 25 * np.eye(3))


def test_invalid_selection_matrices():
    with pytest.raises(ConfigurationError):
        ObservationModel(np.array([[0.5, 0.5]]))
    with pytest.raises(ConfigurationError):
        ObservationModel(np.array([[1.0, 0.0], [1.0, 0.0]]))
    with pytest.raises(ConfigurationError):
        ObservationModel(np.eye(2), noise_cov=np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_parameterised_noise_scale():
    m = ObservationModel.select(2, [0], sigma_index=4)
    theta = np.array([[0.1, 0.2, 0.2, 0.5, 2.0], [0.1, 0.2, 0.2, 0.5, 3.0]])
    np.testing.assert_allclose(m.cov(theta)[:, 0, 0], [4.0, 9.0])


def test_noise_moments():
    cov = np.array([[4.0, 1.0], [1.0, 2.0]])
    m = ObservationModel(np.eye(2), noise_cov=cov)
    n = 100_000
    xi = m.noise((n,), None, np.random.default_rng(1))
    emp = np.cov(xi.T)
    # sd of a sample covariance entry: sqrt((S_ij^2 + S_ii S_jj) / n)
    se = np.sqrt((cov**2 + np.outer(np.diag(cov), np.diag(cov))) / n)
    assert np.all(np.abs(emp - cov) < 3 * se)


def test_log_density_examples():
    assert obs_log_density([0.0], [0.0], [[1.0]]) == pytest.approx(-0.5 * np.log(2 * np.pi))
    s = 1.7
    assert obs_log_density([s], [0.0], [[s * s]]) == pytest.approx(-0.5 * np.log(2 * np.pi * s * s) - 0.5)


def test_log_density_integrates_to_one():
    grid = np.linspace(-12, 12, 20001)
    dens = np.exp(gaussian_logpdf(grid[:, None], np.array([0.4]), np.array([[2.0]])))
    assert trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-4)


def test_log_density_rejects_indefinite():
    with pytest.raises(DomainError):
        gaussian_logpdf(np.zeros(2), np.zeros(2), np.array([[1.0, 3.0], [3.0, 1.0]]))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(0, 10_000))
def test_log_density_matches_scipy_and_is_symmetric(k, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(k, k))
    cov = a @ a.T + 0.5 * np.eye(k)
    x, m = rng.normal(size=k), rng.normal(size=k)
    got = gaussian_logpdf(x, m, cov, jitter=0.0)
    assert got == pytest.approx(multivariate_normal(m, cov).logpdf(x), rel=1e-10)
    assert got == pytest.approx(gaussian_logpdf(m, x, cov, jitter=0.0), rel=1e-12)


def test_batched_covariances():
    rng = np.random.default_rng(3)
    covs = np.stack([np.eye(2) * s for s in (1.0, 2.0, 3.0)])
    x = rng.normal(size=(3, 2))
    got = gaussian_logpdf(x, np.zeros(2), covs, jitter=0.0)
    want = [multivariate_normal(np.zeros(2), c).logpdf(v) for c, v in zip(covs, x)]
    np.testing.assert_allclose(got, want, rtol=1e-12)


def test_dataset_csv_round_trip(tmp_path):
    data = Dataset(np.arange(5) * 0.2, np.random.default_rng(2).normal(size=(5, 2)), {"seed": 3})
    path = tmp_path / "obs.csv"
    data.to_csv(path)
    back = Dataset.from_csv(path)
    np.testing.assert_array_equal(back.values, data.values)
    np.testing.assert_array_equal(back.times, data.times)
    assert back.provenance == {"seed": 3}
    assert back.n == 4 and back.delta == pytest.approx(0.2)


def test_dataset_requires_equidistant_times():
    with pytest.raises(ConfigurationError):
        Dataset([0.0, 0.2, 0.5], np.zeros(3))
