import numpy as np
import pytest
from scipy.stats import chisquare

from splitsbi import ConfigurationError
from splitsbi.experiments import load_config
from splitsbi.inference import DCConfig, categorical_assemble, data_conditional_sample, synthetic_likelihood_stats
from splitsbi.inference.dc import normalize_per_time


def test_categorical_assembly_frequencies():
    probs = np.array([0.1, 0.2, 0.3, 0.15, 0.25])
    n_draws = 100_000
    y_paths = np.arange(5, dtype=float).reshape(5, 1, 1)
    logw = np.log(probs)[None, :]
    u = np.random.default_rng(0).random((n_draws, 1))
    picks = categorical_assemble(y_paths, logw, u)[:, 0, 0].astype(int)
    counts = np.bincount(picks, minlength=5)
    assert chisquare(counts, probs * n_draws).pvalue > 0.01


def test_assembly_uses_a_fresh_draw_per_time():
    # two particles with opposite weights at the two times
    y_paths = np.array([[[0.0], [0.0]], [[1.0], [1.0]]])
    logw = np.log(np.array([[1.0, 1e-300], [1e-300, 1.0]]))
    out = categorical_assemble(y_paths, logw, np.array([[0.5, 0.5]]))
    np.testing.assert_array_equal(out[0, :, 0], [0.0, 1.0])


def test_synthetic_stats_two_points():
    st = synthetic_likelihood_stats([[0.0], [2.0]], [[0.0], [2.0]])
    assert st.mu_fwd[0] == pytest.approx(1.0)
    assert st.cov_fwd[0, 0] == pytest.approx(2.0, rel=1e-6)
    assert st.log_ratio(np.array([0.7])) == pytest.approx(0.0, abs=1e-12)


def test_synthetic_stats_need_two_samples():
    with pytest.raises(ConfigurationError):
        synthetic_likelihood_stats([[1.0]], [[1.0], [2.0]])


def test_synthetic_stats_degenerate_sample_is_regularised():
    st = synthetic_likelihood_stats(np.ones((4, 2)), np.ones((4, 2)))
    np.linalg.cholesky(st.cov_fwd)


def test_per_time_normalisation_falls_back_to_uniform():
    logw = np.array([[0.0, np.log(3.0)], [-np.inf, -np.inf]])
    out, dead = normalize_per_time(logw)
    assert dead == 1
    np.testing.assert_allclose(np.exp(out), [[0.25, 0.75], [0.5, 0.5]])


def test_dc_config_validation():
    with pytest.raises(ConfigurationError):
        DCConfig(p_particles=0)
    with pytest.raises(ConfigurationError):
        DCConfig(c_scale=0.5)
    with pytest.raises(ConfigurationError):
        DCConfig(mode="other")


def _small_problem():
    cfg = load_config("two_pool")
    cfg.doc["grid"] = {"n": 10, "delta": 0.2, "a_sub": 5}
    return cfg, cfg.problem()


def test_single_particle_returns_its_own_path():
    cfg, pb = _small_problem()
    smp = data_conditional_sample(pb, cfg.full_theta(), DCConfig(p_particles=1), np.random.default_rng(0))
    np.testing.assert_array_equal(smp.y_dc, smp.y_paths[0])
    np.testing.assert_allclose(np.exp(smp.log_weights), 1.0)


def test_sampler_shapes_and_determinism():
    cfg, pb = _small_problem()
    dc = DCConfig(p_particles=8, c_scale=2.0)
    a = data_conditional_sample(pb, cfg.full_theta(), dc, np.random.default_rng(5))
    b = data_conditional_sample(pb, cfg.full_theta(), dc, np.random.default_rng(5))
    assert a.y_paths.shape == (8, 10, 1)
    assert a.log_weights.shape == (10, 8)
    assert a.y_extra.shape == (8, 10, 1)
    np.testing.assert_allclose(np.exp(a.log_weights).sum(axis=1), 1.0)
    np.testing.assert_array_equal(a.y_dc, b.y_dc)
    # each assembled value is one of the particle values at that time
    for t in range(10):
        assert a.y_dc[t, 0] in a.y_paths[:, t, 0]


def test_assembly_is_exchangeable_in_particle_order():
    rng = np.random.default_rng(3)
    y_paths = rng.normal(size=(6, 4, 1))
    logw = np.log(rng.dirichlet(np.ones(6), size=4))
    u = rng.random((20_000, 4))
    perm = rng.permutation(6)
    a = categorical_assemble(y_paths, logw, u)
    b = categorical_assemble(y_paths[perm], logw[:, perm], u)
    # same value distribution per time (different mapping from uniforms)
    for t in range(4):
        va, ca = np.unique(a[:, t, 0], return_counts=True)
        vb, cb = np.unique(b[:, t, 0], return_counts=True)
        np.testing.assert_array_equal(va, vb)
        assert np.max(np.abs(ca - cb)) / 20_000 < 0.02


def test_assembled_path_tracks_data_better_than_forward_paths():
    cfg, pb = _small_problem()
    smp = data_conditional_sample(pb, cfg.full_theta(), DCConfig(p_particles=32, c_scale=1.0), np.random.default_rng(1))
    err_dc = np.mean((smp.y_dc - pb.y_obs) ** 2)
    err_fwd = np.mean((smp.y_paths - pb.y_obs) ** 2)
    assert err_dc < err_fwd
