import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.stats import ks_2samp

from splitsbi import ConfigurationError, ReactionNetwork, MassAction, lotka_volterra, repressilator, two_pool
from splitsbi.crn import CondCIRCoefficients, cond_cir_coefficients
from splitsbi.sim import (
    CIRParams,
    SchemeConfig,
    TimeGrid,
    bernoulli_flow,
    brownian_flow,
    cir_component_step,
    cir_exact_sample,
    cond_linear_ode_step,
    eum_step,
    generic_splitting_step,
    gillespie_ssa,
    integrate,
    lv_strang_step,
    perturbation_flow,
    read_states_csv,
    repressilator_strang_step,
    rk4_step,
    simulate_ensemble,
    simulate_path,
    ssa_state_at,
    stream,
    twopool_lietrotter_step,
)

TP_THETA = np.array([0.1, 0.2, 0.2, 0.5])
LV_THETA = np.array([0.5, 0.0025, 0.3])
REP_THETA = np.array([1.0, 1000.0, 2.0, 5.0, 20.0, 1.0])
REP_X0 = np.array([0, 40, 0, 20, 0, 60.0])


def _coeffs(a, b, s_in):
    return CondCIRCoefficients(0, a, b, (0,), (), {0: np.sqrt(s_in)})


# --- sub-flows ------------------------------------------------------------------


def test_bernoulli_identity_at_zero_step():
    z, cl = bernoulli_flow(1.7, _coeffs(1.0, 0.5, 0.3), 0.0)
    assert z == pytest.approx(1.7) and not cl


def test_bernoulli_small_b_limit():
    z, cl = bernoulli_flow(1.0, _coeffs(1.0, 0.0, 0.0), 0.5)
    assert z == pytest.approx(np.sqrt(1.5), abs=1e-12) and not cl
    # continuity across the switch to the limit branch
    z2, _ = bernoulli_flow(1.0, _coeffs(1.0, 2e-10, 0.0), 0.5)
    assert z2 == pytest.approx(z, abs=1e-9)


def test_bernoulli_complex_radicand_clamps():
    z, cl = bernoulli_flow(0.1, _coeffs(0.0, 1.0, 4.0), 1.0)
    assert z == 0.0 and cl


def test_bernoulli_frozen_oracle_values():
    # reference values from an adaptive DOP853 solve at rtol 1e-12
    cases = [
        ((2.0, 3.0, 0.5, 1.0, 0.7), 2.107834876222963),
        ((0.8, 1.0, -0.3, 0.2, 1.0), 1.4042064879637166),
    ]
    for (z0, a, b, s, h), want in cases:
        z, _ = bernoulli_flow(z0, _coeffs(a, b, s), h)
        assert z == pytest.approx(want, abs=1e-9)


def test_brownian_and_perturbation_flows():
    c = CondCIRCoefficients(0, 0.0, 0.0, (0,), (1,), {0: 2.0, 1: 3.0})
    assert brownian_flow(1.0, c, np.array([0.3, 9.0])) == pytest.approx(1.3)
    assert brownian_flow(1.0, c, np.zeros(2)) == 1.0
    assert perturbation_flow(5.0, c, np.array([9.0, 0.5])) == pytest.approx(6.5)
    empty = CondCIRCoefficients(0, 0.0, 0.0, (0,), (), {0: 1.0})
    assert perturbation_flow(5.0, empty, np.array([3.0])) == 5.0


def test_flow_noise_variances():
    rng = np.random.default_rng(1)
    h, n = 0.1, 100_000
    c = CondCIRCoefficients(0, 0.0, 0.0, (0, 1), (2,), {0: 1.5, 1: -0.5, 2: 2.0})
    inc = rng.normal(0, np.sqrt(h), (n, 3))
    z = brownian_flow(np.ones(n), c, inc)
    target = 0.25 * (1.5**2 + 0.5**2) * h
    se = target * np.sqrt(2 / (n - 1))
    assert abs(z.var(ddof=1) - target) < 3 * se
    x = perturbation_flow(np.full(n, 10.0), c, inc)
    target = 4.0 * h
    assert abs(x.var(ddof=1) - target) < 3 * target * np.sqrt(2 / (n - 1))


def test_component_step_identity_and_cir_mean():
    zero = CondCIRCoefficients(0, 0.0, 0.0, (), (), {})
    x, cl = cir_component_step(3.0, zero, 0.1, np.zeros(1))
    assert x == pytest.approx(3.0) and cl == 0
    p = CIRParams(alpha=2.0, beta=1.0, sigma=0.5)
    c = CondCIRCoefficients.pure_cir(p.alpha, p.beta, p.sigma)
    rng = np.random.default_rng(2)
    n, h = 100_000, 0.01
    x, _ = cir_component_step(np.ones(n), c, h, rng.normal(0, np.sqrt(h), (n, 1)))
    assert abs(x.mean() - p.mean(1.0, h)) < 3 * x.std() / np.sqrt(n)


def test_component_step_one_step_ks_against_exact():
    p = CIRParams(alpha=2.0, beta=1.0, sigma=0.5)
    c = CondCIRCoefficients.pure_cir(p.alpha, p.beta, p.sigma)
    rng = np.random.default_rng(3)
    n, h = 50_000, 0.001
    x, _ = cir_component_step(np.ones(n), c, h, rng.normal(0, np.sqrt(h), (n, 1)))
    exact = cir_exact_sample(p, 1.0, h, rng, size=n)
    assert ks_2samp(x, exact).statistic < 0.02


# --- exact samplers -------------------------------------------------------------


def test_cir_exact_moments():
    p = CIRParams(alpha=2.0, beta=1.0, sigma=0.5)
    assert p.feller
    rng = np.random.default_rng(4)
    n = 100_000
    for h in (0.3, 50.0):
        x = cir_exact_sample(p, 1.0, h, rng, size=n)
        assert abs(x.mean() - p.mean(1.0, h)) < 3 * x.std() / np.sqrt(n)
    x = cir_exact_sample(p, 1.0, 0.3, rng, size=n)
    assert x.var() == pytest.approx(p.variance(1.0, 0.3), rel=0.03)


def test_cir_exact_small_noise_limit():
    # sd of a draw is about 0.6 sigma here
    p = CIRParams(alpha=2.0, beta=1.0, sigma=1e-7)
    x = cir_exact_sample(p, 1.0, 0.5, np.random.default_rng(5), size=10)
    np.testing.assert_allclose(x, p.mean(1.0, 0.5), atol=1e-6)


def test_ssa_constant_path_and_decay_mean():
    net = ReactionNetwork(np.array([[-1]]), (MassAction(0, (1,)),), ("X",), ("k",))
    times, states = gillespie_ssa(net, [5], [0.0], 10.0, np.random.default_rng(0))
    assert len(times) == 1 and states[0, 0] == 5
    x = ssa_state_at(net, [1000], [0.1], 5.0, 10_000, np.random.default_rng(6))[:, 0]
    target = 1000 * np.exp(-0.5)
    assert abs(x.mean() - target) < 3 * x.std() / np.sqrt(x.size)


# --- scheme steps -----------------------------------------------------------------


def test_eum_deterministic_step_and_truncation():
    net = two_pool()
    x, cl = eum_step(net, [100.0, 0.0], TP_THETA, 0.1, np.zeros(4))
    np.testing.assert_allclose(x, [97.0, 2.0])
    assert cl == 0
    x, cl = eum_step(net, [100.0, 0.0], TP_THETA, 0.1, np.array([50.0, 0, 0, 0]))
    assert x[0] == 0.0 and cl == 1


def test_generic_equals_twopool_given_same_noise():
    rng = np.random.default_rng(7)
    net = two_pool()
    for _ in range(50):
        x = rng.uniform(0, 200, 2)
        xi = rng.standard_normal(4)
        h = rng.uniform(0.001, 0.5)
        a, ca = generic_splitting_step(net, x, TP_THETA, h, xi=xi, order=(0, 1))
        b, cb = twopool_lietrotter_step(x, TP_THETA, h, xi=xi)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
        assert ca == cb


def test_zero_step_is_identity():
    rng = np.random.default_rng(8)
    x, _ = repressilator_strang_step(REP_X0, REP_THETA, 0.0, rng)
    np.testing.assert_allclose(x, REP_X0, atol=1e-12)
    x, _ = lv_strang_step([100.0, 80.0], LV_THETA, 0.0, rng)
    np.testing.assert_allclose(x, [100.0, 80.0], atol=1e-12)
    x, _ = twopool_lietrotter_step([100.0, 3.0], TP_THETA, 0.0, rng)
    np.testing.assert_allclose(x, [100.0, 3.0], atol=1e-12)
    np.testing.assert_allclose(cond_linear_ode_step(repressilator(), REP_X0, REP_THETA, 0.0), REP_X0)


def test_repressilator_small_noise_tracks_ode():
    # with zero normals the merged flows keep an Ito correction, so agreement is O(h) per step
    x = np.array([10.0, 40.0, 20.0, 20.0, 5.0, 60.0])
    h = 1e-3
    det = cond_linear_ode_step(repressilator(), x, REP_THETA, h)
    sto, _ = repressilator_strang_step(x, REP_THETA, h, xi=np.zeros(9))
    assert np.max(np.abs(det - sto)) < 50 * h


def test_twopool_decoupled_decay_mean():
    theta = np.array([0.3, 0.2, 0.0, 0.0])
    grid = TimeGrid.from_step(2.0, 0.02)
    ens = simulate_ensemble(two_pool(), SchemeConfig("split-twopool-lietrotter", 9), [100, 0], theta, grid, 4000, "final")
    x1 = ens.final[:, 0]
    assert abs(x1.mean() - 100 * np.exp(-0.6)) < 3 * x1.std() / np.sqrt(x1.size)


def test_rk4_taylor_and_order():
    net = ReactionNetwork(np.array([[1]]), (MassAction(0, (1,)),), ("X",), ("k",))
    x = rk4_step(net, [2.0], [1.0], 0.1)
    assert x[0] == pytest.approx(2.0 * (1 + 0.1 + 0.005 + 0.1**3 / 6 + 0.1**4 / 24), rel=1e-14)
    tp = two_pool()
    drift = np.array([[-0.3, 0.5], [0.2, -0.7]])
    x0 = np.array([100.0, 10.0])
    hs = np.array([0.4, 0.2, 0.1, 0.05])
    err = [np.abs(rk4_step(tp, x0, TP_THETA, h) - expm(drift * h) @ x0).max() for h in hs]
    slope = np.polyfit(np.log(hs), np.log(err), 1)[0]
    assert 4.5 < slope < 5.5


def test_cond_linear_ode_matches_expm_when_split_commutes():
    theta = np.array([0.1, 0.2, 0.0, 0.0])
    x0 = np.array([100.0, 30.0])
    x = cond_linear_ode_step(two_pool(), x0, theta, 0.7)
    np.testing.assert_allclose(x, expm(np.diag([-0.1, -0.2]) * 0.7) @ x0, rtol=1e-10)


def test_model_specific_scheme_needs_matching_model():
    with pytest.raises(ConfigurationError):
        SchemeConfig("split-lv-strang", 0).build(two_pool())
    with pytest.raises(ConfigurationError):
        SchemeConfig("leapfrog", 0)


# --- simulation drivers -------------------------------------------------------------


def test_grid_shapes_repressilator():
    grid = TimeGrid(0.0, 50, 0.2, 10)
    assert grid.h == pytest.approx(0.02)
    traj = simulate_path(repressilator(), SchemeConfig("split-repressilator-strang", 1), REP_X0, REP_THETA, grid)
    assert traj.states.shape == (501, 6)
    assert traj.obs_states.shape == (51, 6)
    np.testing.assert_array_equal(traj.states[0], REP_X0)
    np.testing.assert_allclose(grid.fine_times()[::10], grid.obs_times())


def test_single_step_path_equals_scheme_step():
    grid = TimeGrid(0.0, 1, 0.1, 1)
    traj = simulate_path(two_pool(), SchemeConfig("split-twopool-lietrotter", 3), [100, 5], TP_THETA, grid)
    xi = stream(3, 0).standard_normal((1, 4))
    step, _ = twopool_lietrotter_step(np.array([[100.0, 5.0]]), TP_THETA, 0.1, xi=xi)
    np.testing.assert_array_equal(traj.states[1], step[0])


def test_determinism_and_thread_invariance():
    grid = TimeGrid(0.0, 10, 0.5, 5)
    cfg = SchemeConfig("split-lv-strang", 11)
    a = simulate_path(lotka_volterra(), cfg, [100, 100], LV_THETA, grid)
    b = simulate_path(lotka_volterra(), cfg, [100, 100], LV_THETA, grid)
    assert a.states.tobytes() == b.states.tobytes()
    e1 = simulate_ensemble(lotka_volterra(), cfg, [100, 100], LV_THETA, grid, 600, threads=1)
    e3 = simulate_ensemble(lotka_volterra(), cfg, [100, 100], LV_THETA, grid, 600, threads=3)
    assert e1.states.tobytes() == e3.states.tobytes()


def test_trajectory_csv_round_trip(tmp_path):
    grid = TimeGrid(0.0, 4, 0.5, 5)
    traj = simulate_path(two_pool(), SchemeConfig("split-twopool-lietrotter", 2), [100, 0], TP_THETA, grid)
    for res, want in (("fine", traj.states), ("obs", traj.obs_states)):
        path = tmp_path / f"{res}.csv"
        traj.to_csv(path, res)
        t, states, labels = read_states_csv(path)
        np.testing.assert_array_equal(states, want)
        assert labels == ["X1", "X2"]


def test_integrate_rejects_negative_initial_state():
    scheme = SchemeConfig("split-twopool-lietrotter", 0).build(two_pool())
    with pytest.raises(Exception):
        integrate(scheme, [-1.0, 0.0], TP_THETA, 0.1, 2, stream(0))


@settings(max_examples=30, deadline=None)
@given(
    st.sampled_from(["two_pool", "lv", "rep"]),
    st.sampled_from([0.02, 0.1, 0.5]),
    st.integers(0, 2**31 - 1),
)
def test_splitting_positivity(model, h, seed):
    table = {
        "two_pool": (two_pool(), "split-twopool-lietrotter", [100, 0], TP_THETA),
        "lv": (lotka_volterra(), "split-lv-strang", [100, 100], LV_THETA),
        "rep": (repressilator(), "split-repressilator-strang", REP_X0, REP_THETA),
    }
    net, kind, x0, theta = table[model]
    grid = TimeGrid.from_step(20 * h, h)
    ens = simulate_ensemble(net, SchemeConfig(kind, seed), x0, theta, grid, 32, "fine")
    assert np.isfinite(ens.states).all()
    assert (ens.states >= 0).all()
    assert not ens.nonfinite.any()


def test_generic_splitting_positivity_random_steps():
    rng = np.random.default_rng(12)
    net = lotka_volterra()
    x = rng.uniform(0, 300, (10_000, 2))
    out, _ = generic_splitting_step(net, x, LV_THETA, 0.1, rng)
    assert (out >= 0).all() and np.isfinite(out).all()


def test_cond_coefficients_used_by_generic_sweep():
    # one species at a time: a zero-noise generic step of species 0 follows its Bernoulli flow
    net = two_pool()
    x = np.array([50.0, 10.0])
    c = cond_cir_coefficients(net, x, TP_THETA, 0)
    out, _ = generic_splitting_step(net, x, TP_THETA, 0.1, xi=np.zeros(4), order=(0, 1))
    z, _ = bernoulli_flow(np.sqrt(x[0]), c, 0.1)
    assert out[0] == pytest.approx(z**2, rel=1e-12)
