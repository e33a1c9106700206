"""Self-check suites comparing the integrators against exact references.

Each suite returns a dict ``{"name", "passed", "metrics", "tolerance"}``;
:func:`run_validation` collects them into a JSON-ready report.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.stats import ks_2samp

from .inference.kernels import ParticleCloud, dc_particle_weight, smc_particle_weight
from .inference.dc import SyntheticLikelihoodStats
from .inference.prior import PriorSpec
from .models import two_pool
from .sim import CIRParams, SchemeConfig, TimeGrid, cir_exact_sample, simulate_ensemble, ssa_state_at, stream
from .sim.flows import _bernoulli, cir_splitting_sample

REPORT_SCHEMA = 1
SUITES = ("cir-exact", "ssa-mean", "bernoulli-flow", "reduction-identity")
DEFAULT_CIR = CIRParams(alpha=2.0, beta=1.0, sigma=0.5)


def _result(name, passed, metrics, tolerance):
    clean = {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in metrics.items()}
    return {"name": name, "passed": bool(passed), "metrics": clean, "tolerance": tolerance}


def cir_exact_suite(params: CIRParams = DEFAULT_CIR, x0=1.0, h=0.01, t_end=1.0, n_paths=50_000, seed=0, flow=None):
    """Splitting end states against noncentral chi-square draws."""
    n_steps = int(round(t_end / h))
    split, clamps = cir_splitting_sample(
        params.alpha, params.beta, params.sigma, x0, h, n_steps, n_paths, stream(seed, 0), flow
    )
    exact = cir_exact_sample(params, x0, t_end, stream(seed, 1), size=n_paths)
    se_mean = np.sqrt(split.var() / n_paths + exact.var() / n_paths)
    # standard error of a sample variance, from the fourth central moment
    def var_se(x):
        c = x - x.mean()
        return np.sqrt(max(np.mean(c**4) - x.var() ** 2, 0.0) / n_paths)

    se_var = np.hypot(var_se(split), var_se(exact))
    z_mean = abs(split.mean() - exact.mean()) / se_mean
    z_var = abs(split.var() - exact.var()) / se_var
    ks = ks_2samp(split, exact).statistic
    metrics = {"z_mean": z_mean, "z_var": z_var, "ks": ks, "clamps": int(clamps.sum()), "n_paths": n_paths}
    # small runs get the 1% two-sample critical value instead of 0.02
    ks_tol = max(0.02, 1.63 * np.sqrt(2.0 / n_paths))
    ok = z_mean < 3 and z_var < 3 and ks < ks_tol and np.isfinite(split).all()
    return _result("cir-exact", ok, metrics, {"z": 3, "ks": ks_tol})


def bernoulli_flow_suite(n_points=1000, seed=0, flow=None, tol=1e-8):
    """Closed-form Bernoulli flow against an adaptive Runge-Kutta solve.

    Points are drawn where the radicand stays clearly positive, so the
    ODE ``dz/dt = -b z / 2 + (a / 2 - s / 8) / z`` is regular.
    """
    flow = _bernoulli if flow is None else flow
    rng = stream(seed, 2)
    worst = 0.0
    used = 0
    while used < n_points:
        z0 = rng.uniform(0.5, 5.0)
        a = rng.uniform(0.0, 5.0)
        b = rng.uniform(-1.0, 2.0)
        s = rng.uniform(0.0, 4.0)
        h = rng.uniform(0.01, 1.0)
        # keep u = z^2 bounded away from 0 over [0, h]
        drive = a - s / 4
        u_end = z0 * z0 * np.exp(-b * h) - drive * np.expm1(-b * h) / b
        if min(u_end, z0 * z0) < 0.1:
            continue
        sol = solve_ivp(
            lambda _, z: -0.5 * b * z + (0.5 * a - s / 8) / z,
            (0.0, h),
            [z0],
            method="DOP853",
            rtol=1e-12,
            atol=1e-13,
        )
        z_new, _ = flow(np.array(z0), a, b, s, h)
        worst = max(worst, abs(float(z_new) - sol.y[0, -1]))
        used += 1
    return _result("bernoulli-flow", worst <= tol, {"max_abs_error": worst, "points": used}, {"abs": tol})


def ssa_mean_suite(t_end=2.0, n_ssa=2000, n_split=2000, h=0.02, seed=0):
    """Two-pool means: exact linear ODE, Gillespie runs and the splitting scheme."""
    net = two_pool()
    theta = np.array([0.1, 0.2, 0.2, 0.5])
    x0 = np.array([100.0, 0.0])
    drift = np.array([[-(theta[0] + theta[2]), theta[3]], [theta[2], -(theta[1] + theta[3])]])
    exact = expm(drift * t_end) @ x0
    ssa = ssa_state_at(net, x0, theta, t_end, n_ssa, stream(seed, 3))
    ens = simulate_ensemble(
        net, SchemeConfig("split-twopool-lietrotter", seed), x0, theta, TimeGrid.from_step(t_end, h), n_split, "final"
    )
    split = ens.final
    z_ssa = np.abs(ssa.mean(0) - exact) / (ssa.std(0) / np.sqrt(n_ssa))
    z_split = np.abs(split.mean(0) - exact) / (split.std(0) / np.sqrt(n_split))
    metrics = {
        "exact_mean": exact.tolist(),
        "ssa_mean": ssa.mean(0).tolist(),
        "split_mean": split.mean(0).tolist(),
        "max_z_ssa": z_ssa.max(),
        "max_z_split": z_split.max(),
    }
    ok = z_ssa.max() < 4 and z_split.max() < 4
    return _result("ssa-mean", ok, metrics, {"z": 4})


def reduction_identity_suite(n_cases=1000, seed=0, tol=1e-12):
    """Equal synthetic-likelihood statistics must leave the weight unchanged."""
    rng = stream(seed, 4)
    worst = 0.0
    for _ in range(n_cases):
        p = int(rng.integers(1, 5))
        q = int(rng.integers(1, 5))
        prior = PriorSpec(tuple(f"p{i}" for i in range(p)), np.zeros(p), np.full(p, 2.0))
        m = int(rng.integers(2, 20))
        thetas = rng.uniform(0, 2, (m, p))
        w = rng.random(m)
        cloud = ParticleCloud(1, thetas, w / w.sum(), rng.random(m))
        cov = np.diag(rng.uniform(0.05, 1.0, p))
        theta = rng.uniform(0, 2, p)
        mu = rng.normal(size=q)
        a = rng.normal(size=(q, q))
        sig = a @ a.T + np.eye(q)
        stats = SyntheticLikelihoodStats(mu, sig, mu.copy(), sig.copy())
        s = rng.normal(size=q)
        w_dc = dc_particle_weight(theta, s, prior, cloud, cov, stats)
        w_fw = smc_particle_weight(theta, prior, cloud, cov)
        worst = max(worst, abs(w_dc - w_fw) / max(abs(w_fw), 1e-300))
    return _result("reduction-identity", worst <= tol, {"max_rel_diff": worst, "cases": n_cases}, {"rel": tol})


def run_validation(seed=0, flow=None, quick=False) -> dict:
    """Run every suite. ``flow`` swaps in a Bernoulli flow for negative controls."""
    scale = 10 if quick else 1
    suites = [
        cir_exact_suite(n_paths=50_000 // scale, seed=seed, flow=flow),
        ssa_mean_suite(n_ssa=2000 // scale, n_split=2000 // scale, seed=seed),
        bernoulli_flow_suite(n_points=1000 // scale, seed=seed, flow=flow),
        reduction_identity_suite(n_cases=1000 // scale, seed=seed),
    ]
    failures = [s["name"] for s in suites if not s["passed"]]
    return {"schema_version": REPORT_SCHEMA, "seed": seed, "suites": suites, "failures": failures, "passed": not failures}
