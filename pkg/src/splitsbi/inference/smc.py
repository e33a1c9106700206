"""Sequential ABC with forward-only or data-conditional simulation.

Every proposal owns a random stream keyed by ``(seed, stage, round,
attempt)``. Proposals are simulated in waves whose size depends only on
run settings and earlier results, and acceptances are taken in attempt
order, so the output equals that of a strictly sequential sampler and
does not depend on the number of threads.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from ..sim.integrate import stream
from ..summaries import RegressionSummary, SummaryStatistic, TrainingStore, distance, mad_scale
from .dc import DCConfig, dc_from_states, synthetic_likelihood_stats
from .kernels import (
    ParticleCloud,
    dc_log_weight,
    effective_sample_size,
    normalize_log_weights,
    perturb,
    perturbation_cov,
    smc_log_weight,
    epsilon_update,
)
from .problem import InferenceProblem

log = logging.getLogger(__name__)

STAGE_PRETRAIN = 0
STAGE_PROPOSE = 1

FORWARD = "forward"
DATA_CONDITIONAL = "dc"


@dataclass(frozen=True)
class SMCSettings:
    """Tuning of the sequential sampler.

    Attributes:
        n_particles: particles per round (M).
        max_rounds: maximum number of rounds.
        alpha: quantile level of the tolerance schedule.
        min_acceptance: a round stops once its acceptance rate can no
            longer exceed this floor.
        n_pretrain: prior-predictive pairs used to fit the first summary.
        retrain: refit the summary on the growing store every round.
        min_wave, max_wave: bounds on proposals simulated together.
        threads: worker threads per wave.
        seed: master seed.
    """

    n_particles: int = 500
    max_rounds: int = 6
    alpha: float = 0.5
    min_acceptance: float = 0.015
    n_pretrain: int = 2000
    retrain: bool = True
    min_wave: int = 16
    max_wave: int = 512
    threads: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_particles < 2:
            raise ConfigurationError("need at least two particles")
        if not 0 < self.alpha <= 1:
            raise ConfigurationError("alpha must lie in (0, 1]")
        if not 0 < self.min_acceptance < 1:
            raise ConfigurationError("min_acceptance must lie in (0, 1)")

    @property
    def max_attempts(self) -> int:
        return int(np.ceil(self.n_particles / self.min_acceptance))


@dataclass
class SMCResult:
    """Clouds and per-round diagnostics of one run."""

    method: str
    problem: InferenceProblem
    clouds: list
    diagnostics: list
    status: str
    summary: SummaryStatistic
    scale: np.ndarray
    timing: list = field(default_factory=list)

    @property
    def final(self) -> ParticleCloud:
        return self.clouds[-1]

    @property
    def epsilons(self) -> list:
        return [c.epsilon for c in self.clouds]

    def calls_to_reach(self, eps: float) -> int | None:
        """Cumulative simulator calls at the end of the first round with ``epsilon <= eps``."""
        for c, d in zip(self.clouds, self.diagnostics):
            if c.epsilon <= eps:
                return d["cumulative_simulator_calls"]
        return None

    def write(self, out_dir) -> None:
        """Write ``cloud_<r>.csv`` per round, ``diagnostics.json`` and ``timing.json``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        names = self.problem.prior.names
        for c in self.clouds:
            write_cloud_csv(out / f"cloud_{c.round}.csv", c, names)
        doc = {
            "method": self.method,
            "status": self.status,
            "parameters": list(names),
            "scale": self.scale.tolist(),
            "rounds": self.diagnostics,
        }
        _dump(out / "diagnostics.json", doc)
        _dump(out / "timing.json", {"method": self.method, "rounds": self.timing})
        if isinstance(self.summary, RegressionSummary):
            self.summary.save(out / "summary.json")


def _dump(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_cloud_csv(path, cloud: ParticleCloud, names) -> None:
    with open(path, "w") as fh:
        fh.write(",".join([*names, "weight", "distance"]) + "\n")
        for th, w, d in zip(cloud.thetas, cloud.weights, cloud.distances):
            fh.write(",".join(repr(float(v)) for v in (*th, w, d)) + "\n")


def read_cloud_csv(path) -> tuple[list, np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(names, thetas, weights, distances)``."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header[:-2], data[:, :-2], data[:, -2], data[:, -1]


@dataclass
class _Outcome:
    """Simulation outcome of one proposal."""

    theta: np.ndarray
    rejections: int
    distance: float
    logw_ratio: float
    train_path: np.ndarray
    clamps: int
    degenerate: int


class _Sampler:
    def __init__(self, problem: InferenceProblem, settings: SMCSettings, dc: DCConfig | None, summary=None):
        self.problem = problem
        self.s = settings
        self.dc = dc
        self.n_paths = dc.p_particles if dc else 1
        if dc is not None and dc.p_particles < 2:
            raise ConfigurationError("the data-conditional sampler needs at least two paths")
        self.summary = summary
        self.batch = problem.batch_size(self.n_paths)

    # simulation -------------------------------------------------------

    def _simulate_slice(self, thetas_free, rngs):
        pb = self.problem
        full = pb.full_theta(thetas_free)
        noiseless = self.dc is not None and self.dc.mode == "noiseless"
        obs, pen, clamps = pb.simulate(full, self.n_paths, rngs, penultimate=noiseless)
        out = []
        for b, rng in enumerate(rngs):
            if self.dc is None:
                x = obs[1:, b, 0]
                y = pb.obs_model.sample(x, full[b], rng)
                out.append((y, None, int(clamps[b].sum()), 0))
            else:
                smp = dc_from_states(
                    pb, self.dc, full[b], obs[:, b], None if pen is None else pen[:, b], clamps[b], rng, self.n_paths
                )
                out.append((smp.y_dc, smp, smp.clamps, smp.degenerate))
        return out

    def _simulate(self, thetas_free, rngs):
        chunks = [(i, min(i + self.batch, len(rngs))) for i in range(0, len(rngs), self.batch)]

        def run(c):
            return self._simulate_slice(thetas_free[c[0] : c[1]], rngs[c[0] : c[1]])

        if self.s.threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=self.s.threads) as pool:
                parts = list(pool.map(run, chunks))
        else:
            parts = [run(c) for c in chunks]
        return [o for p in parts for o in p]

    # proposals --------------------------------------------------------

    def _propose(self, rnd, attempts, prev, cov):
        thetas, rngs, rej = [], [], []
        for a in attempts:
            rng = stream(self.s.seed, STAGE_PROPOSE, rnd, a)
            if prev is None:
                th, r = self.problem.prior.sample(rng), 0
            else:
                th, r = perturb(prev, self.problem.prior, rng, cov)
            thetas.append(th)
            rngs.append(rng)
            rej.append(r)
        return np.array(thetas), rngs, rej

    def _evaluate(self, thetas, rngs, rej, s_obs):
        sims = self._simulate(thetas, rngs)
        y = np.array([s[0] for s in sims])
        dist = distance(self.summary(y), s_obs, self.scale)
        out = []
        y_obs = self.problem.y_obs
        for k, (y_k, smp, clamps, degen) in enumerate(sims):
            ratio = 0.0
            train = y_k
            if smp is not None:
                stats = synthetic_likelihood_stats(
                    self.summary(smp.y_paths), self.summary(smp.y_extra), self.dc.shared_cov
                )
                ratio = float(stats.log_ratio(self.summary(smp.y_dc)))
                train = smp.closest_path(y_obs)
            out.append(_Outcome(thetas[k], rej[k], float(dist[k]), ratio, train, clamps, degen))
        return out

    # pre-training -----------------------------------------------------

    def pretrain(self):
        pb, s = self.problem, self.s
        store = TrainingStore(pb.data.d_obs, pb.n_free)
        rngs = [stream(s.seed, STAGE_PRETRAIN, g) for g in range(s.n_pretrain)]
        thetas = np.array([pb.prior.sample(r) for r in rngs])
        full = pb.full_theta(thetas)
        batch = pb.batch_size(1)
        paths = []
        for lo in range(0, s.n_pretrain, batch):
            hi = min(lo + batch, s.n_pretrain)
            obs, _, _ = pb.simulate(full[lo:hi], 1, rngs[lo:hi])
            for b in range(hi - lo):
                paths.append(pb.obs_model.sample(obs[1:, b, 0], full[lo + b], rngs[lo + b]))
        store.extend(np.array(paths), thetas)
        return store

    # driver -----------------------------------------------------------

    def run(self, store: TrainingStore | None = None) -> SMCResult:
        pb, s = self.problem, self.s
        method = DATA_CONDITIONAL if self.dc else FORWARD
        store = self.pretrain() if store is None else store.copy()
        if self.summary is None:
            self.summary = RegressionSummary.fit(store)
        self.scale = mad_scale(self.summary(store.paths))
        clouds, diags, timing = [], [], []
        cum_calls = cum_steps = 0
        status = "max-rounds"
        prev = None
        rate_est = 1.0
        for rnd in range(1, s.max_rounds + 1):
            t_start = time.perf_counter()
            refit = False
            if prev is not None and s.retrain:
                new = self.summary.refit(store)
                refit = new is not self.summary
                self.summary = new
            s_obs = self.summary(pb.y_obs)
            if prev is None:
                eps, cov = np.inf, None
            else:
                eps = epsilon_update(prev.distances, s.alpha)
                if not eps < prev.epsilon:
                    status = "epsilon-stalled"
                    break
                cov = perturbation_cov(prev)
            accepted: list[_Outcome] = []
            attempts = rejections = clamps = degenerate = 0
            while len(accepted) < s.n_particles and attempts < s.max_attempts:
                need = s.n_particles - len(accepted)
                wave = int(np.ceil(1.1 * need / max(rate_est, s.min_acceptance)))
                wave = min(max(wave, s.min_wave), s.max_wave, s.max_attempts - attempts)
                ids = range(attempts, attempts + wave)
                outcomes = self._evaluate(*self._propose(rnd, ids, prev, cov), s_obs)
                for o in outcomes:
                    attempts += 1
                    rejections += o.rejections
                    clamps += o.clamps
                    degenerate += o.degenerate
                    if o.distance < eps:
                        accepted.append(o)
                        if len(accepted) == s.n_particles:
                            break
                rate_est = max(len(accepted), 1) / attempts
            cum_calls += attempts
            steps = attempts * self.n_paths * pb.grid.n_steps
            cum_steps += steps
            diag = {
                "round": rnd,
                "epsilon": None if not np.isfinite(eps) else float(eps),
                "accepted": len(accepted),
                "attempts": attempts,
                "acceptance_rate": len(accepted) / attempts,
                "simulator_calls": attempts,
                "cumulative_simulator_calls": cum_calls,
                "path_steps": steps,
                "cumulative_path_steps": cum_steps,
                "paths_per_call": self.n_paths,
                "prior_rejections": rejections,
                "clamp_events": clamps,
                "degenerate_weight_times": degenerate,
                "summary_refit": refit,
                "training_pairs": len(store),
            }
            if len(accepted) < s.n_particles:
                diag["ess"] = None
                diags.append(diag)
                timing.append({"round": rnd, "seconds": time.perf_counter() - t_start})
                status = "acceptance-floor"
                log.info("round %d stopped below the acceptance floor", rnd)
                break
            thetas = np.array([o.theta for o in accepted])
            dists = np.array([o.distance for o in accepted])
            ratio = np.array([o.logw_ratio for o in accepted])
            if prev is None:
                logw = ratio if self.dc else np.zeros(len(accepted))
            elif self.dc:
                logw = dc_log_weight(thetas, None, pb.prior, prev, cov, _FixedRatio(ratio))
            else:
                logw = smc_log_weight(thetas, pb.prior, prev, cov)
            weights, flat = normalize_log_weights(logw)
            diag["ess"] = effective_sample_size(weights)
            diag["weight_fallback"] = flat
            diag["zero_weights"] = int(np.sum(weights == 0))
            store.extend(np.array([o.train_path for o in accepted]), thetas)
            cloud = ParticleCloud(rnd, thetas, weights, dists, cov, float(eps))
            clouds.append(cloud)
            diags.append(diag)
            timing.append({"round": rnd, "seconds": time.perf_counter() - t_start})
            log.info("%s round %d: eps=%s acc=%.3f ess=%.1f", method, rnd, diag["epsilon"], diag["acceptance_rate"], diag["ess"])
            prev = cloud
        return SMCResult(method, pb, clouds, diags, status, self.summary, self.scale, timing)


class _FixedRatio:
    """Stand-in for precomputed synthetic-likelihood log ratios."""

    def __init__(self, values):
        self.values = values

    def log_ratio(self, _):
        return self.values


def run_abc_smc(problem: InferenceProblem, settings: SMCSettings, summary=None, store=None) -> SMCResult:
    """Forward-only ABC-SMC: one simulated data set per proposal."""
    return _Sampler(problem, settings, None, summary).run(store)


def run_abc_smc_dc(problem: InferenceProblem, settings: SMCSettings, dc: DCConfig, summary=None, store=None) -> SMCResult:
    """ABC-SMC on data-conditional paths with synthetic-likelihood weights.

    Per proposal ``dc.p_particles`` forward paths are simulated; distances
    use the assembled path, and the closest forward path joins the
    training store when the proposal is accepted.
    """
    return _Sampler(problem, settings, dc, summary).run(store)


def settings_dict(settings: SMCSettings) -> dict:
    return asdict(settings)
