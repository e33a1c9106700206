"""Implementations of the command-line subcommands.

Every command writes tidy CSV plus JSON metadata into an output directory
and, unless disabled, PNG figures next to them. Outputs depend only on the
configuration and seed.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict
from pathlib import Path

import numpy as np
from scipy.stats import ks_2samp

from ..errors import ConfigurationError
from ..inference import read_cloud_csv, run_abc_smc, run_abc_smc_dc
from ..inference.smc import DATA_CONDITIONAL, FORWARD, settings_dict
from ..sim import SchemeConfig, TimeGrid, simulate_ensemble
from ..sim.grid import ensure_dir
from ..sim.schemes import Scheme, normalize_kind
from ..validate import run_validation
from .config import ExperimentConfig

log = logging.getLogger(__name__)


def _fmt(v) -> str:
    return repr(float(v))


def _dump(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sub_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence([seed, *key]).generate_state(1)[0])


def _h_tag(h: float) -> str:
    return f"{h:g}".replace(".", "p").replace("-", "m")


def _plotting():
    from . import plotting

    return plotting


def _scheme_for(cfg: ExperimentConfig, kind: str) -> str:
    kind = normalize_kind(kind)
    Scheme(kind, cfg.net)  # rejects model/scheme mismatches early
    return kind


# --- simulate -----------------------------------------------------------------


def cmd_simulate(cfg: ExperimentConfig, out, threads: int = 1, figures: bool = True) -> dict:
    """One seeded trajectory at the true parameter and its noisy observations."""
    out = ensure_dir(out)
    traj, data = cfg.synthetic_data()
    traj.to_csv(out / "trajectory.csv", resolution="fine")
    data.to_csv(out / "observations.csv")
    grid = cfg.grid()
    summary = {
        "config": cfg.name,
        "model": cfg.net.name,
        "scale": cfg.scale,
        "scheme": cfg.scheme_kind,
        "seed": cfg.seed,
        "x0": cfg.x0.tolist(),
        "theta": dict(zip(cfg.param_names, cfg.full_theta().tolist())),
        "grid": {"t0": grid.t0, "n": grid.n, "delta": grid.delta, "a_sub": grid.a_sub, "h": grid.h},
        "clamp_events": traj.clamp_events,
        "nonfinite": traj.nonfinite,
        "observed": [cfg.net.species[i] for i in cfg.obs_model().observed],
    }
    _dump(out / "summary.json", summary)
    if figures:
        _plotting().plot_trajectory(
            grid.fine_times(),
            traj.states,
            cfg.net.species,
            out / "trajectory.png",
            data.times,
            data.values,
            summary["observed"],
        )
    return summary


# --- distribution preservation -------------------------------------------------


def _dist_grid(t_eval, h):
    delta = t_eval[0]
    ratios = [t / delta for t in t_eval]
    if any(abs(r - round(r)) > 1e-9 for r in ratios):
        raise ConfigurationError("evaluation times must be multiples of the first one")
    a_sub = int(round(delta / h))
    if a_sub < 1 or not np.isclose(a_sub * h, delta, rtol=1e-9):
        raise ConfigurationError(f"h={h} does not divide {delta}")
    return TimeGrid(0.0, int(round(ratios[-1])), delta, a_sub), [int(round(r)) for r in ratios]


def _reference(schemes, hs):
    split = [s for s in schemes if s.startswith("split-")]
    return (split[0] if split else schemes[0]), min(hs)


def cmd_dist_preserve(cfg: ExperimentConfig, out, threads: int = 1, figures: bool = True) -> dict:
    """End-time samples of one species per scheme and step size, with KS distances.

    Distances are taken against the finest-step run of the first splitting
    scheme in the list.
    """
    out = ensure_dir(out)
    sec = cfg.section("dist_preserve")
    comp = sec.get("component", cfg.net.species[0])
    k = cfg.net.species_index(comp)
    t_eval = sorted(float(t) for t in sec.get("t_eval", [100.0]))
    hs = [float(h) for h in sec["h"]]
    schemes = [_scheme_for(cfg, s) for s in sec.get("schemes", [cfg.scheme_kind])]
    n_paths = int(sec.get("paths", 2000))
    samples = {}
    stats = {}
    for si, kind in enumerate(schemes):
        for hi, h in enumerate(hs):
            grid, rows = _dist_grid(t_eval, h)
            ens = simulate_ensemble(
                cfg.net,
                SchemeConfig(kind, _sub_seed(cfg.seed, si, hi)),
                cfg.x0,
                cfg.theta,
                grid,
                n_paths,
                resolution="obs",
                threads=threads,
            )
            for t, row in zip(t_eval, rows):
                samples[(kind, h, t)] = ens.states[row, :, k]
            stats[(kind, h)] = (int(ens.clamps.sum()), int(ens.nonfinite.sum()))
            log.info("dist-preserve %s h=%g done", kind, h)

    with open(out / "samples.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "h", "t", "path", comp])
        for (kind, h, t), x in samples.items():
            for i, v in enumerate(x):
                w.writerow([kind, _fmt(h), _fmt(t), i, _fmt(v)])

    ref_kind, ref_h = _reference(schemes, hs)
    rows_out = []
    if n_paths > 1:
        for (kind, h, t), x in samples.items():
            if (kind, h) == (ref_kind, ref_h):
                continue
            ref = samples[(ref_kind, ref_h, t)]
            ok = np.isfinite(x)
            ks = ks_2samp(x[ok], ref[np.isfinite(ref)]).statistic if ok.any() else 1.0
            rows_out.append([t, kind, h, int(ok.sum()), ks])
    with open(out / "ks.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "scheme", "h", "n", "ks", "reference_scheme", "reference_h"])
        for t, kind, h, n, ks in rows_out:
            w.writerow([_fmt(t), kind, _fmt(h), n, _fmt(ks), ref_kind, _fmt(ref_h)])

    report = {
        "component": comp,
        "paths": n_paths,
        "reference": {"scheme": ref_kind, "h": ref_h},
        "runs": [
            {"scheme": kind, "h": h, "clamp_events": c, "nonfinite_paths": nf} for (kind, h), (c, nf) in stats.items()
        ],
    }
    _dump(out / "dist_preserve.json", report)
    if figures:
        plot = _plotting()
        for t in t_eval:
            sel = {f"{kind} h={h:g}": x for (kind, h, tt), x in samples.items() if tt == t}
            plot.plot_distributions(sel, out / f"ecdf_t{_h_tag(t)}.png", title=f"{comp} at t={t:g}")
    report["ks"] = [
        {"t": t, "scheme": kind, "h": h, "n": n, "ks": float(ks)} for t, kind, h, n, ks in rows_out
    ]
    return report


# --- phase portrait -------------------------------------------------------------


def loop_area(xy) -> float:
    """Absolute shoelace area swept by a planar path (summed over its loops)."""
    x, y = xy[:, 0], xy[:, 1]
    return float(0.5 * abs(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1])))


def cmd_phase_portrait(cfg: ExperimentConfig, out, threads: int = 1, figures: bool = True) -> dict:
    """Ensembles for each scheme and step size with breakdown counts."""
    out = ensure_dir(out)
    sec = cfg.section("phase_portrait")
    t_end = float(sec.get("t_end", 50.0))
    record_dt = float(sec.get("record_dt", 0.1))
    hs = [float(h) for h in sec["h"]]
    schemes = [_scheme_for(cfg, s) for s in sec.get("schemes", [cfg.scheme_kind, "eum-truncate"])]
    n_paths = int(sec.get("paths", 100))
    labels = list(cfg.net.species)
    runs = []
    first_paths = {}
    for si, kind in enumerate(schemes):
        for hi, h in enumerate(hs):
            if h > record_dt:
                raise ConfigurationError("step sizes must not exceed record_dt")
            grid = TimeGrid(0.0, int(round(t_end / record_dt)), record_dt, int(round(record_dt / h)))
            ens = simulate_ensemble(
                cfg.net,
                SchemeConfig(kind, _sub_seed(cfg.seed, si, hi)),
                cfg.x0,
                cfg.theta,
                grid,
                n_paths,
                resolution="obs",
                threads=threads,
            )
            with open(out / f"phase_{kind}_h{_h_tag(h)}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["path", "t", *labels])
                for i in range(n_paths):
                    for t, row in zip(ens.times, ens.states[:, i]):
                        w.writerow([i, _fmt(t), *(_fmt(v) for v in row)])
            events = (ens.clamps > 0) | ens.nonfinite
            finite = ~ens.nonfinite
            areas = [loop_area(ens.states[:, i, :2]) for i in np.flatnonzero(finite)]
            runs.append(
                {
                    "scheme": kind,
                    "h": h,
                    "paths": n_paths,
                    "nonfinite_paths": int(ens.nonfinite.sum()),
                    "clamp_paths": int((ens.clamps > 0).sum()),
                    "clamp_events": int(ens.clamps.sum()),
                    "event_fraction": float(events.mean()),
                    "breakdown": bool(events.mean() >= 0.5),
                    "loop_area_mean": float(np.mean(areas)) if areas else None,
                }
            )
            first_paths[f"{kind} h={h:g}"] = ens.states[:, 0, :2]
            log.info("phase-portrait %s h=%g done", kind, h)
    report = {"t_end": t_end, "record_dt": record_dt, "runs": runs}
    _dump(out / "breakdown.json", report)
    if figures:
        _plotting().plot_phase(first_paths, out / "phase.png", labels[:2])
    return report


# --- inference --------------------------------------------------------------------


def credible_rows(cloud, names, truth) -> list[dict]:
    """Weighted mean and central 95% interval per parameter of a cloud."""
    lo, hi = cloud.quantile([0.025, 0.975])
    mean = cloud.mean()
    rows = []
    for k, name in enumerate(names):
        t = None if truth is None else float(truth[k])
        rows.append(
            {
                "parameter": name,
                "truth": t,
                "mean": float(mean[k]),
                "q025": float(lo[k]),
                "q975": float(hi[k]),
                "covered": None if t is None else bool(lo[k] <= t <= hi[k]),
            }
        )
    return rows


def cmd_infer(cfg: ExperimentConfig, out, threads: int = 1, figures: bool = True, methods=None) -> dict:
    """Run the configured samplers on synthetic data with matched seeds."""
    out = ensure_dir(out)
    methods = list(methods or cfg.methods())
    unknown = set(methods) - {FORWARD, DATA_CONDITIONAL}
    if unknown:
        raise ConfigurationError(f"unknown methods {sorted(unknown)}")
    traj, data = cfg.synthetic_data()
    data.to_csv(out / "observations.csv")
    problem = cfg.problem(data)
    settings = cfg.smc_settings(threads)
    truth_all = dict(zip(cfg.param_names, cfg.full_theta()))
    truth = [truth_all[n] for n in problem.prior.names]
    results = {}
    for m in methods:
        log.info("infer: running %s", m)
        if m == FORWARD:
            res = run_abc_smc(problem, settings)
        else:
            res = run_abc_smc_dc(problem, settings, cfg.dc_config())
        res.write(out / m)
        results[m] = res

    keys = [
        "round",
        "epsilon",
        "accepted",
        "attempts",
        "acceptance_rate",
        "simulator_calls",
        "cumulative_simulator_calls",
        "cumulative_path_steps",
        "ess",
    ]
    with open(out / "comparison.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", *keys])
        for m, res in results.items():
            for d in res.diagnostics:
                w.writerow([m, *("" if d[k] is None else d[k] for k in keys)])
    posterior = []
    with open(out / "posterior.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "parameter", "truth", "mean", "q025", "q975", "covered"])
        for m, res in results.items():
            for row in credible_rows(res.final, problem.prior.names, truth):
                posterior.append({"method": m, **row})
                w.writerow(
                    [m, row["parameter"], _fmt(row["truth"]), _fmt(row["mean"]), _fmt(row["q025"]), _fmt(row["q975"]),
                     int(row["covered"])]
                )
    report = {
        "config": cfg.name,
        "scale": cfg.scale,
        "seed": cfg.seed,
        "parameters": list(problem.prior.names),
        "truth": truth,
        "settings": settings_dict(settings) | {"threads": None},
        "dc": None if DATA_CONDITIONAL not in methods else asdict(cfg.dc_config()),
        "status": {m: r.status for m, r in results.items()},
        "epsilons": {m: [None if not np.isfinite(e) else e for e in r.epsilons] for m, r in results.items()},
        "posterior": posterior,
    }
    _dump(out / "infer.json", report)
    if figures:
        plot = _plotting()
        curves = {}
        for m, res in results.items():
            pts = [(d["cumulative_simulator_calls"], c.epsilon) for c, d in zip(res.clouds, res.diagnostics)]
            pts = [(c, e) for c, e in pts if np.isfinite(e)]
            if pts:
                curves[m] = tuple(np.array(v) for v in zip(*pts))
        plot.plot_epsilon(curves, out / "epsilon.png")
        clouds = {}
        for m in results:
            _, th, wt, _ = read_cloud_csv(out / m / f"cloud_{results[m].final.round}.csv")
            clouds[m] = (th, wt)
        plot.plot_posteriors(clouds, problem.prior.names, truth, out / "posterior.png")
    report["results"] = results
    return report


# --- validate -----------------------------------------------------------------------


def cmd_validate(out, seed: int = 0, quick: bool = False) -> dict:
    """Oracle suites; the report's ``passed`` flag drives the exit code."""
    out = ensure_dir(out)
    report = run_validation(seed=seed, quick=quick)
    _dump(out / "report.json", report)
    return report
