"""Experiment configuration: TOML (or JSON) files with scale overrides."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..errors import ConfigurationError
from ..inference import DCConfig, InferenceProblem, PriorSpec, SMCSettings
from ..models import get_model
from ..observation import ObservationModel, observe
from ..sim import SchemeConfig, TimeGrid, simulate_path, stream
from ..sim.schemes import default_splitting_kind

CONFIG_DIR = Path(__file__).parent / "configs"
SCALES = ("desk", "paper")
SIGMA_NAME = "sigma_err"


def builtin_configs() -> list[str]:
    return sorted(p.stem for p in CONFIG_DIR.glob("*.toml"))


def _read(path: Path) -> dict:
    if path.suffix == ".json":
        return json.loads(path.read_text())
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(name_or_path, scale: str = "desk", seed: int | None = None) -> "ExperimentConfig":
    """Load a built-in config by name or a file path and apply ``[scale.<scale>]``."""
    p = Path(str(name_or_path))
    if not p.exists():
        p = CONFIG_DIR / f"{name_or_path}.toml"
    if not p.exists():
        raise ConfigurationError(f"no config {name_or_path!r}; built-ins: {builtin_configs()}")
    if scale not in SCALES:
        raise ConfigurationError(f"scale must be one of {SCALES}")
    raw = _read(p)
    doc = {k: v for k, v in raw.items() if k != "scale"}
    doc = _merge(doc, raw.get("scale", {}).get(scale, {}))
    if seed is not None:
        doc["seed"] = int(seed)
    return ExperimentConfig(doc, scale, str(p))


@dataclass
class ExperimentConfig:
    """Resolved settings of one experiment.

    ``doc`` keeps the merged document; accessors turn sections into library
    objects and check them against the model's parameter schema.
    """

    doc: dict
    scale: str = "desk"
    source: str = ""

    def __post_init__(self):
        for key in ("model", "x0", "theta"):
            if key not in self.doc:
                raise ConfigurationError(f"config is missing {key!r}")
        self.net = get_model(self.doc["model"])
        if len(self.doc["x0"]) != self.net.d:
            raise ConfigurationError("x0 does not match the number of species")
        known = set(self.net.parameters) | {SIGMA_NAME}
        bad = [k for k in (*self.doc["theta"], *self.doc.get("prior", {})) if k not in known]
        if bad:
            raise ConfigurationError(f"unknown parameters {bad} for model {self.net.name}")
        missing = [k for k in self.net.parameters if k not in self.doc["theta"]]
        if missing:
            raise ConfigurationError(f"theta is missing {missing}")

    def section(self, name: str) -> dict:
        return dict(self.doc.get(name, {}))

    @property
    def name(self) -> str:
        return self.doc.get("name", self.net.name)

    @property
    def seed(self) -> int:
        return int(self.doc.get("seed", 0))

    @property
    def x0(self) -> np.ndarray:
        return np.asarray(self.doc["x0"], dtype=float)

    @property
    def theta(self) -> np.ndarray:
        """Network parameters in schema order."""
        return np.array([float(self.doc["theta"][k]) for k in self.net.parameters])

    @property
    def sigma_err(self) -> float | None:
        v = self.doc["theta"].get(SIGMA_NAME)
        return None if v is None else float(v)

    @property
    def scheme_kind(self) -> str:
        return self.section("scheme").get("kind", default_splitting_kind(self.net))

    def grid(self) -> TimeGrid:
        g = self.section("grid")
        return TimeGrid(float(g.get("t0", 0.0)), int(g["n"]), float(g["delta"]), int(g["a_sub"]))

    def obs_model(self) -> ObservationModel:
        o = self.section("observation")
        names = o.get("observe", list(self.net.species))
        idx = [self.net.species_index(s) for s in names]
        if self.sigma_err is None:
            return ObservationModel.select(self.net.d, idx)
        return ObservationModel.select(self.net.d, idx, sigma_index=self.net.p)

    def full_theta(self) -> np.ndarray:
        if self.sigma_err is None:
            return self.theta
        return np.append(self.theta, self.sigma_err)

    def synthetic_data(self):
        """Trajectory and noisy observations at the true parameter."""
        traj = simulate_path(self.net, SchemeConfig(self.scheme_kind, self.seed), self.x0, self.theta, self.grid())
        prov = {
            "seed": self.seed,
            "scheme": self.scheme_kind,
            "theta_true": dict(zip(self.param_names, self.full_theta().tolist())),
        }
        data = observe(traj, self.obs_model(), stream(self.seed, 2**31 - 1), self.full_theta(), prov)
        return traj, data

    @property
    def param_names(self) -> tuple:
        extra = () if self.sigma_err is None else (SIGMA_NAME,)
        return tuple(self.net.parameters) + extra

    def prior(self) -> PriorSpec:
        pr = self.section("prior")
        if not pr:
            raise ConfigurationError("config has no [prior] section")
        names = [k for k in self.param_names if k in pr]
        return PriorSpec(tuple(names), [pr[k][0] for k in names], [pr[k][1] for k in names])

    def problem(self, data=None) -> InferenceProblem:
        if data is None:
            data = self.synthetic_data()[1]
        prior = self.prior()
        truth = dict(zip(self.param_names, self.full_theta()))
        fixed = {k: v for k, v in truth.items() if k not in prior.names}
        extra = () if self.sigma_err is None else (SIGMA_NAME,)
        return InferenceProblem(
            self.net, self.scheme_kind, self.x0, self.grid().a_sub, self.obs_model(), data, prior, fixed, extra
        )

    def smc_settings(self, threads: int = 1) -> SMCSettings:
        s = self.section("inference")
        return SMCSettings(
            n_particles=int(s.get("particles", 500)),
            max_rounds=int(s.get("rounds", 6)),
            alpha=float(s.get("alpha", 0.5)),
            min_acceptance=float(s.get("min_acceptance", 0.015)),
            n_pretrain=int(s.get("pretrain", 2000)),
            retrain=bool(s.get("retrain", True)),
            threads=threads,
            seed=self.seed,
        )

    def dc_config(self) -> DCConfig:
        s = self.section("inference").get("dc", {})
        return DCConfig(
            p_particles=int(s.get("particles", 32)),
            c_scale=float(s.get("c_scale", 2.0)),
            mode=s.get("mode", "noisy" if self.sigma_err is not None else "noiseless"),
            shared_cov=bool(s.get("shared_cov", True)),
        )

    def methods(self) -> list[str]:
        return list(self.section("inference").get("methods", ["forward", "dc"]))
