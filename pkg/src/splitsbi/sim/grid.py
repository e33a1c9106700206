"""Time grids and trajectories."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError


@dataclass(frozen=True)
class TimeGrid:
    """Observation grid ``t_l = t0 + l * delta`` refined by ``a_sub`` steps.

    The fine grid has ``n * a_sub + 1`` points with step ``h = delta / a_sub``;
    fine index ``l * a_sub`` coincides exactly with observation time ``t_l``.
    """

    t0: float = 0.0
    n: int = 1
    delta: float = 1.0
    a_sub: int = 1

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ConfigurationError("n must be a positive integer")
        if int(self.a_sub) != self.a_sub or self.a_sub < 1:
            raise ConfigurationError("a_sub must be a positive integer")
        if not self.delta > 0:
            raise ConfigurationError("delta must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "a_sub", int(self.a_sub))

    @classmethod
    def from_step(cls, t_end: float, h: float, t0: float = 0.0) -> "TimeGrid":
        """Single observation interval ``[t0, t_end]`` split into steps of ``h``."""
        steps = int(round((t_end - t0) / h))
        if steps < 1 or not np.isclose(steps * h, t_end - t0, rtol=1e-9, atol=0):
            raise ConfigurationError(f"h={h} does not divide [{t0}, {t_end}]")
        return cls(t0, 1, t_end - t0, steps)

    @property
    def h(self) -> float:
        return self.delta / self.a_sub

    @property
    def n_steps(self) -> int:
        return self.n * self.a_sub

    @property
    def t_end(self) -> float:
        return self.t0 + self.n * self.delta

    def fine_times(self) -> np.ndarray:
        k = np.arange(self.n_steps + 1)
        return self.t0 + (k / self.a_sub) * self.delta

    def obs_times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n + 1) * self.delta


@dataclass
class Trajectory:
    """Fine-grid states of one simulated path."""

    grid: TimeGrid
    states: np.ndarray
    clamp_events: int = 0
    nonfinite: bool = False
    species: tuple = field(default=())

    @property
    def obs_states(self) -> np.ndarray:
        return self.states[:: self.grid.a_sub]

    def to_csv(self, path, resolution: str = "fine") -> None:
        write_states_csv(path, self, resolution)


def _labels(traj: Trajectory) -> list[str]:
    d = traj.states.shape[1]
    if traj.species and len(traj.species) == d:
        return list(traj.species)
    return [f"species_{i + 1}" for i in range(d)]


def write_states_csv(path, traj: Trajectory, resolution: str = "fine") -> None:
    """Write ``t,<species...>`` rows at fine or observation resolution."""
    if resolution == "fine":
        times, states = traj.grid.fine_times(), traj.states
    elif resolution == "obs":
        times, states = traj.grid.obs_times(), traj.obs_states
    else:
        raise ConfigurationError(f"unknown resolution {resolution!r}")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *_labels(traj)])
        for t, row in zip(times, states):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in row)])


def read_states_csv(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Return ``(times, states, labels)`` from a file written by :func:`write_states_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body]) if body else np.empty((0, len(header)))
    return data[:, 0], data[:, 1:], header[1:]


def write_run_summary(path, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
