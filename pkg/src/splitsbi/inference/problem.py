"""An inference problem: network, integrator, observations and prior."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..crn import ReactionNetwork
from ..errors import ConfigurationError
from ..observation import Dataset, ObservationModel
from ..sim.grid import TimeGrid
from ..sim.integrate import integrate
from ..sim.schemes import Scheme, SchemeConfig
from .prior import PriorSpec

# keep the pre-drawn Gaussian block of one simulation batch below this many floats
NOISE_BUDGET = 8_000_000


@dataclass
class InferenceProblem:
    """Everything needed to simulate data sets for a parameter proposal.

    The full parameter vector is the network parameters followed by
    ``extra_params`` (e.g. an unknown measurement-error scale referenced by
    ``obs_model.sigma_index``). ``prior`` covers the free components; all
    others take their values from ``fixed``.
    """

    net: ReactionNetwork
    scheme_kind: str
    x0: np.ndarray
    a_sub: int
    obs_model: ObservationModel
    data: Dataset
    prior: PriorSpec
    fixed: dict = field(default_factory=dict)
    extra_params: tuple = ()

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        names = self.param_names
        if len(set(names)) != len(names):
            raise ConfigurationError("duplicate parameter names")
        unknown = [k for k in (*self.prior.names, *self.fixed) if k not in names]
        if unknown:
            raise ConfigurationError(f"unknown parameters {unknown}")
        missing = [k for k in names if k not in self.prior.names and k not in self.fixed]
        if missing:
            raise ConfigurationError(f"parameters {missing} are neither free nor fixed")
        if self.data.d_obs != self.obs_model.d_obs:
            raise ConfigurationError("data and observation model disagree on d_obs")
        self.scheme: Scheme = SchemeConfig(self.scheme_kind).build(self.net)
        self.grid = TimeGrid(float(self.data.times[0]), self.data.n, self.data.delta, self.a_sub)
        self._free_idx = np.array([names.index(k) for k in self.prior.names])
        self._base = np.array([float(self.fixed.get(k, np.nan)) for k in names])

    @property
    def param_names(self) -> tuple:
        return tuple(self.net.parameters) + tuple(self.extra_params)

    @property
    def n_free(self) -> int:
        return self.prior.dim

    @property
    def y_obs(self) -> np.ndarray:
        """Observed records at ``t_1..t_n`` (the initial record is not summarised)."""
        return self.data.values[1:]

    def full_theta(self, free) -> np.ndarray:
        free = np.asarray(free, dtype=float)
        full = np.broadcast_to(self._base, free.shape[:-1] + self._base.shape).copy()
        full[..., self._free_idx] = free
        return full

    def batch_size(self, n_paths: int) -> int:
        per = self.grid.n_steps * n_paths * max(self.scheme.noise_dim, 1)
        return max(1, NOISE_BUDGET // per)

    def simulate(self, full_thetas, n_paths: int, rngs, penultimate: bool = False):
        """Simulate ``n_paths`` paths for each row of ``full_thetas``.

        Proposal ``b`` takes its Gaussian block ``(n_steps, n_paths, k)``
        from ``rngs[b]``; path ``j`` uses column ``j`` of that block.

        Returns:
            ``(obs_states, pen_states, clamps)``: states at ``t_0..t_n`` with
            shape ``(n + 1, B, n_paths, d)``, the states one fine step before
            each ``t_1..t_n`` (or ``None``) and per-path clamp counts.
        """
        th = np.asarray(full_thetas, dtype=float)[:, None, : self.net.p]
        g = self.grid
        k = self.scheme.noise_dim
        if k:
            noise = np.stack([r.standard_normal((g.n_steps, n_paths, k)) for r in rngs], axis=1)
        else:
            noise = None
        mask = np.zeros(g.n_steps + 1, dtype=bool)
        mask[:: g.a_sub] = True
        if penultimate:
            mask[g.a_sub - 1 :: g.a_sub] = True
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            states, clamps, _ = integrate(
                self.scheme, self.x0, th, g.h, g.n_steps, noise, mask, (len(rngs), n_paths)
            )
        idx = np.flatnonzero(mask)
        obs_pos = np.searchsorted(idx, np.arange(0, g.n_steps + 1, g.a_sub))
        obs = states[obs_pos]
        pen = None
        if penultimate:
            pen = states[np.searchsorted(idx, np.arange(g.a_sub - 1, g.n_steps, g.a_sub))]
        return obs, pen, clamps
