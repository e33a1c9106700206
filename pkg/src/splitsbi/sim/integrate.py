"""Path simulation on a :class:`TimeGrid`."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..crn import ReactionNetwork
from ..errors import ConfigurationError, DomainError
from .grid import TimeGrid, Trajectory
from .schemes import Scheme, SchemeConfig

DEFAULT_BLOCK = 256


def stream(*key: int) -> np.random.Generator:
    """Independent generator for an integer key such as ``(seed, block)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in key])))


def integrate(scheme: Scheme, x0, theta, h: float, n_steps: int, noise, record=None, batch_shape=()):
    """Advance ``x0`` by ``n_steps`` fine steps.

    Args:
        scheme: configured integrator.
        x0: initial state(s), shape ``(..., d)``.
        theta: parameters, shape ``(..., p)``.
        noise: a ``Generator`` (normals drawn step by step) or an array of
            standard normals of shape ``(n_steps, *batch, noise_dim)``.
        record: boolean mask over the ``n_steps + 1`` grid points; ``None``
            records every point.
        batch_shape: extra batch shape to broadcast against.

    Returns:
        ``(states, clamps, nonfinite)`` with ``states`` of shape
        ``(n_recorded, *batch, d)``.
    """
    x = np.asarray(x0, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(x < 0):
        raise DomainError("initial state must be nonnegative")
    batch = np.broadcast_shapes(x.shape[:-1], theta.shape[:-1], tuple(batch_shape))
    x = np.array(np.broadcast_to(x, batch + (x.shape[-1],)))
    if record is None:
        record = np.ones(n_steps + 1, dtype=bool)
    record = np.asarray(record, dtype=bool)
    if record.shape != (n_steps + 1,):
        raise ConfigurationError("record mask must have n_steps + 1 entries")
    k = scheme.noise_dim
    pre_drawn = not isinstance(noise, np.random.Generator)
    if pre_drawn and k:
        noise = np.asarray(noise)
        if noise.shape[0] < n_steps or noise.shape[-1] != k:
            raise ConfigurationError(f"noise must have shape (n_steps, ..., {k})")
    states = np.empty((int(record.sum()),) + x.shape)
    clamps = np.zeros(batch, dtype=np.int64)
    nonfinite = np.zeros(batch, dtype=bool)
    slot = 0
    if record[0]:
        states[0] = x
        slot = 1
    empty = np.zeros(batch + (0,))
    for step in range(n_steps):
        if not k:
            xi = empty
        elif pre_drawn:
            xi = noise[step]
        else:
            xi = noise.standard_normal(batch + (k,))
        x, cl = scheme.step(x, theta, h, xi)
        clamps += cl
        bad = ~np.isfinite(x).all(axis=-1)
        if bad.any():
            nonfinite |= bad
        if record[step + 1]:
            states[slot] = x
            slot += 1
    return states, clamps, nonfinite


def record_mask(grid: TimeGrid, resolution: str) -> np.ndarray:
    mask = np.zeros(grid.n_steps + 1, dtype=bool)
    if resolution == "fine":
        mask[:] = True
    elif resolution == "obs":
        mask[:: grid.a_sub] = True
    elif resolution == "final":
        mask[-1] = True
    else:
        raise ConfigurationError(f"unknown resolution {resolution!r}")
    return mask


@dataclass
class Ensemble:
    """Many independent paths on one grid."""

    grid: TimeGrid
    times: np.ndarray
    states: np.ndarray  # (n_recorded, n_paths, d)
    clamps: np.ndarray
    nonfinite: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def simulate_ensemble(
    net: ReactionNetwork,
    config: SchemeConfig,
    x0,
    theta,
    grid: TimeGrid,
    n_paths: int,
    resolution: str = "obs",
    block_size: int = DEFAULT_BLOCK,
    threads: int = 1,
) -> Ensemble:
    """Simulate ``n_paths`` paths; path ``i`` lives in block ``i // block_size``.

    Block ``b`` draws its normals from the stream ``(config.rng_seed, b)``, so
    results depend only on the seed, the block size and the path count, not
    on ``threads``.
    """
    scheme = config.build(net)
    mask = record_mask(grid, resolution)
    x0 = np.asarray(x0, dtype=float)
    theta = np.asarray(theta, dtype=float)
    starts = list(range(0, n_paths, block_size))

    def run(b):
        lo = starts[b]
        size = min(block_size, n_paths - lo)
        return integrate(scheme, x0, theta, grid.h, grid.n_steps, stream(config.rng_seed, b), mask, (size,))

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(starts))))
    else:
        parts = [run(b) for b in range(len(starts))]
    states = np.concatenate([p[0] for p in parts], axis=1)
    clamps = np.concatenate([p[1] for p in parts])
    nonfinite = np.concatenate([p[2] for p in parts])
    times = grid.fine_times()[mask]
    return Ensemble(grid, times, states, clamps, nonfinite)


def simulate_path(net: ReactionNetwork, config: SchemeConfig, x0, theta, grid: TimeGrid) -> Trajectory:
    """One path on the fine grid; deterministic in ``config.rng_seed``."""
    ens = simulate_ensemble(net, config, x0, theta, grid, 1, resolution="fine")
    return Trajectory(
        grid=grid,
        states=ens.states[:, 0, :],
        clamp_events=int(ens.clamps[0]),
        nonfinite=bool(ens.nonfinite[0]),
        species=net.species,
    )
