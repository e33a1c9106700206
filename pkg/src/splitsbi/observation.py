"""Partial, noisy observation of simulated paths."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError

JITTER = 1e-10
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class ObservationModel:
    """``y = L x + noise`` with selection matrix ``L``.

    The noise covariance is either a fixed matrix (``noise_cov``), or
    ``sigma^2 I`` with ``sigma`` read from the parameter vector at
    ``sigma_index`` (for an unknown measurement error), or absent.
    """

    l_matrix: np.ndarray
    noise_cov: np.ndarray | None = None
    sigma_index: int | None = None

    def __post_init__(self):
        L = np.array(self.l_matrix, dtype=float)
        if L.ndim != 2 or L.shape[0] < 1:
            raise ConfigurationError("L must be a nonempty 2-d matrix")
        if not (np.isin(L, (0.0, 1.0)).all() and (L.sum(axis=1) == 1).all()):
            raise ConfigurationError("rows of L must be unit basis vectors")
        if len({tuple(row) for row in L}) != L.shape[0]:
            raise ConfigurationError("rows of L must be distinct")
        L.setflags(write=False)
        object.__setattr__(self, "l_matrix", L)
        if self.noise_cov is not None and self.sigma_index is not None:
            raise ConfigurationError("give a fixed covariance or a sigma index, not both")
        if self.noise_cov is not None:
            cov = np.array(self.noise_cov, dtype=float)
            if cov.shape != (L.shape[0], L.shape[0]):
                raise ConfigurationError("noise covariance must be d_o x d_o")
            if not np.allclose(cov, cov.T) or np.linalg.eigvalsh(cov).min() < -1e-12:
                raise ConfigurationError("noise covariance must be symmetric PSD")
            cov.setflags(write=False)
            object.__setattr__(self, "noise_cov", cov)

    @classmethod
    def select(cls, d: int, indices, sigma_err: float | None = None, sigma_index: int | None = None):
        """Observe the components ``indices`` (0-based) of a ``d``-species state."""
        L = np.zeros((len(indices), d))
        L[np.arange(len(indices)), list(indices)] = 1.0
        cov = None if sigma_err is None else sigma_err**2 * np.eye(len(indices))
        return cls(L, cov, sigma_index)

    @property
    def d_obs(self) -> int:
        return self.l_matrix.shape[0]

    @property
    def d_state(self) -> int:
        return self.l_matrix.shape[1]

    @property
    def noisy(self) -> bool:
        return self.noise_cov is not None or self.sigma_index is not None

    @property
    def observed(self) -> np.ndarray:
        """0-based indices of the observed species."""
        return np.argmax(self.l_matrix, axis=1)

    def sigma(self, theta) -> np.ndarray:
        """Per-row noise scale for the ``sigma_index`` case, shape ``theta.shape[:-1]``."""
        return np.abs(np.asarray(theta, dtype=float)[..., self.sigma_index])

    def cov(self, theta=None) -> np.ndarray | None:
        """Noise covariance (batched over ``theta`` when it is parameterised)."""
        if self.noise_cov is not None:
            return self.noise_cov
        if self.sigma_index is None:
            return None
        s = self.sigma(theta)
        return (s**2)[..., None, None] * np.eye(self.d_obs)

    def project(self, states) -> np.ndarray:
        return np.asarray(states, dtype=float)[..., self.observed]

    def noise(self, shape, theta, rng: np.random.Generator) -> np.ndarray:
        """Noise draws of shape ``shape + (d_o,)``; ``theta`` batch must broadcast to ``shape[1:]``."""
        shape = tuple(shape) + (self.d_obs,)
        if not self.noisy:
            return np.zeros(shape)
        xi = rng.standard_normal(shape)
        if self.sigma_index is not None:
            return xi * self.sigma(theta)[..., None]
        chol = _psd_factor(self.noise_cov)
        return xi @ chol.T

    def sample(self, states, theta, rng: np.random.Generator) -> np.ndarray:
        """``L x + noise`` for states of shape ``(T, ..., d)``."""
        y = self.project(states)
        if self.noisy:
            y = y + self.noise(y.shape[:-1], theta, rng)
        return y


def _psd_factor(cov):
    # eigen-factor so that singular (even zero) covariances are allowed
    w, v = np.linalg.eigh(cov)
    return v * np.sqrt(np.clip(w, 0.0, None))


@dataclass
class Dataset:
    """Observations ``values[l] = y(t_l)`` at equidistant times."""

    times: np.ndarray
    values: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.times.shape[0] != self.values.shape[0]:
            raise ConfigurationError("times and values must have the same length")
        steps = np.diff(self.times)
        if steps.size and not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ConfigurationError("observation times must be equidistant")

    @property
    def n(self) -> int:
        return self.values.shape[0] - 1

    @property
    def d_obs(self) -> int:
        return self.values.shape[1]

    @property
    def delta(self) -> float:
        return float(self.times[1] - self.times[0])

    def to_csv(self, path) -> None:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", *(f"y_{k + 1}" for k in range(self.d_obs))])
            for t, row in zip(self.times, self.values):
                w.writerow([repr(float(t)), *(repr(float(v)) for v in row)])
        if self.provenance:
            with open(path.with_suffix(".json"), "w") as fh:
                json.dump(self.provenance, fh, indent=2, sort_keys=True)
                fh.write("\n")

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        path = Path(path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        meta = path.with_suffix(".json")
        prov = json.loads(meta.read_text()) if meta.exists() else {}
        return cls(data[:, 0], data[:, 1:], prov)


def observe(traj, model: ObservationModel, rng: np.random.Generator, theta=None, provenance=None) -> Dataset:
    """Observe a trajectory at its observation times."""
    states = traj.obs_states
    if states.shape[1] != model.d_state:
        raise ConfigurationError("trajectory dimension does not match L")
    values = model.sample(states, theta, rng)
    return Dataset(traj.grid.obs_times(), values, dict(provenance or {}))


def gaussian_logpdf(x, mean, cov, jitter: float = JITTER) -> np.ndarray:
    """Batched multivariate normal log-density.

    ``x`` and ``mean`` broadcast over leading dimensions; ``cov`` is either a
    single ``(k, k)`` matrix or broadcasts as ``(..., k, k)``. A multiple
    ``jitter`` of the identity is added before factorising.
    """
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    k = cov.shape[-1]
    try:
        chol = np.linalg.cholesky(cov + jitter * np.eye(k))
    except np.linalg.LinAlgError as exc:
        raise DomainError("covariance is not positive definite") from exc
    diff = x - mean
    if chol.ndim == 2:
        sol = np.linalg.solve(chol, diff.reshape(-1, k).T).T.reshape(diff.shape)
    else:
        sol = np.linalg.solve(chol, diff[..., None])[..., 0]
    logdet = 2.0 * np.log(np.diagonal(chol, axis1=-2, axis2=-1)).sum(axis=-1)
    return -0.5 * (np.sum(sol * sol, axis=-1) + logdet + k * _LOG_2PI)


def obs_log_density(y, mean, cov) -> float:
    """Gaussian log-density of one observation vector."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return float(gaussian_logpdf(y, np.atleast_1d(mean), np.atleast_2d(cov)))
