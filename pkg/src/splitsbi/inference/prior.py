"""Independent uniform priors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError


@dataclass(frozen=True)
class PriorSpec:
    """Product of ``U(low_k, high_k)`` over named components."""

    names: tuple
    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        low = np.array(self.low, dtype=float)
        high = np.array(self.high, dtype=float)
        names = tuple(self.names)
        if low.shape != (len(names),) or high.shape != low.shape:
            raise ConfigurationError("prior bounds must match the parameter names")
        if not np.all(low < high):
            raise ConfigurationError("prior needs low < high for every component")
        low.setflags(write=False)
        high.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    @classmethod
    def from_dict(cls, bounds: dict) -> "PriorSpec":
        """``{name: (low, high)}`` in insertion order."""
        names = tuple(bounds)
        return cls(names, [bounds[k][0] for k in names], [bounds[k][1] for k in names])

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def log_density_inside(self) -> float:
        return float(-np.sum(np.log(self.high - self.low)))

    def contains(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.all((theta >= self.low) & (theta <= self.high), axis=-1)

    def logpdf(self, theta) -> np.ndarray:
        return np.where(self.contains(theta), self.log_density_inside, -np.inf)

    def pdf(self, theta) -> np.ndarray:
        return np.exp(self.logpdf(theta))

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
        return self.low + (self.high - self.low) * rng.random(shape + (self.dim,))
