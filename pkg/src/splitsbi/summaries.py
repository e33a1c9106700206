"""Summary statistics for observed paths and the ABC distance.

The default statistic is a regression estimate of the parameter given a
path: a fixed handcrafted feature vector is standardised and mapped to
each parameter component by ridge regression, refitted as the training
store grows.
"""

from __future__ import annotations

import json
from itertools import combinations

import numpy as np

from .errors import ConfigurationError

SCHEMA_VERSION = 1
RIDGE_PENALTY = 1e-6
MIN_PAIRS_PER_FEATURE = 10
PER_CHANNEL = ("mean", "sd", "acf1", "acf2", "min", "max", "diff_mean", "diff_sd", "first", "last")


def n_features(d_obs: int) -> int:
    return len(PER_CHANNEL) * d_obs + d_obs * (d_obs - 1) // 2


def feature_names(d_obs: int) -> list[str]:
    names = [f"{f}_{c + 1}" for c in range(d_obs) for f in PER_CHANNEL]
    names += [f"corr_{a + 1}_{b + 1}" for a, b in combinations(range(d_obs), 2)]
    return names


def _safe_ratio(num, den):
    ok = den > 0
    return np.where(ok, num / np.where(ok, den, 1.0), 0.0)


def featurize(paths) -> np.ndarray:
    """Feature vectors of paths with shape ``(..., n, d_obs)``.

    Per channel: mean, standard deviation, lag-1 and lag-2
    autocorrelation, min, max, mean and standard deviation of first
    differences, first and last value. Then the correlation of every
    channel pair. Autocorrelations and correlations of a constant channel
    are 0.
    """
    y = np.asarray(paths, dtype=float)
    if y.ndim < 2:
        raise ConfigurationError("paths need shape (..., n, d_obs)")
    n = y.shape[-2]
    mean = y.mean(axis=-2)
    c = y - mean[..., None, :]
    ss = np.sum(c * c, axis=-2)
    sd = np.sqrt(ss / n)
    acf = []
    for lag in (1, 2):
        num = np.sum(c[..., lag:, :] * c[..., :-lag, :], axis=-2) if n > lag else np.zeros_like(ss)
        acf.append(_safe_ratio(num, ss))
    if n > 1:
        dy = np.diff(y, axis=-2)
        d_mean, d_sd = dy.mean(axis=-2), dy.std(axis=-2)
    else:
        d_mean = d_sd = np.zeros_like(mean)
    per = np.stack(
        [mean, sd, acf[0], acf[1], y.min(axis=-2), y.max(axis=-2), d_mean, d_sd, y[..., 0, :], y[..., -1, :]],
        axis=-1,
    )
    feats = [per.reshape(per.shape[:-2] + (-1,))]
    d_obs = y.shape[-1]
    for a, b in combinations(range(d_obs), 2):
        num = np.sum(c[..., a] * c[..., b], axis=-1)
        feats.append(_safe_ratio(num, np.sqrt(ss[..., a] * ss[..., b]))[..., None])
    return np.concatenate(feats, axis=-1)


class TrainingStore:
    """Append-only collection of ``(path, theta)`` pairs."""

    def __init__(self, d_obs: int, n_params: int):
        self.d_obs = d_obs
        self.n_params = n_params
        self._paths: list[np.ndarray] = []
        self._thetas: list[np.ndarray] = []
        self._feats: list[np.ndarray] = []

    def __len__(self):
        return sum(len(t) for t in self._thetas)

    def copy(self) -> "TrainingStore":
        new = TrainingStore(self.d_obs, self.n_params)
        new._paths, new._thetas, new._feats = list(self._paths), list(self._thetas), list(self._feats)
        return new

    def extend(self, paths, thetas) -> None:
        paths = np.asarray(paths, dtype=float)
        thetas = np.asarray(thetas, dtype=float).reshape(-1, self.n_params)
        if paths.ndim != 3 or paths.shape[0] != thetas.shape[0] or paths.shape[2] != self.d_obs:
            raise ConfigurationError("paths must be (N, n, d_obs) matching thetas (N, p)")
        self._paths.append(paths)
        self._thetas.append(thetas)
        self._feats.append(featurize(paths))

    @property
    def paths(self) -> np.ndarray:
        return np.concatenate(self._paths) if self._paths else np.empty((0, 0, self.d_obs))

    @property
    def thetas(self) -> np.ndarray:
        return np.concatenate(self._thetas) if self._thetas else np.empty((0, self.n_params))

    @property
    def features(self) -> np.ndarray:
        return np.concatenate(self._feats) if self._feats else np.empty((0, n_features(self.d_obs)))


class SummaryStatistic:
    """Interface: map paths ``(..., n, d_obs)`` to summaries ``(..., p)``."""

    dim: int

    def summarize(self, paths) -> np.ndarray:
        raise NotImplementedError

    def refit(self, store: TrainingStore) -> "SummaryStatistic":
        """Return a statistic retrained on ``store`` (may return ``self``)."""
        return self

    def __call__(self, paths) -> np.ndarray:
        return self.summarize(paths)


class RegressionSummary(SummaryStatistic):
    """Ridge regression of the parameter on standardised path features.

    Attributes:
        coef: ``(p, q + 1)`` coefficients, intercept first.
        feat_mean, feat_scale: feature standardisation.
    """

    def __init__(self, coef, feat_mean, feat_scale, d_obs: int, penalty: float = RIDGE_PENALTY):
        self.coef = np.asarray(coef, dtype=float)
        self.feat_mean = np.asarray(feat_mean, dtype=float)
        self.feat_scale = np.asarray(feat_scale, dtype=float)
        self.d_obs = int(d_obs)
        self.penalty = float(penalty)
        if self.coef.shape[1] != n_features(self.d_obs) + 1:
            raise ConfigurationError("coefficient matrix does not match the feature count")

    @property
    def dim(self) -> int:
        return self.coef.shape[0]

    @classmethod
    def fit_features(cls, feats, thetas, d_obs: int, penalty: float = RIDGE_PENALTY) -> "RegressionSummary":
        """Fit on precomputed features ``(N, q)`` and targets ``(N, p)``.

        Minimises ``mean ||theta - B [1; f]||^2 + penalty * ||B_slopes||^2``
        over standardised features; the intercept is not penalised.
        """
        X = np.asarray(feats, dtype=float)
        T = np.asarray(thetas, dtype=float)
        n_obs = X.shape[0]
        mu = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        Z = np.hstack([np.ones((n_obs, 1)), (X - mu) / scale])
        gram = Z.T @ Z / n_obs
        reg = penalty * np.eye(Z.shape[1])
        reg[0, 0] = 0.0
        coef = np.linalg.solve(gram + reg, Z.T @ T / n_obs).T
        return cls(coef, mu, scale, d_obs, penalty)

    @classmethod
    def fit(cls, store: TrainingStore, previous: "RegressionSummary | None" = None, penalty: float = RIDGE_PENALTY):
        """Fit on ``store``; with too few pairs fall back to ``previous``."""
        if len(store) < MIN_PAIRS_PER_FEATURE * n_features(store.d_obs):
            if previous is None:
                raise ConfigurationError(
                    f"need at least {MIN_PAIRS_PER_FEATURE * n_features(store.d_obs)} pairs to fit summaries"
                )
            return previous
        return cls.fit_features(store.features, store.thetas, store.d_obs, penalty)

    def refit(self, store: TrainingStore) -> "RegressionSummary":
        return RegressionSummary.fit(store, previous=self, penalty=self.penalty)

    def summarize_features(self, feats) -> np.ndarray:
        z = (np.asarray(feats, dtype=float) - self.feat_mean) / self.feat_scale
        return self.coef[:, 0] + z @ self.coef[:, 1:].T

    def summarize(self, paths) -> np.ndarray:
        return self.summarize_features(featurize(paths))

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "ridge-features",
            "d_obs": self.d_obs,
            "penalty": self.penalty,
            "features": feature_names(self.d_obs),
            "coef": self.coef.tolist(),
            "feat_mean": self.feat_mean.tolist(),
            "feat_scale": self.feat_scale.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RegressionSummary":
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ConfigurationError("unsupported summary schema version")
        return cls(doc["coef"], doc["feat_mean"], doc["feat_scale"], doc["d_obs"], doc["penalty"])

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "RegressionSummary":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def mad_scale(summaries) -> np.ndarray:
    """Median absolute deviation per component; falls back to sd, then 1."""
    s = np.asarray(summaries, dtype=float)
    mad = np.median(np.abs(s - np.median(s, axis=0)), axis=0)
    sd = s.std(axis=0)
    return np.where(mad > 0, mad, np.where(sd > 0, sd, 1.0))


def distance(s1, s2, scale) -> np.ndarray:
    """Euclidean norm of ``(s1 - s2) / scale``; broadcasts over leading dims."""
    scale = np.asarray(scale, dtype=float)
    if np.any(scale <= 0):
        raise ConfigurationError("scale must be strictly positive")
    diff = (np.asarray(s1, dtype=float) - np.asarray(s2, dtype=float)) / scale
    return np.sqrt(np.sum(diff * diff, axis=-1))
