"""Figures rendered next to the CSV outputs.

The Agg backend and empty metadata keep PNG bytes identical across runs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
    return path


def plot_trajectory(times, states, labels, path, obs_times=None, obs_values=None, obs_labels=()):
    fig, ax = plt.subplots(figsize=(7, 4))
    for k, lab in enumerate(labels):
        ax.plot(times, states[:, k], lw=1, label=lab)
    if obs_times is not None:
        for k in range(obs_values.shape[1]):
            lab = obs_labels[k] if k < len(obs_labels) else f"y_{k + 1}"
            ax.plot(obs_times, obs_values[:, k], "o", ms=3, label=f"observed {lab}")
    ax.set_xlabel("t")
    ax.set_ylabel("molecules")
    ax.legend(fontsize=7, ncol=2)
    return _save(fig, path)


def plot_distributions(samples: dict, path, title=""):
    """Empirical CDFs; ``samples`` maps a label to a 1-d sample."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for lab, x in samples.items():
        xs = np.sort(np.asarray(x))
        ax.step(xs, np.arange(1, xs.size + 1) / xs.size, where="post", lw=1, label=lab)
    ax.set_xlabel("value")
    ax.set_ylabel("empirical CDF")
    ax.set_title(title)
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_phase(paths: dict, path, labels=("X1", "X2")):
    """Phase-plane panels, one per key of ``paths`` (arrays ``(T, d)``)."""
    keys = list(paths)
    fig, axes = plt.subplots(1, len(keys), figsize=(3.2 * len(keys), 3.2), squeeze=False)
    for ax, key in zip(axes[0], keys):
        xy = paths[key]
        ok = np.isfinite(xy).all(axis=1)
        ax.plot(xy[ok, 0], xy[ok, 1], lw=0.6)
        ax.set_title(key, fontsize=8)
        ax.set_xlabel(labels[0])
        ax.set_ylabel(labels[1])
    fig.tight_layout()
    return _save(fig, path)


def plot_epsilon(curves: dict, path):
    """Tolerance against cumulative simulator calls per method."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for method, (calls, eps) in curves.items():
        ax.plot(calls, eps, "o-", label=method)
    ax.set_xlabel("cumulative simulator calls")
    ax.set_ylabel("tolerance")
    ax.set_yscale("log")
    ax.legend()
    return _save(fig, path)


def plot_posteriors(clouds: dict, names, truth, path):
    """Weighted histograms of the final clouds, one panel per parameter."""
    fig, axes = plt.subplots(1, len(names), figsize=(3 * len(names), 3), squeeze=False)
    for k, (ax, name) in enumerate(zip(axes[0], names)):
        for method, (thetas, weights) in clouds.items():
            ax.hist(thetas[:, k], bins=30, weights=weights, histtype="step", density=True, label=method)
        if truth is not None:
            ax.axvline(truth[k], color="k", lw=1)
        ax.set_title(name, fontsize=8)
    axes[0][0].legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)
