"""Exact reference samplers: CIR transitions and Gillespie's direct method."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..crn import ReactionNetwork, _propensities
from ..errors import DomainError


@dataclass(frozen=True)
class CIRParams:
    """``dX = beta (alpha - X) dt + sigma sqrt(X) dW``."""

    alpha: float
    beta: float
    sigma: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0 and self.sigma > 0):
            raise DomainError("CIR parameters must be positive")

    @property
    def feller(self) -> bool:
        return 2 * self.alpha * self.beta > self.sigma**2

    def mean(self, x, t):
        return self.alpha + (np.asarray(x) - self.alpha) * np.exp(-self.beta * t)

    def variance(self, x, t):
        e = np.exp(-self.beta * t)
        s2, b, a = self.sigma**2, self.beta, self.alpha
        return np.asarray(x) * s2 * e * (1 - e) / b + a * s2 * (1 - e) ** 2 / (2 * b)


def cir_exact_sample(p: CIRParams, x, h: float, rng: np.random.Generator, size=None):
    """Draw ``X(h)`` given ``X(0) = x`` from the noncentral chi-square law.

    ``X(h) = c * chi2'(df, nc)`` with ``c = sigma^2 (1 - e^{-beta h}) / (4 beta)``,
    ``df = 4 alpha beta / sigma^2`` and ``nc = x e^{-beta h} / c``. The
    noncentral draw is a Poisson mixture of central chi-squares, each
    realised as a Gamma variate so fractional ``df`` needs no special case.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or not h > 0:
        raise DomainError("need x >= 0 and h > 0")
    e = np.exp(-p.beta * h)
    c = p.sigma**2 * (1 - e) / (4 * p.beta)
    df = 4 * p.alpha * p.beta / p.sigma**2
    nc = x * e / c
    if size is not None:
        nc = np.broadcast_to(nc, size)
    mix = rng.poisson(0.5 * nc)
    return c * 2.0 * rng.gamma(0.5 * df + mix)


def gillespie_ssa(net: ReactionNetwork, x0, theta, t_end: float, rng: np.random.Generator, max_events=10_000_000):
    """Exact Markov jump path by the direct method.

    Returns:
        ``(times, states)``: event times starting at 0 and the state after
        each event (row 0 is ``x0``). The path is constant after the last
        event up to ``t_end``.
    """
    x = np.asarray(x0, dtype=float).copy()
    if np.any(x != np.round(x)) or np.any(x < 0):
        raise DomainError("SSA needs a nonnegative integer initial state")
    theta = np.asarray(theta, dtype=float)
    nu = net.nu.T.astype(float)
    t = 0.0
    times, states = [0.0], [x.copy()]
    for _ in range(max_events):
        a = _propensities(net, x, theta)
        total = a.sum()
        if total <= 0:
            break
        t += rng.exponential(1.0 / total)
        if t > t_end:
            break
        j = np.searchsorted(np.cumsum(a), rng.random() * total, side="right")
        x = x + nu[min(j, net.r - 1)]
        times.append(t)
        states.append(x.copy())
    return np.array(times), np.array(states)


def ssa_state_at(net: ReactionNetwork, x0, theta, t_end: float, n_runs: int, rng: np.random.Generator):
    """States at ``t_end`` of ``n_runs`` independent SSA runs, advanced in lockstep."""
    theta = np.asarray(theta, dtype=float)
    x = np.tile(np.asarray(x0, dtype=float), (n_runs, 1))
    if np.any(x != np.round(x)) or np.any(x < 0):
        raise DomainError("SSA needs a nonnegative integer initial state")
    t = np.zeros(n_runs)
    active = np.ones(n_runs, dtype=bool)
    nu = net.nu.T.astype(float)
    while active.any():
        idx = np.flatnonzero(active)
        a = _propensities(net, x[idx], theta)
        total = a.sum(axis=1)
        dead = total <= 0
        t_new = t[idx] + rng.exponential(1.0, size=idx.size) / np.where(dead, 1.0, total)
        done = dead | (t_new > t_end)
        u = rng.random(idx.size) * total
        j = (np.cumsum(a, axis=1) <= u[:, None]).sum(axis=1)
        j = np.minimum(j, net.r - 1)
        move = ~done
        x[idx[move]] += nu[j[move]]
        t[idx[move]] = t_new[move]
        active[idx[done]] = False
    return x
