"""Integrators for the chemical Langevin equation and its ODE limit.

Every scheme exposes ``noise_dim`` (standard normals consumed per fine
step) and ``step(x, theta, h, xi) -> (x_new, clamps)``, vectorised over
leading axes. Supplying the normals explicitly keeps schemes comparable
path by path and makes path-level parallelism deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..crn import ReactionNetwork, _cond_cir_arrays, _propensities, cond_cir_structure
from ..errors import ConfigurationError, DomainError, NotConditionallyCIR
from ..models import LOTKA_VOLTERRA, REPRESSILATOR, TWO_POOL, repressor_of
from .flows import _birth_death_flow, _component

EUM_TRUNCATE = "eum-truncate"
EUM_ABS = "eum-abs"
SPLIT_GENERIC = "split-generic-lietrotter"
SPLIT_REPRESSILATOR = "split-repressilator-strang"
SPLIT_LV_STRANG = "split-lv-strang"
SPLIT_LV_LIETROTTER = "split-lv-lietrotter"
SPLIT_TWOPOOL = "split-twopool-lietrotter"
ODE_CONDLINEAR = "ode-condlinear-strang"
RK4 = "rk4"

SCHEME_KINDS = (
    EUM_TRUNCATE,
    EUM_ABS,
    SPLIT_GENERIC,
    SPLIT_REPRESSILATOR,
    SPLIT_LV_STRANG,
    SPLIT_LV_LIETROTTER,
    SPLIT_TWOPOOL,
    ODE_CONDLINEAR,
    RK4,
)

_MODEL_SPECIFIC = {
    SPLIT_REPRESSILATOR: REPRESSILATOR,
    SPLIT_LV_STRANG: LOTKA_VOLTERRA,
    SPLIT_LV_LIETROTTER: LOTKA_VOLTERRA,
    SPLIT_TWOPOOL: TWO_POOL,
}


def _draw(rng, shape, k):
    if rng is None:
        raise ConfigurationError("either rng or explicit normals must be supplied")
    return rng.standard_normal(tuple(shape) + (k,))


# --- Euler-Maruyama ---------------------------------------------------------


def eum_step(net: ReactionNetwork, x, theta, h: float, noise, negativity: str = "truncate"):
    """Euler-Maruyama step of the CLE.

    Args:
        noise: Brownian increments ``N(0, h)``, shape ``(..., r)``.
        negativity: ``"truncate"`` (``max(0, x)``) or ``"abs"``.

    Returns:
        ``(x_new, n_clamped)`` where ``n_clamped`` counts negative components.
    """
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    a = np.maximum(_propensities(net, x, theta), 0.0)
    with np.errstate(over="ignore", invalid="ignore"):
        x_new = x + (a * h) @ net.nu.T + (np.sqrt(a) * noise) @ net.nu.T
    neg = x_new < 0
    if negativity == "truncate":
        x_new = np.where(neg, 0.0, x_new)
    elif negativity == "abs":
        x_new = np.abs(x_new)
    else:
        raise ConfigurationError(f"unknown negativity policy {negativity!r}")
    return x_new, neg.sum(axis=-1)


# --- splitting schemes --------------------------------------------------------


def _species_order(net: ReactionNetwork, order: Optional[Sequence[int]]):
    if order is None:
        return tuple(range(net.d))
    order = tuple(int(i) for i in order)
    if sorted(order) != list(range(net.d)):
        raise ConfigurationError(f"species order {order} is not a permutation of 0..{net.d - 1}")
    return order


def _generic_step(net, x, theta, h, dw, order):
    shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(theta)[:-1], np.shape(dw)[:-1])
    x = np.array(np.broadcast_to(x, shape + (net.d,)), dtype=float)
    clamps = np.zeros(x.shape[:-1], dtype=np.int64)
    for i in order:
        r_in, r_out = cond_cir_structure(net, i)
        a, b, c_in, c_out = _cond_cir_arrays(net, x, theta, i)
        xi_new, cl = _component(
            x[..., i], a, b, c_in, c_out, h, dw[..., list(r_in)], dw[..., list(r_out)]
        )
        x[..., i] = xi_new
        clamps = clamps + cl
    return x, clamps


def generic_splitting_step(net: ReactionNetwork, x, theta, h: float, rng=None, *, xi=None, order=None):
    """Gauss-Seidel sweep of component steps (Lie-Trotter across species).

    One Brownian increment per reaction is drawn for the step and reused by
    every species whose index sets contain that reaction.

    Args:
        xi: standard normals, shape ``(..., r)``; drawn from ``rng`` if omitted.
        order: species update order (0-based); ascending by default.

    Returns:
        ``(x_new, clamps)``.

    Raises:
        NotConditionallyCIR: if some species is outside the model class.
    """
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    order = _species_order(net, order)
    for i in order:
        cond_cir_structure(net, i)
    if xi is None:
        xi = _draw(rng, x.shape[:-1], net.r)
    return _generic_step(net, x, theta, h, np.sqrt(h) * np.asarray(xi), order)


_REP_IDX = np.array([repressor_of(i) - 1 for i in (1, 2, 3)])


def _repressilator_step(x, theta, h, xi):
    a0, amp, n_hill, beta, K, gamma = (theta[..., k, None] for k in range(6))
    m, p = x[..., 0::2], x[..., 1::2]
    clamps = np.zeros(x.shape[:-1], dtype=np.int64)

    def m_flow(m, p, hh, z):
        s = a0 + amp / (1.0 + (p[..., _REP_IDX] / K) ** n_hill)
        return _birth_death_flow(m, s, gamma, hh, z)

    m, c1 = m_flow(m, p, 0.5 * h, xi[..., 0:3])
    p, c2 = _birth_death_flow(p, beta * m, beta, h, xi[..., 3:6])
    m, c3 = m_flow(m, p, 0.5 * h, xi[..., 6:9])
    out = np.empty(np.broadcast_shapes(x.shape, m.shape[:-1] + (6,)))
    out[..., 0::2] = m
    out[..., 1::2] = p
    clamps = clamps + c1.sum(-1) + c2.sum(-1) + c3.sum(-1)
    return out, clamps


def repressilator_strang_step(x, theta, h: float, rng=None, *, xi=None):
    """Strang composition ``M(h/2) o P(h) o M(h/2)`` with merged noises.

    ``theta = (alpha0, alpha, n, beta, K, gamma)``; ``xi`` holds 9 standard
    normals per step (3 per sub-flow, fresh for each half step).
    """
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if xi is None:
        xi = _draw(rng, x.shape[:-1], 9)
    return _repressilator_step(x, theta, h, np.asarray(xi))


def _lv_x1(x1, x2, t1, t2, h, dw1, dw2):
    zero = np.zeros(np.broadcast_shapes(np.shape(x1), np.shape(x2)))
    c_in = np.stack(np.broadcast_arrays(np.sqrt(t1), -np.sqrt(t2 * x2)), axis=-1)
    dw_in = np.stack(np.broadcast_arrays(dw1, dw2), axis=-1)
    empty = np.zeros(zero.shape + (0,))
    return _component(x1, zero, -(t1 - t2 * x2), c_in, empty, h, dw_in, empty)


def _lv_x2(x1, x2, t2, t3, h, dw2, dw3):
    zero = np.zeros(np.broadcast_shapes(np.shape(x1), np.shape(x2)))
    c_in = np.stack(np.broadcast_arrays(np.sqrt(t2 * x1), -np.sqrt(t3)), axis=-1)
    dw_in = np.stack(np.broadcast_arrays(dw2, dw3), axis=-1)
    empty = np.zeros(zero.shape + (0,))
    return _component(x2, zero, -(t2 * x1 - t3), c_in, empty, h, dw_in, empty)


def _lv_strang(x, theta, h, xi):
    t1, t2, t3 = theta[..., 0], theta[..., 1], theta[..., 2]
    x1, x2 = x[..., 0], x[..., 1]
    sq_half = np.sqrt(0.5 * h)
    w1a, w2a, w1b, w2b = (sq_half * xi[..., k] for k in range(4))
    w3 = np.sqrt(h) * xi[..., 4]
    x1, c1 = _lv_x1(x1, x2, t1, t2, 0.5 * h, w1a, w2a)
    # the shared W2 over the full step is the sum of the two half-step pieces
    x2, c2 = _lv_x2(x1, x2, t2, t3, h, w2a + w2b, w3)
    x1, c3 = _lv_x1(x1, x2, t1, t2, 0.5 * h, w1b, w2b)
    return np.stack([x1, x2], axis=-1), c1 + c2 + c3


def _lv_lietrotter(x, theta, h, xi):
    t1, t2, t3 = theta[..., 0], theta[..., 1], theta[..., 2]
    dw = np.sqrt(h) * xi
    x1, c1 = _lv_x1(x[..., 0], x[..., 1], t1, t2, h, dw[..., 0], dw[..., 1])
    x2, c2 = _lv_x2(x1, x[..., 1], t2, t3, h, dw[..., 1], dw[..., 2])
    return np.stack([x1, x2], axis=-1), c1 + c2


def lv_strang_step(x, theta, h: float, rng=None, *, xi=None):
    """Lotka-Volterra Strang composition ``X1(h/2) o X2(h) o X1(h/2)``.

    ``xi`` holds 5 standard normals: ``(W1, W2)`` for the first half step,
    ``(W1, W2)`` for the second, and ``W3`` for the full step. The shared
    ``W2`` increment seen by ``X2`` is the sum of both half-step pieces.
    """
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if xi is None:
        xi = _draw(rng, x.shape[:-1], 5)
    return _lv_strang(x, theta, h, np.asarray(xi))


def lv_lietrotter_step(x, theta, h: float, rng=None, *, xi=None):
    """Lotka-Volterra Lie-Trotter composition ``X2(h) o X1(h)``; 3 normals."""
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if xi is None:
        xi = _draw(rng, x.shape[:-1], 3)
    return _lv_lietrotter(x, theta, h, np.asarray(xi))


def _twopool(x, theta, h, xi):
    t1, t2, t3, t4 = (theta[..., k] for k in range(4))
    dw = np.sqrt(h) * xi
    x1, x2 = x[..., 0], x[..., 1]
    shape = np.broadcast_shapes(x1.shape, t1.shape)

    def pair(u, v):
        return np.stack(np.broadcast_arrays(u, v), axis=-1)

    def single(u):
        return np.broadcast_to(u, shape)[..., None]

    x1, c1 = _component(
        x1,
        t4 * x2,
        t1 + t3,
        pair(-np.sqrt(t1), -np.sqrt(t3)),
        single(np.sqrt(t4 * x2)),
        h,
        pair(dw[..., 0], dw[..., 2]),
        single(dw[..., 3]),
    )
    x2, c2 = _component(
        x2,
        t3 * x1,
        t2 + t4,
        pair(-np.sqrt(t2), -np.sqrt(t4)),
        single(np.sqrt(t3 * x1)),
        h,
        pair(dw[..., 1], dw[..., 3]),
        single(dw[..., 2]),
    )
    return np.stack([x1, x2], axis=-1), c1 + c2


def twopool_lietrotter_step(x, theta, h: float, rng=None, *, xi=None):
    """Two-pool Lie-Trotter composition ``X2(h) o X1(h)``.

    ``xi`` holds one standard normal per reaction; ``W3`` and ``W4`` are
    shared by both species.
    """
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if xi is None:
        xi = _draw(rng, x.shape[:-1], 4)
    return _twopool(x, theta, h, np.asarray(xi))


# --- deterministic (ODE) schemes ---------------------------------------------


def _ode_blocks(net: ReactionNetwork, blocks):
    if blocks is not None:
        return [tuple(b) for b in blocks]
    if net.name == REPRESSILATOR:
        return [tuple(range(0, net.d, 2)), tuple(range(1, net.d, 2))]
    return [(i,) for i in range(net.d)]


def _linear_flow(net, x, theta, h, block):
    for i in block:
        try:
            a, b, _, _ = _cond_cir_arrays(net, x, theta, i)
        except NotConditionallyCIR as exc:
            raise DomainError(str(exc)) from None
        rate = -b
        small = np.abs(rate) < 1e-10
        rate_safe = np.where(small, 1.0, rate)
        grow = np.exp(rate * h)
        xi = np.where(small, x[..., i] + a * h, x[..., i] * grow + a * np.expm1(rate_safe * h) / rate_safe)
        x[..., i] = xi
    return x


def cond_linear_ode_step(net: ReactionNetwork, x, theta, h: float, blocks=None):
    """Strang composition of exact conditionally-linear flows.

    Each species solves ``dx_i = (a_i - b_i x_i) dt`` exactly with the other
    species frozen. Blocks are composed as
    ``B1(h/2) o ... o B_{m-1}(h/2) o B_m(h) o B_{m-1}(h/2) o ... o B1(h/2)``;
    the Repressilator default is the (mRNA, protein) partition.

    Raises:
        DomainError: if a component drift is not affine in its own species.
    """
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    x = np.array(np.broadcast_to(x, np.broadcast_shapes(x.shape[:-1], theta.shape[:-1]) + (net.d,)))
    blocks = _ode_blocks(net, blocks)
    for blk in blocks[:-1]:
        x = _linear_flow(net, x, theta, 0.5 * h, blk)
    x = _linear_flow(net, x, theta, h, blocks[-1])
    for blk in reversed(blocks[:-1]):
        x = _linear_flow(net, x, theta, 0.5 * h, blk)
    return x


def _ode_drift(net, x, theta):
    return _propensities(net, x, theta) @ net.nu.T


def rk4_step(net: ReactionNetwork, x, theta, h: float):
    """Classical fourth-order Runge-Kutta step of ``dx = nu a(x) dt``."""
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = _ode_drift(net, x, theta)
        k2 = _ode_drift(net, x + 0.5 * h * k1, theta)
        k3 = _ode_drift(net, x + 0.5 * h * k2, theta)
        k4 = _ode_drift(net, x + h * k3, theta)
        return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


# --- scheme objects -----------------------------------------------------------


class Scheme:
    """A configured integrator bound to one network."""

    deterministic = False

    def __init__(self, kind: str, net: ReactionNetwork, species_order=None):
        self.kind = kind
        self.net = net
        self.order = _species_order(net, species_order)
        required = _MODEL_SPECIFIC.get(kind)
        if required is not None and net.name != required:
            raise ConfigurationError(f"scheme {kind} requires the built-in {required} network")
        if kind == SPLIT_GENERIC:
            for i in self.order:
                cond_cir_structure(net, i)
        if kind in (ODE_CONDLINEAR, RK4):
            self.deterministic = True

    @property
    def noise_dim(self) -> int:
        return {
            EUM_TRUNCATE: self.net.r,
            EUM_ABS: self.net.r,
            SPLIT_GENERIC: self.net.r,
            SPLIT_REPRESSILATOR: 9,
            SPLIT_LV_STRANG: 5,
            SPLIT_LV_LIETROTTER: 3,
            SPLIT_TWOPOOL: 4,
            ODE_CONDLINEAR: 0,
            RK4: 0,
        }[self.kind]

    @property
    def is_splitting(self) -> bool:
        return self.kind.startswith("split-")

    def step(self, x, theta, h, xi):
        k = self.kind
        if k == EUM_TRUNCATE or k == EUM_ABS:
            return eum_step(self.net, x, theta, h, np.sqrt(h) * xi, k.split("-")[1])
        if k == SPLIT_GENERIC:
            return _generic_step(self.net, x, theta, h, np.sqrt(h) * xi, self.order)
        if k == SPLIT_REPRESSILATOR:
            return _repressilator_step(x, theta, h, xi)
        if k == SPLIT_LV_STRANG:
            return _lv_strang(x, theta, h, xi)
        if k == SPLIT_LV_LIETROTTER:
            return _lv_lietrotter(x, theta, h, xi)
        if k == SPLIT_TWOPOOL:
            return _twopool(x, theta, h, xi)
        zeros = np.zeros(np.broadcast_shapes(np.shape(x)[:-1], np.shape(theta)[:-1]), dtype=np.int64)
        if k == ODE_CONDLINEAR:
            return cond_linear_ode_step(self.net, x, theta, h), zeros
        return rk4_step(self.net, x, theta, h), zeros


def normalize_kind(kind: str) -> str:
    k = kind.strip().lower().replace("_", "-")
    aliases = {"split-generic": SPLIT_GENERIC, "eum": EUM_TRUNCATE, "split-twopool": SPLIT_TWOPOOL}
    k = aliases.get(k, k)
    if k not in SCHEME_KINDS:
        raise ConfigurationError(f"unknown scheme {kind!r}; choose from {SCHEME_KINDS}")
    return k


@dataclass(frozen=True)
class SchemeConfig:
    kind: str = SPLIT_GENERIC
    rng_seed: int = 0
    species_update_order: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", normalize_kind(self.kind))
        if self.species_update_order is not None:
            object.__setattr__(self, "species_update_order", tuple(self.species_update_order))

    def build(self, net: ReactionNetwork) -> Scheme:
        return Scheme(self.kind, net, self.species_update_order)


def default_splitting_kind(net: ReactionNetwork) -> str:
    """Hand-derived splitting for built-in models, generic sweep otherwise."""
    return {
        REPRESSILATOR: SPLIT_REPRESSILATOR,
        LOTKA_VOLTERRA: SPLIT_LV_STRANG,
        TWO_POOL: SPLIT_TWOPOOL,
    }.get(net.name, SPLIT_GENERIC)
