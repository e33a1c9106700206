"""Built-in reaction networks: Repressilator, Lotka-Volterra and two-pool."""

import numpy as np

from .crn import Constant, HillProduction, MassAction, ReactionNetwork
from .errors import ConfigurationError

REPRESSILATOR = "repressilator"
LOTKA_VOLTERRA = "lotka_volterra"
TWO_POOL = "two_pool"


def repressor_of(i: int) -> int:
    """Protein (1-based) repressing mRNA ``i``: ``((i + 1) mod 3) + 1``."""
    return (i + 1) % 3 + 1


def repressilator() -> ReactionNetwork:
    """Six-species Repressilator, state ``(M1, P1, M2, P2, M3, P3)``.

    Reactions per gene ``i`` (0-based reaction ``4(i-1) + k``):
    mRNA production ``alpha0 + alpha K^n / (K^n + P_j^n)``, protein
    production ``beta M_i``, protein decay ``beta P_i``, mRNA decay
    ``gamma M_i``. The usual setting is ``K = 20`` and ``gamma = 1``.
    """
    params = ("alpha0", "alpha", "n", "beta", "K", "gamma")
    a0, amp, n_hill, beta, K, gamma = range(6)
    species = ("M1", "P1", "M2", "P2", "M3", "P3")
    d = 6
    nu = np.zeros((d, 12), dtype=int)
    specs = []

    def unit(k):
        v = [0] * d
        v[k] = 1
        return tuple(v)

    for i in (1, 2, 3):
        m, p = 2 * (i - 1), 2 * (i - 1) + 1
        pj = 2 * (repressor_of(i) - 1) + 1
        base = 4 * (i - 1)
        nu[m, base] = 1
        specs.append(HillProduction(a0, amp, K, n_hill, pj))
        nu[p, base + 1] = 1
        specs.append(MassAction(beta, unit(m)))
        nu[p, base + 2] = -1
        specs.append(MassAction(beta, unit(p)))
        nu[m, base + 3] = -1
        specs.append(MassAction(gamma, unit(m)))
    return ReactionNetwork(nu, tuple(specs), species, params, REPRESSILATOR)


def lotka_volterra() -> ReactionNetwork:
    """Stochastic Lotka-Volterra with reactions ``X1 -> 2X1``,
    ``X1 + X2 -> 2X2`` and ``X2 -> 0``."""
    nu = np.array([[1, -1, 0], [0, 1, -1]])
    specs = (
        MassAction(0, (1, 0)),
        MassAction(1, (1, 1)),
        MassAction(2, (0, 1)),
    )
    return ReactionNetwork(nu, specs, ("X1", "X2"), ("theta1", "theta2", "theta3"), LOTKA_VOLTERRA)


def two_pool() -> ReactionNetwork:
    """Decay and exchange between two pools: ``X1 -> 0``, ``X2 -> 0``,
    ``X1 -> X2``, ``X2 -> X1``."""
    nu = np.array([[-1, 0, -1, 1], [0, -1, 1, -1]])
    specs = (
        MassAction(0, (1, 0)),
        MassAction(1, (0, 1)),
        MassAction(2, (1, 0)),
        MassAction(3, (0, 1)),
    )
    return ReactionNetwork(
        nu, specs, ("X1", "X2"), ("theta1", "theta2", "theta3", "theta4"), TWO_POOL
    )


def birth_death() -> ReactionNetwork:
    """Single species with constant production (rate 0) and linear decay (rate 1)."""
    nu = np.array([[1, -1]])
    return ReactionNetwork(nu, (Constant(0), MassAction(1, (1,))), ("X",), ("k_in", "k_out"))


BUILTIN = {
    REPRESSILATOR: repressilator,
    LOTKA_VOLTERRA: lotka_volterra,
    TWO_POOL: two_pool,
}


def get_model(name: str) -> ReactionNetwork:
    try:
        return BUILTIN[name]()
    except KeyError:
        raise ConfigurationError(f"unknown model {name!r}; choose from {sorted(BUILTIN)}") from None
