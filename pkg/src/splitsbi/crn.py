"""Chemical reaction networks and their chemical Langevin equation.

A :class:`ReactionNetwork` couples a stoichiometry matrix with one
propensity specification per reaction. Propensities are kept symbolic
(mass action, Hill repression, constant) rather than as opaque callables so
that the conditionally-CIR decomposition of each species can be derived
mechanically: for species ``i`` every reaction that changes ``x_i`` is
either independent of ``x_i`` (collected in ``r_out``) or linear in it
(collected in ``r_in``).

All evaluation functions broadcast over leading axes: ``x`` has shape
``(..., d)`` and ``theta`` shape ``(..., p)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import ConfigurationError, DomainError, NotConditionallyCIR

__all__ = [
    "MassAction",
    "HillProduction",
    "Constant",
    "ReactionNetwork",
    "CondCIRCoefficients",
    "evaluate_propensities",
    "cle_drift",
    "cle_diffusion_columns",
    "cle_diffusion_matrix",
    "cond_cir_coefficients",
    "cond_cir_structure",
    "network_from_dict",
    "network_to_dict",
    "load_network",
]

# degree value used for anything that is not affine in the species
NONAFFINE = 2


@dataclass(frozen=True)
class MassAction:
    """``theta[rate] * prod_i binom(x_i, orders[i])`` with total order <= 2."""

    rate: int
    orders: tuple[int, ...]

    def degree(self, i: int) -> int:
        return self.orders[i]


@dataclass(frozen=True)
class HillProduction:
    """Basal production plus Hill repression by one species.

    ``theta[basal] + theta[amplitude] * K**n / (K**n + x[repressor]**n)``
    with ``K = theta[half_saturation]`` and ``n = theta[exponent]``.
    """

    basal: int
    amplitude: int
    half_saturation: int
    exponent: int
    repressor: int

    def degree(self, i: int) -> int:
        return NONAFFINE if i == self.repressor else 0


@dataclass(frozen=True)
class Constant:
    rate: int

    def degree(self, i: int) -> int:
        return 0


PropensitySpec = Union[MassAction, HillProduction, Constant]


@dataclass(frozen=True, eq=False)
class ReactionNetwork:
    """Stoichiometry, propensities and naming for a CRN.

    Attributes:
        nu: ``(d, r)`` integer net stoichiometry (products minus reactants).
        propensities: one spec per reaction; indices point into ``theta``.
        species: species labels, length ``d``.
        parameters: labels of the entries of ``theta``.
        name: identifier; built-in models use it to unlock their
            hand-derived integrators.
    """

    nu: np.ndarray
    propensities: tuple
    species: tuple[str, ...]
    parameters: tuple[str, ...]
    name: str = "custom"
    _structure_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        nu = np.asarray(self.nu)
        if nu.ndim != 2:
            raise ConfigurationError("stoichiometry matrix must be 2-d")
        if not np.all(np.equal(np.mod(nu, 1), 0)):
            raise ConfigurationError("stoichiometry entries must be integers")
        nu = nu.astype(np.int64)
        nu.setflags(write=False)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "propensities", tuple(self.propensities))
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "parameters", tuple(self.parameters))
        d, r = nu.shape
        if len(self.propensities) != r:
            raise ConfigurationError(f"{r} reactions but {len(self.propensities)} propensities")
        if len(self.species) != d:
            raise ConfigurationError(f"{d} species but {len(self.species)} labels")
        p = len(self.parameters)
        for j, spec in enumerate(self.propensities):
            if isinstance(spec, MassAction):
                idx = [spec.rate]
                if len(spec.orders) != d:
                    raise ConfigurationError(f"reaction {j}: order vector must have length {d}")
                if min(spec.orders) < 0 or sum(spec.orders) > 2:
                    raise ConfigurationError(f"reaction {j}: orders must be >= 0 with total <= 2")
            elif isinstance(spec, HillProduction):
                idx = [spec.basal, spec.amplitude, spec.half_saturation, spec.exponent]
                if not 0 <= spec.repressor < d:
                    raise ConfigurationError(f"reaction {j}: repressor index out of range")
            elif isinstance(spec, Constant):
                idx = [spec.rate]
            else:
                raise ConfigurationError(f"reaction {j}: unknown propensity {spec!r}")
            if any(not 0 <= k < p for k in idx):
                raise ConfigurationError(f"reaction {j}: parameter index out of range")

    @property
    def d(self) -> int:
        return self.nu.shape[0]

    @property
    def r(self) -> int:
        return self.nu.shape[1]

    @property
    def p(self) -> int:
        return len(self.parameters)

    def param_index(self, name: str) -> int:
        try:
            return self.parameters.index(name)
        except ValueError:
            raise ConfigurationError(f"unknown parameter {name!r} for {self.name}") from None

    def species_index(self, name: str) -> int:
        try:
            return self.species.index(name)
        except ValueError:
            raise ConfigurationError(f"unknown species {name!r} for {self.name}") from None


@dataclass(frozen=True)
class CondCIRCoefficients:
    """Frozen-coordinate coefficients of one species.

    With every other species frozen, species ``i`` follows
    ``dX = (a_tilde - b_tilde X) dt + sqrt(X) sum_{r_in} c_j dW_j
    + sum_{r_out} c_j dW_j``.
    """

    species: int
    a_tilde: float
    b_tilde: float
    r_in: tuple[int, ...]
    r_out: tuple[int, ...]
    c_tilde: dict

    @property
    def c_in(self) -> np.ndarray:
        return np.array([self.c_tilde[j] for j in self.r_in], dtype=float)

    @property
    def c_out(self) -> np.ndarray:
        return np.array([self.c_tilde[j] for j in self.r_out], dtype=float)

    @property
    def sum_c2_in(self) -> float:
        return float(np.sum(self.c_in**2))

    @classmethod
    def pure_cir(cls, alpha: float, beta: float, sigma: float) -> "CondCIRCoefficients":
        """Coefficients of ``dX = beta (alpha - X) dt + sigma sqrt(X) dW``."""
        return cls(0, alpha * beta, beta, (0,), (), {0: sigma})


def _check_inputs(net: ReactionNetwork, x: np.ndarray, theta: np.ndarray) -> None:
    if x.shape[-1] != net.d:
        raise ConfigurationError(f"state has {x.shape[-1]} entries, network has {net.d} species")
    if theta.shape[-1] != net.p:
        raise ConfigurationError(f"theta has {theta.shape[-1]} entries, network expects {net.p}")
    if np.any(x < 0):
        raise DomainError("state entries must be nonnegative")


def _order_factor(xi: np.ndarray, order: int):
    if order == 0:
        return 1.0
    if order == 1:
        return xi
    # binom(x, 2); clipped at zero on (0, 1) where the continuous form dips negative
    return np.maximum(xi * (xi - 1.0) * 0.5, 0.0)


def _propensity(spec, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    if isinstance(spec, MassAction):
        val = theta[..., spec.rate]
        for i, o in enumerate(spec.orders):
            if o:
                val = val * _order_factor(x[..., i], o)
        return val
    if isinstance(spec, HillProduction):
        ratio = x[..., spec.repressor] / theta[..., spec.half_saturation]
        hill = theta[..., spec.amplitude] / (1.0 + ratio ** theta[..., spec.exponent])
        return theta[..., spec.basal] + hill
    return theta[..., spec.rate]


def _propensities(net: ReactionNetwork, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    shape = np.broadcast_shapes(x.shape[:-1], theta.shape[:-1])
    out = np.empty(shape + (net.r,))
    for j, spec in enumerate(net.propensities):
        out[..., j] = _propensity(spec, x, theta)
    return out


def evaluate_propensities(net: ReactionNetwork, x, theta) -> np.ndarray:
    """Propensity of every reaction at state ``x``; shape ``(..., r)``.

    Raises:
        ConfigurationError: if ``x`` or ``theta`` have the wrong length.
        DomainError: if any state entry is negative.
    """
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    _check_inputs(net, x, theta)
    return _propensities(net, x, theta)


def cle_drift(net: ReactionNetwork, x, theta) -> np.ndarray:
    """CLE drift ``nu @ a(x)``, shape ``(..., d)``."""
    a = evaluate_propensities(net, x, theta)
    return a @ net.nu.T


def cle_diffusion_columns(net: ReactionNetwork, x, theta) -> np.ndarray:
    """Noise matrix with entries ``nu[i, j] * sqrt(a_j(x))``, shape ``(..., d, r)``."""
    a = evaluate_propensities(net, x, theta)
    if np.any(a < 0):
        raise AssertionError("negative propensity at a nonnegative state")
    return net.nu * np.sqrt(a)[..., None, :]


def cle_diffusion_matrix(net: ReactionNetwork, x, theta) -> np.ndarray:
    """``D = nu diag(a) nu^T``, shape ``(..., d, d)``."""
    a = evaluate_propensities(net, x, theta)
    return (net.nu * a[..., None, :]) @ net.nu.T


def cond_cir_structure(net: ReactionNetwork, i: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Index sets ``(r_in, r_out)`` of species ``i``.

    Only reactions with ``nu[i, j] != 0`` enter either set.

    Raises:
        NotConditionallyCIR: if such a reaction is not affine in ``x_i``.
    """
    cached = net._structure_cache.get(i)
    if cached is not None:
        return cached
    if not 0 <= i < net.d:
        raise ConfigurationError(f"species index {i} out of range")
    r_in, r_out = [], []
    for j, spec in enumerate(net.propensities):
        if net.nu[i, j] == 0:
            continue
        deg = spec.degree(i)
        if deg >= NONAFFINE:
            raise NotConditionallyCIR(
                f"reaction {j} of {net.name} is not affine in species {net.species[i]}"
            )
        (r_in if deg == 1 else r_out).append(j)
    result = (tuple(r_in), tuple(r_out))
    net._structure_cache[i] = result
    return result


def _cond_cir_arrays(net: ReactionNetwork, x: np.ndarray, theta: np.ndarray, i: int):
    """Vectorised ``(a_tilde, b_tilde, c_in, c_out)`` for species ``i``.

    ``a_j(x_{-i})`` for a linear reaction is the propensity evaluated with
    ``x_i = 1``, which strips the single ``x_i`` factor.
    """
    r_in, r_out = cond_cir_structure(net, i)
    nu_i = net.nu[i]
    shape = np.broadcast_shapes(x.shape[:-1], theta.shape[:-1])
    a_tilde = np.zeros(shape)
    b_tilde = np.zeros(shape)
    c_in = np.empty(shape + (len(r_in),))
    c_out = np.empty(shape + (len(r_out),))
    if r_in:
        x_unit = np.array(x, dtype=float, copy=True)
        x_unit[..., i] = 1.0
        for k, j in enumerate(r_in):
            aj = _propensity(net.propensities[j], x_unit, theta)
            b_tilde = b_tilde - nu_i[j] * aj
            c_in[..., k] = nu_i[j] * np.sqrt(aj)
    for k, j in enumerate(r_out):
        aj = _propensity(net.propensities[j], x, theta)
        a_tilde = a_tilde + nu_i[j] * aj
        c_out[..., k] = nu_i[j] * np.sqrt(aj)
    return a_tilde, b_tilde, c_in, c_out


def cond_cir_coefficients(net: ReactionNetwork, x_frozen, theta, i: int) -> CondCIRCoefficients:
    """Conditionally-CIR coefficients of species ``i`` at a single frozen state."""
    x = np.asarray(x_frozen, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if x.ndim != 1 or theta.ndim != 1:
        raise ConfigurationError("cond_cir_coefficients expects a single state and parameter vector")
    _check_inputs(net, x, theta)
    r_in, r_out = cond_cir_structure(net, i)
    a, b, c_in, c_out = _cond_cir_arrays(net, x, theta, i)
    c = {j: float(v) for j, v in zip(r_in, c_in)}
    c.update({j: float(v) for j, v in zip(r_out, c_out)})
    return CondCIRCoefficients(i, float(a), float(b), r_in, r_out, c)


# --- JSON network documents -------------------------------------------------


def _resolve(ref, names: Sequence[str], what: str) -> int:
    if isinstance(ref, int):
        return ref
    try:
        return list(names).index(ref)
    except ValueError:
        raise ConfigurationError(f"unknown {what} {ref!r}") from None


def _vector(entry, species: Sequence[str]) -> list[int]:
    if isinstance(entry, dict):
        vec = [0] * len(species)
        for name, count in entry.items():
            vec[_resolve(name, species, "species")] = int(count)
        return vec
    vec = [int(v) for v in entry]
    if len(vec) != len(species):
        raise ConfigurationError("stoichiometry vector has the wrong length")
    return vec


def network_from_dict(doc: dict) -> ReactionNetwork:
    """Build a network from ``{species, parameters, reactions: [...]}``.

    Each reaction carries ``nu_minus``, ``nu_plus`` (lists or
    ``{species: count}`` maps) and a ``propensity`` object whose ``kind`` is
    ``mass_action`` (orders default to ``nu_minus``), ``hill`` or
    ``constant``. Parameter and species references may be names or indices.
    """
    try:
        species = list(doc["species"])
        params = list(doc["parameters"])
        reactions = doc["reactions"]
    except KeyError as exc:
        raise ConfigurationError(f"network document lacks {exc}") from None
    columns, specs = [], []
    for rxn in reactions:
        minus = _vector(rxn.get("nu_minus", []) or [0] * len(species), species)
        plus = _vector(rxn.get("nu_plus", []) or [0] * len(species), species)
        columns.append([b - a for a, b in zip(minus, plus)])
        prop = rxn["propensity"]
        kind = prop.get("kind", "mass_action")
        if kind == "mass_action":
            orders = prop.get("orders")
            orders = minus if orders is None else _vector(orders, species)
            specs.append(MassAction(_resolve(prop["rate"], params, "parameter"), tuple(orders)))
        elif kind == "hill":
            specs.append(
                HillProduction(
                    basal=_resolve(prop["basal"], params, "parameter"),
                    amplitude=_resolve(prop["amplitude"], params, "parameter"),
                    half_saturation=_resolve(prop["half_saturation"], params, "parameter"),
                    exponent=_resolve(prop["exponent"], params, "parameter"),
                    repressor=_resolve(prop["repressor"], species, "species"),
                )
            )
        elif kind == "constant":
            specs.append(Constant(_resolve(prop["rate"], params, "parameter")))
        else:
            raise ConfigurationError(f"unknown propensity kind {kind!r}")
    nu = np.array(columns, dtype=np.int64).T.reshape(len(species), len(columns))
    return ReactionNetwork(nu, tuple(specs), tuple(species), tuple(params), doc.get("name", "custom"))


def network_to_dict(net: ReactionNetwork) -> dict:
    """Inverse of :func:`network_from_dict` (net stoichiometry split by sign)."""
    reactions = []
    for j, spec in enumerate(net.propensities):
        col = net.nu[:, j]
        if isinstance(spec, MassAction):
            minus = list(spec.orders)
            prop = {"kind": "mass_action", "rate": net.parameters[spec.rate]}
        elif isinstance(spec, HillProduction):
            minus = [0] * net.d
            prop = {
                "kind": "hill",
                "basal": net.parameters[spec.basal],
                "amplitude": net.parameters[spec.amplitude],
                "half_saturation": net.parameters[spec.half_saturation],
                "exponent": net.parameters[spec.exponent],
                "repressor": net.species[spec.repressor],
            }
        else:
            minus = [0] * net.d
            prop = {"kind": "constant", "rate": net.parameters[spec.rate]}
        minus = [max(m, -int(c)) for m, c in zip(minus, col)]
        plus = [m + int(c) for m, c in zip(minus, col)]
        if isinstance(spec, MassAction) and list(spec.orders) != minus:
            prop["orders"] = list(spec.orders)
        reactions.append({"nu_minus": minus, "nu_plus": plus, "propensity": prop})
    return {
        "name": net.name,
        "species": list(net.species),
        "parameters": list(net.parameters),
        "reactions": reactions,
    }


def load_network(path) -> ReactionNetwork:
    with open(Path(path)) as fh:
        return network_from_dict(json.load(fh))
