"""Splitting integrators and data-conditional ABC-SMC for chemical Langevin equations."""

from .crn import (
    CondCIRCoefficients,
    Constant,
    HillProduction,
    MassAction,
    ReactionNetwork,
    cle_diffusion_columns,
    cle_diffusion_matrix,
    cle_drift,
    cond_cir_coefficients,
    evaluate_propensities,
    load_network,
    network_from_dict,
    network_to_dict,
)
from .errors import ConfigurationError, DomainError, NotConditionallyCIR, SimulationDiverged
from .models import lotka_volterra, repressilator, two_pool

__version__ = "0.1.0"
