"""Likelihood-free inference: ABC-SMC with forward-only or data-conditional simulation."""

from .dc import (
    DCConfig,
    DCSample,
    SyntheticLikelihoodStats,
    categorical_assemble,
    data_conditional_sample,
    synthetic_likelihood_stats,
)
from .kernels import (
    ParticleCloud,
    dc_particle_weight,
    effective_sample_size,
    epsilon_update,
    perturb,
    perturbation_cov,
    smc_particle_weight,
    weighted_covariance,
)
from .prior import PriorSpec
from .problem import InferenceProblem
from .smc import SMCResult, SMCSettings, read_cloud_csv, run_abc_smc, run_abc_smc_dc
