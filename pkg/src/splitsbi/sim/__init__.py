"""Integrators, exact reference samplers and path simulation."""

from .exact import CIRParams, cir_exact_sample, gillespie_ssa, ssa_state_at
from .flows import (
    bernoulli_flow,
    brownian_flow,
    cir_component_step,
    cir_splitting_sample,
    perturbation_flow,
)
from .grid import TimeGrid, Trajectory, read_states_csv, write_states_csv
from .integrate import Ensemble, integrate, simulate_ensemble, simulate_path, stream
from .schemes import (
    EUM_ABS,
    EUM_TRUNCATE,
    ODE_CONDLINEAR,
    RK4,
    SCHEME_KINDS,
    SPLIT_GENERIC,
    SPLIT_LV_LIETROTTER,
    SPLIT_LV_STRANG,
    SPLIT_REPRESSILATOR,
    SPLIT_TWOPOOL,
    Scheme,
    SchemeConfig,
    cond_linear_ode_step,
    default_splitting_kind,
    eum_step,
    generic_splitting_step,
    lv_lietrotter_step,
    lv_strang_step,
    repressilator_strang_step,
    rk4_step,
    twopool_lietrotter_step,
)
