"""Simulation and statistical verification of semi-Markov modulated perpetuities."""

from .distributions import (
    SojournLaw,
    StableParams,
    TailSpec,
    brownian_max_pair_sample,
    equilibrium_sample,
    sojourn_sample,
    stable_sample,
    stable_tail_constant,
    sup_stable_path_sample,
    survival,
)
from .perpetuity import (
    CycleQuantities,
    SignedLogFunctional,
    StateFns,
    accumulate,
    compute_phi_i,
    cycle_integral_variance,
    cycle_quantities,
    g_fun,
)
from .semimarkov import (
    CycleIndex,
    SemiMarkovModel,
    Trajectory,
    cycle_index,
    limiting_pi,
    mean_cycle_length,
    pi_star_sample,
    residual_times,
    simulate,
    stationary_embedded,
    validate,
)

__all__ = [
    "SojournLaw",
    "StableParams",
    "TailSpec",
    "SemiMarkovModel",
    "Trajectory",
    "CycleIndex",
    "CycleQuantities",
    "SignedLogFunctional",
    "StateFns",
    "accumulate",
    "brownian_max_pair_sample",
    "compute_phi_i",
    "cycle_index",
    "cycle_integral_variance",
    "cycle_quantities",
    "equilibrium_sample",
    "g_fun",
    "limiting_pi",
    "mean_cycle_length",
    "pi_star_sample",
    "residual_times",
    "simulate",
    "sojourn_sample",
    "stable_sample",
    "stable_tail_constant",
    "stationary_embedded",
    "sup_stable_path_sample",
    "survival",
    "validate",
]

__version__ = "0.1.0"
