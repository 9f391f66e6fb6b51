"""Monte Carlo laboratory for ballistic random walks in i.i.d. random
environments on the integer lattice.

Subpackages and modules:
    env      environment models, lazy environments, hypothesis checks
    walk     quenched walk simulation and stopping times
    regen    regeneration detection, velocity/diffusion estimators
    pair     two-walk constructions, difference-chain samplers, coupling
    renewal  half-line Green functions, forward recurrence, chain experiments
    lab      experiment orchestration, statistics, reports, CLI
"""

__version__ = "0.1.0"

from .env import (
    Environment,
    EnvironmentModel,
    FiniteMixture,
    Homogeneous,
    HypothesisReport,
    StepDistribution,
    TwoPointMixture,
    benchmark_a,
    check_hypotheses,
    deterministic_e1,
    drift,
    e1e2_half_half,
    exp_moment,
    load_model,
    micro_model,
)
from .walk import Path, RngStream, simulate
from .regen import detect_regenerations, estimate_diffusion, estimate_velocity, slabs, tail_fit
from .pair import (
    PairPath,
    common_regenerations,
    coupled_sample,
    first_common_level,
    intersections,
    simulate_pair,
    y_chain_sample,
    ybar_sample,
)
from .renewal import OneDimWalk, forward_recurrence, halfline_green

__all__ = [
    "__version__",
    "Environment",
    "EnvironmentModel",
    "FiniteMixture",
    "Homogeneous",
    "HypothesisReport",
    "StepDistribution",
    "TwoPointMixture",
    "benchmark_a",
    "check_hypotheses",
    "deterministic_e1",
    "drift",
    "e1e2_half_half",
    "exp_moment",
    "load_model",
    "micro_model",
    "Path",
    "RngStream",
    "simulate",
    "detect_regenerations",
    "estimate_diffusion",
    "estimate_velocity",
    "slabs",
    "tail_fit",
    "PairPath",
    "common_regenerations",
    "coupled_sample",
    "first_common_level",
    "intersections",
    "simulate_pair",
    "y_chain_sample",
    "ybar_sample",
    "OneDimWalk",
    "forward_recurrence",
    "halfline_green",
]
