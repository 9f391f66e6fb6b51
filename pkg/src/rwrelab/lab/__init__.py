"""Experiment orchestration: configuration, runners, statistics, reports,
and the command-line interface."""

from .config import ExperimentConfig, load_config
from .experiments import (
    clt_experiment,
    coupling_experiment,
    estimate_model,
    intersection_experiment,
    quenched_mean_variance,
    synthetic_ballistic_variance,
)
from ..stats import FitResult, fit_loglog

__all__ = [
    "ExperimentConfig",
    "load_config",
    "FitResult",
    "fit_loglog",
    "clt_experiment",
    "coupling_experiment",
    "estimate_model",
    "intersection_experiment",
    "quenched_mean_variance",
    "synthetic_ballistic_variance",
]
