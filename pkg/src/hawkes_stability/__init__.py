"""Simulation and stability analysis for nonlinear Hawkes processes.

The state of the process is its impulse function; events are drawn from a
canonical planar Poisson field, so trajectories driven by the same noise are
coupled.  Submodules cover kernels, intensities, samplers, couplings, bounds
on the speed of convergence, and multi-type models.
"""

from .errors import (AttributionError, ConfigError, DomainError, EnvelopeViolation, ExplosionError,
                     HawkesError, PreconditionError)
from .kernels import Kernel
from .intensity import IntensityFn, Modulator, Modulus, check_hyp1, check_hyp2, check_hyp4
from .noise import CanonicalNoise
from .state import EventStream, ImpulseState, PreHistory, SumInitial, discrepancy_after, metric_dX
from .samplers import SimConfig, attribute_parents, simulate_cluster, simulate_thinning
from .coupling import couple, overlap_estimate, recurrence_run, verify_domination
from .analysis import dominating_tree_mc, mean_field_check, solve_lambda_theta, tv_bound, tv_bound_for
from .multitype import MultiTypeModel, TypedIntensity, simulate_multitype, spectral_radius, stability_matrix
from .config import ExperimentConfig, load_config

__version__ = "0.1.0"

__all__ = [
    "AttributionError", "ConfigError", "DomainError", "EnvelopeViolation", "ExplosionError", "HawkesError",
    "PreconditionError", "Kernel", "IntensityFn", "Modulator", "Modulus", "check_hyp1", "check_hyp2",
    "check_hyp4", "CanonicalNoise", "EventStream", "ImpulseState", "PreHistory", "SumInitial",
    "discrepancy_after", "metric_dX", "SimConfig", "attribute_parents", "simulate_cluster",
    "simulate_thinning", "couple", "overlap_estimate", "recurrence_run", "verify_domination",
    "dominating_tree_mc", "mean_field_check", "solve_lambda_theta", "tv_bound", "tv_bound_for",
    "MultiTypeModel", "TypedIntensity", "simulate_multitype", "spectral_radius", "stability_matrix",
    "ExperimentConfig", "load_config",
]
