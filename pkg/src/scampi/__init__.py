"""Beamspace channel estimation for 3D lens antenna arrays.

Estimates the channel vector of an M x N lens array from Q < MN compressed
phase-shifter measurements by running approximate message passing on the
cosparse (neighbor-difference) analysis model, with optional EM learning of
a Bernoulli-Gaussian channel prior and Bethe noise-variance learning.
Support-detection, least-squares, and OMP baselines plus a Monte-Carlo
benchmark harness are included.
"""

from .backend import ACTIVE_BACKEND
from .lens_channel import (LensConfig, PathParams, MultipathChannel,
                           array_response, build_response_matrix,
                           sample_channel, grid_angles, uniform_angles,
                           vectorize, devectorize, default_grid_size)
from .selection import (SelectionNetwork, Measurement,
                        build_hadamard_selection, reduce_phase_shifters,
                        measure, from_descriptor)
from .augment import (DifferenceOperator, AugmentedSystem,
                      build_difference_operator, augment)
from .estimators import (SnipePrior, SparseGaussianPrior, PosteriorMoments,
                         snipe_moments, uniform_moments,
                         bernoulli_gaussian_moments,
                         em_posterior_quantities, em_update)
from .core import (ScampiOptions, ScampiState, EstimationReport, SweepError,
                   init_state, scampi_iterate, run_scampi, run_em_scampi,
                   bethe_noise_update, sweep_omega)
from .baselines import SupportSet, sd_estimate, ls_estimate, omp_estimate
from .bench import (ExperimentConfig, AlgorithmSpec, ResultTable, ResultRow,
                    compute_nmse, run_experiment, load_config, bundled_config,
                    make_algorithm)

__version__ = "0.1.0"

__all__ = [
    "ACTIVE_BACKEND", "__version__",
    "LensConfig", "PathParams", "MultipathChannel", "array_response",
    "build_response_matrix", "sample_channel", "grid_angles",
    "uniform_angles", "vectorize", "devectorize", "default_grid_size",
    "SelectionNetwork", "Measurement", "build_hadamard_selection",
    "reduce_phase_shifters", "measure", "from_descriptor",
    "DifferenceOperator", "AugmentedSystem", "build_difference_operator",
    "augment",
    "SnipePrior", "SparseGaussianPrior", "PosteriorMoments", "snipe_moments",
    "uniform_moments", "bernoulli_gaussian_moments",
    "em_posterior_quantities", "em_update",
    "ScampiOptions", "ScampiState", "EstimationReport", "SweepError",
    "init_state", "scampi_iterate", "run_scampi", "run_em_scampi",
    "bethe_noise_update", "sweep_omega",
    "SupportSet", "sd_estimate", "ls_estimate", "omp_estimate",
    "ExperimentConfig", "AlgorithmSpec", "ResultTable", "ResultRow",
    "compute_nmse", "run_experiment", "load_config", "bundled_config",
    "make_algorithm",
]
