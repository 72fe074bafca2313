"""Numerical laboratory for diffusive-scale fluctuations of a passive density
advected by a white-in-time Gaussian velocity field.

The package simulates the Ito transport-diffusion equation on a periodic
grid, checks that the ensemble mean follows the enhanced heat flow, measures
the n^{-d/2} decay of the fluctuations, and compares their law against the
limiting additive stochastic heat equation with effective variance V_eff^2.
"""

from .covariance import (
    COMPRESSIBLE,
    INCOMPRESSIBLE,
    CovarianceSpec,
    bump_cov_profile,
    q_hat,
    q_real,
    rescale,
    stationary_w_1d,
    stationary_w_torus,
    validate,
    veff_sq,
)
from .fluctuation import normality_test, qv_estimate, scaling_fit, x_n
from .grid import (
    ScalarField,
    TorusGrid,
    VectorField,
    bump_field,
    cos_mode,
    heat_propagate,
    l2_inner,
    sobolev_norm,
    transform,
)
from .harness import ExperimentConfig, parse_config, run_experiment, serialize_config
from .correlation import assemble_C2, heat_kernel_bound_check, mc_S2, solve_S2
from .lagrangian import ParticleEnsemble, quenched_functional, sample_initial_positions, step_particles
from .limit_she import LimitSpec, qv_limit, sample_u, var_u
from .noise import NoiseIncrement, empirical_cov, sample_increment
from .rng import ReplicaStreams, stream
from .spde import SolverState, initial_state, mean_heat, run, run_stationary, step

__version__ = "0.1.0"
