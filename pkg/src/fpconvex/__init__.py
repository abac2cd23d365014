"""Semidiscrete Fokker-Planck gradient flows and displacement convexity of their entropies."""

from . import convexity, counterexample, flow, geodesics, markov, means
from .convexity import (
    Certificate,
    ConvexityReport,
    assemble_fp_tilde_m,
    assemble_heat_tilde_m,
    certify,
    lambda_h,
    second_derivative_formula,
)
from .errors import (
    AssemblyError,
    ConfigurationError,
    DegenerateMeanError,
    DomainError,
    FPConvexError,
    GeodesicError,
    IntegrationError,
    ScopeError,
)
from .flow import FlowSystem, Nonlinearity, fokker_planck_system, heat_system
from .geodesics import distance, shoot, verify_displacement_convexity
from .markov import Grid, Potential, build_grid, build_rate_matrix, build_weights
from .means import em_mean, f_mean, log_mean, mean_partials, power_mean

__version__ = "0.1.0"
