"""Robust multivariate estimation through reweighted Gaussian quasi-likelihood.

The package fits parametric mean/covariance models to reweighted sample
moments of complex-valued data, provides sandwich asymptotics with empirical
MSE estimation and influence-function robustness analysis, data-driven weight
selection, two worked applications (complex linear regression and ULA source
localization), robust baselines, and a Monte Carlo experiment harness.
"""

from .asymptotics import (
    SandwichMatrices,
    SelectionResult,
    fisher_information,
    gamma_u,
    influence,
    log_phi_u,
    psi_u,
    psi_u_batch,
    sandwich,
    score_identity_check,
    select_mt_parameter,
)
from .core import (
    log_det_divergence,
    sample_covariance,
    sample_mean,
    weighted_norm_sq,
)
from .estimator import (
    EstimationResult,
    ParameterSpace,
    ParametricMomentModel,
    check_identifiability,
    estimate_gqmle,
    estimate_mt_gqmle,
    finite_diff_moment_derivatives,
    objective_j_u,
)
from .exceptions import DegenerateWeights, NotPositiveDefinite, SingularMatrix
from .transform import (
    EmpiricalMTMoments,
    MTFunction,
    check_mt_condition,
    constant_mt_function,
    empirical_mt_cov,
    empirical_mt_mean,
    empirical_mt_moments,
    gaussian_mt_function,
    mt_weights,
)

__all__ = [
    "DegenerateWeights",
    "EmpiricalMTMoments",
    "EstimationResult",
    "MTFunction",
    "NotPositiveDefinite",
    "ParameterSpace",
    "ParametricMomentModel",
    "SandwichMatrices",
    "SelectionResult",
    "SingularMatrix",
    "check_identifiability",
    "check_mt_condition",
    "constant_mt_function",
    "empirical_mt_cov",
    "empirical_mt_mean",
    "empirical_mt_moments",
    "estimate_gqmle",
    "estimate_mt_gqmle",
    "finite_diff_moment_derivatives",
    "fisher_information",
    "gamma_u",
    "gaussian_mt_function",
    "influence",
    "log_det_divergence",
    "log_phi_u",
    "mt_weights",
    "objective_j_u",
    "psi_u",
    "psi_u_batch",
    "sample_covariance",
    "sample_mean",
    "sandwich",
    "score_identity_check",
    "select_mt_parameter",
    "weighted_norm_sq",
]

__version__ = "0.1.0"
