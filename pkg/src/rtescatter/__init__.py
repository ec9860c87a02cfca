"""Regularized Tyler estimation of scatter and its large-sample behaviour."""

from .clt import (
    CltMoments,
    clt_full_moments,
    clt_moments,
    clt_tilde_moments,
    commutation_matrix,
    covariance_bg,
    f_tilde,
    quadratic_form_variance,
    uncentered_bg,
    unvec,
    vec,
)
from .exceptions import (
    AccuracyError,
    DegenerateSampleError,
    DomainError,
    IllConditionedError,
    NonConvergenceError,
    NotPSDError,
)
from .experiments import (
    ExperimentConfig,
    ExperimentReport,
    MCEstimate,
    clt_ks_experiment,
    clt_statistics,
    empirical_bias,
    ks_normal,
    metric_regime,
    moments_check,
    run,
)
from .limit import AsymptoticLimit, asymptotic_bias, bias_functional, sigma_zero, solve_d
from .model import CovarianceModel, Dataset, hermitian_sqrt, make_model, sample_dataset, toeplitz_covariance
from .rte import RegularizedTylerEstimator, ScatterEstimate, gamma_n, s_hat, sigma_tilde, solve_rte, solve_rte_batch
from .special import RatioMoments, alpha, beta, lauricella_fd, ratio_moments

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "AsymptoticLimit",
    "CltMoments",
    "CovarianceModel",
    "Dataset",
    "DegenerateSampleError",
    "DomainError",
    "ExperimentConfig",
    "ExperimentReport",
    "IllConditionedError",
    "MCEstimate",
    "NonConvergenceError",
    "NotPSDError",
    "RatioMoments",
    "RegularizedTylerEstimator",
    "ScatterEstimate",
    "alpha",
    "asymptotic_bias",
    "beta",
    "bias_functional",
    "clt_full_moments",
    "clt_ks_experiment",
    "clt_moments",
    "clt_statistics",
    "clt_tilde_moments",
    "commutation_matrix",
    "covariance_bg",
    "empirical_bias",
    "f_tilde",
    "gamma_n",
    "hermitian_sqrt",
    "ks_normal",
    "lauricella_fd",
    "make_model",
    "metric_regime",
    "moments_check",
    "quadratic_form_variance",
    "ratio_moments",
    "run",
    "s_hat",
    "sample_dataset",
    "sigma_tilde",
    "sigma_zero",
    "solve_d",
    "solve_rte",
    "solve_rte_batch",
    "toeplitz_covariance",
    "uncentered_bg",
    "unvec",
    "vec",
]
