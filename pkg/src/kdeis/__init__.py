"""Importance sampling with kernel density proposals and defensive mixtures."""

__version__ = "0.1.0"

from .analysis import (  # noqa: E402
    defensive_bounds,
    defensive_variance_terms,
    integrated_error,
    integrated_errors,
    kl_tv_relations,
    mise_miae_estimate,
    random_proposal_error_bound,
    rate_fit,
)
from .distributions import (  # noqa: E402
    bimodal_lowerbound_model,
    cauchy_model,
    exact_integral,
    gaussian_mixture_model,
    gaussian_model,
    laplace_model,
)
from .errors import (  # noqa: E402
    KdeisError,
    InvalidParameterError,
    InvalidInputError,
    CapabilityError,
    NumericalIntegrationError,
    CoverageError,
    DivisionHazardError,
    WeightOverflowError,
    DegenerateSampleError,
    MisuseError,
    TargetEvaluationError,
    ZeroVarianceError,
    AssumptionViolationError,
    InfeasibleClippingError,
    DomainError,
    ConfigError,
)
from .estimators import clipped_snis_estimate, is_estimate, snis_estimate  # noqa: E402
from .kde import bandwidth_schedule, build_kde, gaussian_kernel, kde_sample  # noqa: E402
from .mcmc import ChainConfig, rwm_chain, rwm_chains  # noqa: E402
from .proposals import delta_schedule, importance_weights, make_defensive  # noqa: E402

__all__ = [
    "bandwidth_schedule", "bimodal_lowerbound_model", "build_kde", "cauchy_model",
    "ChainConfig", "clipped_snis_estimate", "defensive_bounds", "defensive_variance_terms",
    "delta_schedule", "exact_integral", "gaussian_kernel", "gaussian_mixture_model",
    "gaussian_model", "importance_weights", "integrated_error", "integrated_errors",
    "is_estimate", "kde_sample", "kl_tv_relations", "laplace_model", "make_defensive",
    "mise_miae_estimate", "random_proposal_error_bound", "rate_fit", "rwm_chain",
    "rwm_chains", "snis_estimate",
    "KdeisError",
    "InvalidParameterError",
    "InvalidInputError",
    "CapabilityError",
    "NumericalIntegrationError",
    "CoverageError",
    "DivisionHazardError",
    "WeightOverflowError",
    "DegenerateSampleError",
    "MisuseError",
    "TargetEvaluationError",
    "ZeroVarianceError",
    "AssumptionViolationError",
    "InfeasibleClippingError",
    "DomainError",
    "ConfigError",
]
