"""Exception hierarchy shared across the package."""

import numpy as np


class KdeisError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(KdeisError, ValueError):
    """A scalar parameter is outside its admissible range."""


class InvalidInputError(KdeisError, ValueError):
    """A data argument (sample, grid, point list) is malformed."""


class CapabilityError(KdeisError):
    """The object lacks a capability the caller needs (e.g. a sampler)."""


class NumericalIntegrationError(KdeisError, ArithmeticError):
    """Adaptive quadrature failed to reach its tolerance."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual {residual:.3g})")
        self.residual = residual


class CoverageError(KdeisError):
    """A quadrature grid misses more probability mass than allowed."""

    def __init__(self, message, residual_mass):
        super().__init__(f"{message} (residual mass {residual_mass:.3g})")
        self.residual_mass = residual_mass


class DivisionHazardError(KdeisError, ArithmeticError):
    """Proposal density vanishes (or is too small) where a weight is needed."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = None if x is None else np.asarray(x)


class WeightOverflowError(DivisionHazardError):
    """An importance weight exceeds the representable range."""


class DegenerateSampleError(KdeisError):
    """All importance weights are zero."""


class MisuseError(KdeisError):
    """The estimator is not applicable to the given inputs."""


class TargetEvaluationError(KdeisError):
    """A target density returned NaN or a negative value."""


class ZeroVarianceError(KdeisError, ValueError):
    """A statistic needs a sequence with positive variance."""


class AssumptionViolationError(KdeisError):
    """A theoretical integrability or moment condition fails numerically."""

    def __init__(self, message, condition):
        super().__init__(f"{message} [{condition}]")
        self.condition = condition


class InfeasibleClippingError(InvalidParameterError):
    """Clipping level tau is not strictly between 0 and c."""


class DomainError(InvalidParameterError):
    """Argument outside the domain on which a bound is stated."""


class ConfigError(KdeisError, ValueError):
    """Invalid experiment configuration."""
