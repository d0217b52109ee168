"""Concrete target and defense densities behind one interface.

Every model evaluates ``pdf``/``log_pdf`` on arrays (shape ``(m,)`` for
``d == 1``, ``(m, d)`` otherwise), samples from a caller-supplied
``numpy.random.Generator`` and knows how to integrate against itself.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

from .errors import CapabilityError, InvalidParameterError
from .quadrature import adaptive_simpson, integrate_line

__all__ = [
    "AnalyticMoments",
    "DensityModel",
    "LaplaceModel",
    "GaussianModel",
    "CauchyModel",
    "GaussianMixtureModel",
    "ScaledModel",
    "laplace_model",
    "gaussian_model",
    "cauchy_model",
    "gaussian_mixture_model",
    "bimodal_lowerbound_model",
    "exact_integral",
]

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class AnalyticMoments:
    mean: float
    variance: float
    fourth_central_moment: float | None = None

    def __post_init__(self):
        if self.variance < 0:
            raise InvalidParameterError("variance must be nonnegative")
        fourth = self.fourth_central_moment
        if fourth is not None and fourth < self.variance**2 * (1 - 1e-12):
            raise InvalidParameterError("fourth central moment below variance^2")


class DensityModel:
    """Base class for densities on R^d.

    Subclasses implement :meth:`log_pdf`, and usually :meth:`sample` and
    :meth:`support`. ``normalizing_constant`` is the true ``c`` in
    ``p_tilde = c * p``; estimators must never read it.
    """

    dim = 1
    normalized = True
    normalizing_constant = 1.0
    moments = None
    label = "density"
    # kinks of the pdf, placed on quadrature panel boundaries
    breakpoints = ()
    # heavy-tailed models are integrated by tan-substitution
    heavy_tailed = False
    quad_center = 0.0
    quad_scale = 1.0
    # smallest feature width, sets quadrature grid spacing
    resolution = 1.0

    def log_pdf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        return np.exp(self.log_pdf(x))

    @property
    def has_sampler(self):
        return type(self).sample is not DensityModel.sample

    def sample(self, rng, size):
        raise CapabilityError(f"{self.label} has no sampler")

    def support(self, eps=1e-10):
        """Interval ``(lo, hi)`` carrying all but ``eps`` of the mass."""
        raise CapabilityError(f"{self.label} has no truncation rule")

    @property
    def mean(self):
        if self.moments is None:
            raise CapabilityError(f"{self.label} has no finite mean")
        return self.moments.mean

    @property
    def variance(self):
        if self.moments is None:
            raise CapabilityError(f"{self.label} has no finite variance")
        return self.moments.variance

    def scaled(self, c):
        """Unnormalized version ``c * p`` of this (normalized) model."""
        return ScaledModel(self, c)

    def __repr__(self):
        return f"<{type(self).__name__} {self.label}>"


def _check_positive(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise InvalidParameterError(f"{name} must be a positive finite real, got {value!r}")


class LaplaceModel(DensityModel):
    def __init__(self, mu, b):
        _check_positive("b", b)
        self.mu = float(mu)
        self.b = float(b)
        self.label = f"laplace({mu:g},{b:g})"
        self.moments = AnalyticMoments(self.mu, 2.0 * self.b**2, 24.0 * self.b**4)
        self.breakpoints = (self.mu,)
        self.quad_center = self.mu
        self.quad_scale = self.b
        self.resolution = self.b

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        return -np.abs(x - self.mu) / self.b - math.log(2.0 * self.b)

    def cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.b
        return np.where(z < 0, 0.5 * np.exp(np.minimum(z, 0)), 1 - 0.5 * np.exp(-np.maximum(z, 0)))

    def sample(self, rng, size):
        u = rng.random(size) - 0.5
        return self.mu - self.b * np.sign(u) * np.log1p(-2.0 * np.abs(u))

    def support(self, eps=1e-10):
        r = self.b * math.log(1.0 / eps)
        return self.mu - r, self.mu + r


class GaussianModel(DensityModel):
    """Isotropic Gaussian ``N(mu, sigma^2 I_d)``."""

    def __init__(self, mu, sigma, dim=1):
        _check_positive("sigma", sigma)
        if dim < 1:
            raise InvalidParameterError("dim must be >= 1")
        self.dim = int(dim)
        self.mu = float(mu)
        self.sigma = float(sigma)
        self.label = f"gaussian({mu:g},{sigma:g})" if dim == 1 else f"gaussian{dim}d({mu:g},{sigma:g})"
        self.moments = AnalyticMoments(self.mu, self.sigma**2, 3.0 * self.sigma**4)
        self.quad_center = self.mu
        self.quad_scale = self.sigma
        self.resolution = self.sigma

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        z2 = ((x - self.mu) / self.sigma) ** 2
        if self.dim > 1:
            z2 = z2.sum(axis=-1)
        return -0.5 * z2 - self.dim * (math.log(self.sigma) + 0.5 * LOG_2PI)

    def cdf(self, x):
        return norm.cdf(x, self.mu, self.sigma)

    def sample(self, rng, size):
        shape = (size,) if self.dim == 1 else (size, self.dim)
        return self.mu + self.sigma * rng.standard_normal(shape)

    def support(self, eps=1e-10):
        r = self.sigma * norm.isf(eps / 2.0)
        return self.mu - r, self.mu + r


class CauchyModel(DensityModel):
    heavy_tailed = True

    def __init__(self, s, loc=0.0):
        _check_positive("s", s)
        self.s = float(s)
        self.loc = float(loc)
        self.label = f"cauchy({s:g})" if loc == 0 else f"cauchy({s:g},{loc:g})"
        self.quad_center = self.loc
        self.quad_scale = self.s
        self.resolution = self.s

    def log_pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.loc) / self.s
        return -np.log1p(z * z) - math.log(math.pi * self.s)

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.loc) / self.s
        return 1.0 / (math.pi * self.s * (1.0 + z * z))

    def cdf(self, x):
        return 0.5 + np.arctan((np.asarray(x, dtype=float) - self.loc) / self.s) / math.pi

    def sample(self, rng, size):
        return self.loc + self.s * np.tan(math.pi * (rng.random(size) - 0.5))

    def support(self, eps=1e-10):
        r = self.s * math.tan(0.5 * math.pi * (1.0 - eps))
        return self.loc - r, self.loc + r


class GaussianMixtureModel(DensityModel):
    """One-dimensional Gaussian mixture with recorded component labels."""

    def __init__(self, weights, means, sigmas, label=None):
        w = np.asarray(weights, dtype=float)
        m = np.asarray(means, dtype=float)
        s = np.asarray(sigmas, dtype=float)
        if not (w.shape == m.shape == s.shape) or w.ndim != 1 or w.size == 0:
            raise InvalidParameterError("weights, means and sigmas must be equal-length vectors")
        if np.any(w < 0) or not math.isclose(w.sum(), 1.0, rel_tol=1e-12):
            raise InvalidParameterError("mixture weights must be nonnegative and sum to 1")
        if np.any(s <= 0):
            raise InvalidParameterError("component sigmas must be positive")
        self.weights, self.means, self.sigmas = w, m, s
        self.label = label or "gmm" + str(len(w))
        mean = float(w @ m)
        var = float(w @ (s**2 + m**2)) - mean**2
        dm = m - mean
        fourth = float(w @ (3 * s**4 + 6 * s**2 * dm**2 + dm**4))
        self.moments = AnalyticMoments(mean, var, fourth)
        self.quad_center = mean
        self.quad_scale = math.sqrt(var)
        self.resolution = float(s.min())

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x[..., None] - self.means) / self.sigmas
        comp = -0.5 * z * z - np.log(self.sigmas) - 0.5 * LOG_2PI
        return logsumexp(comp, axis=-1, b=self.weights)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return norm.cdf((x[..., None] - self.means) / self.sigmas) @ self.weights

    def sample_with_components(self, rng, size):
        """Draw ``(points, component_index)``."""
        comp = rng.choice(len(self.weights), size=size, p=self.weights)
        x = self.means[comp] + self.sigmas[comp] * rng.standard_normal(size)
        return x, comp

    def sample(self, rng, size):
        return self.sample_with_components(rng, size)[0]

    def support(self, eps=1e-10):
        r = norm.isf(eps / 2.0)
        return float(np.min(self.means - r * self.sigmas)), float(np.max(self.means + r * self.sigmas))


class ScaledModel(DensityModel):
    """Unnormalized density ``c * base``; ``c`` is kept for test oracles."""

    def __init__(self, base, c):
        _check_positive("c", c)
        self.base = base
        self.normalized = False
        self.normalizing_constant = float(c)
        self._log_c = math.log(c)
        self.dim = base.dim
        self.moments = base.moments
        self.label = f"{c:g}*{base.label}"
        self.breakpoints = base.breakpoints
        self.heavy_tailed = base.heavy_tailed
        self.quad_center = base.quad_center
        self.quad_scale = base.quad_scale
        self.resolution = base.resolution

    def log_pdf(self, x):
        return self._log_c + self.base.log_pdf(x)

    def pdf(self, x):
        return self.normalizing_constant * self.base.pdf(x)

    @property
    def has_sampler(self):
        return self.base.has_sampler

    def sample(self, rng, size):
        return self.base.sample(rng, size)

    def support(self, eps=1e-10):
        return self.base.support(eps)

    def cdf(self, x):
        return self.base.cdf(x)


def laplace_model(mu, b):
    """Laplace density ``exp(-|x - mu| / b) / (2 b)``."""
    return LaplaceModel(mu, b)


def gaussian_model(mu=0.0, sigma=1.0, dim=1):
    return GaussianModel(mu, sigma, dim)


def cauchy_model(s, loc=0.0):
    """Cauchy density ``s / (pi (s^2 + x^2))`` (shifted by ``loc``)."""
    return CauchyModel(s, loc)


def gaussian_mixture_model(weights, means, sigmas, label=None):
    return GaussianMixtureModel(weights, means, sigmas, label)


def bimodal_lowerbound_model(n):
    """Equal mixture of ``N(-1, s^2)`` and ``N(3, s^2)``, ``s = (4 log(n+1))^(-1/2)``.

    The mean is 1 for every ``n`` while the modes separate ever more
    sharply, which is what defeats a KDE built from few samples.
    """
    if int(n) != n or n < 1:
        raise InvalidParameterError(f"n must be a positive integer, got {n!r}")
    sigma = (4.0 * math.log(n + 1.0)) ** -0.5
    return GaussianMixtureModel([0.5, 0.5], [-1.0, 3.0], [sigma, sigma],
                                label=f"bimodal(n={int(n)})")


def exact_integral(model, f, tol=1e-12, eps=1e-18):
    """Deterministic quadrature of ``integral f(x) p(x) dx`` for ``d == 1``.

    Light-tailed models are integrated on their ``1 - eps`` mass interval
    with kinks on panel boundaries; heavy-tailed ones under a
    tan-substitution over the whole line.

    Raises
    ------
    NumericalIntegrationError
        When the quadrature does not converge, e.g. ``f`` grows too fast
        for a heavy-tailed model.
    """
    if model.dim != 1:
        raise InvalidParameterError("exact_integral supports d == 1 only")

    def integrand(x):
        px = model.pdf(x)
        fx = np.broadcast_to(np.asarray(f(x), dtype=float), px.shape)
        # f * p with p == 0 contributes nothing even if f overflows
        return np.where(px == 0.0, 0.0, fx * px)

    if model.heavy_tailed:
        value, _ = integrate_line(integrand, model.quad_center, model.quad_scale,
                                  model.breakpoints, tol)
    else:
        lo, hi = model.support(eps)
        value, _ = adaptive_simpson(integrand, lo, hi, tol, model.breakpoints)
    return value
