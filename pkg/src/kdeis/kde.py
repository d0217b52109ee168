"""Kernels, kernel density estimators and the deterministic KDE constants."""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import chi, norm

from .distributions import DensityModel, GaussianMixtureModel, GaussianModel
from .errors import (
    AssumptionViolationError,
    CapabilityError,
    InvalidInputError,
    InvalidParameterError,
    NumericalIntegrationError,
)
from .quadrature import adaptive_simpson, integrate_halfline

__all__ = [
    "Kernel",
    "gaussian_kernel",
    "KdeProposal",
    "build_kde",
    "kde_sample",
    "BANDWIDTH_REGIMES",
    "bandwidth_schedule",
    "SobolevNorms",
    "gaussian_sobolev_norms",
    "sobolev_norms_by_quadrature",
    "bias_bound",
    "smoothed_target",
    "sphere_area",
    "radial_moment",
    "kernel_moment_constant",
]

# entries of one (points x centers) block during KDE evaluation
_BLOCK = 1 << 20


@dataclass(frozen=True)
class Kernel:
    """Smoothing kernel ``K`` on R^d with its norms and radial envelope.

    ``log_eval`` maps scaled offsets ``u`` (shape ``(..., d)``, or ``(...)``
    when ``d == 1``) to ``log K(u)``; ``envelope`` is a non-increasing
    ``Psi`` on ``[0, inf)`` with ``K(u) <= Psi(|u|)``; ``tail_radius(eps)``
    bounds the ball outside of which ``K`` has mass below ``eps``.
    """

    dim: int
    name: str
    log_eval: Callable
    sampler: Callable
    l1_norm: float
    l2_norm_sq: float
    l4_norm_4: float
    m2: float
    envelope: Callable
    tail_radius: Callable

    def __call__(self, u):
        return np.exp(self.log_eval(u))

    def sample(self, rng, size):
        return self.sampler(rng, size)


def gaussian_kernel(d=1):
    """Standard normal kernel on R^d with closed-form constants."""
    if int(d) != d or d < 1:
        raise InvalidParameterError(f"d must be a positive integer, got {d!r}")
    d = int(d)
    log_norm = -0.5 * d * math.log(2.0 * math.pi)

    def log_eval(u):
        u = np.asarray(u, dtype=float)
        sq = u * u if d == 1 else np.sum(u * u, axis=-1)
        return log_norm - 0.5 * sq

    def sampler(rng, size):
        return rng.standard_normal(size if d == 1 else (size, d))

    def envelope(t):
        t = np.asarray(t, dtype=float)
        return np.exp(log_norm - 0.5 * t * t)

    def tail_radius(eps):
        # P(|u| > r) for u ~ N(0, I_d) is a chi tail
        return float(chi.isf(eps, d))

    return Kernel(
        dim=d,
        name="gaussian",
        log_eval=log_eval,
        sampler=sampler,
        l1_norm=1.0,
        l2_norm_sq=(4.0 * math.pi) ** (-0.5 * d),
        l4_norm_4=(2.0 * math.pi) ** (-2.0 * d) * (0.5 * math.pi) ** (0.5 * d),
        m2=float(d),
        envelope=envelope,
        tail_radius=tail_radius,
    )


class KdeProposal(DensityModel):
    """``q(x) = N^-1 sum_k h^-d K((Z_k - x) / h)``."""

    def __init__(self, centers, h, kernel):
        z = np.asarray(centers, dtype=float)
        d = kernel.dim
        if d == 1 and z.ndim == 2 and z.shape[1] == 1:
            z = z[:, 0]
        if z.size == 0:
            raise InvalidInputError("a KDE needs at least one center")
        if (d == 1 and z.ndim != 1) or (d > 1 and (z.ndim != 2 or z.shape[1] != d)):
            raise InvalidInputError(f"centers must have shape (N,) or (N, {d})")
        if not np.all(np.isfinite(z)):
            raise InvalidInputError("centers must be finite")
        if not (h > 0 and math.isfinite(h)):
            raise InvalidParameterError(f"bandwidth must be positive, got {h!r}")
        z = z.copy()
        z.setflags(write=False)
        self.centers = z
        self.h = float(h)
        self.kernel = kernel
        self.dim = d
        self.n_centers = len(z)
        self.label = f"kde(N={len(z)},h={h:.4g})"
        self._log_scale = -math.log(len(z)) - d * math.log(self.h)
        self._gaussian = kernel.name == "gaussian"
        self.resolution = self.h
        if d == 1:
            self.quad_center = float(np.mean(z))
            self.quad_scale = float(np.std(z)) + self.h

    def _blocks(self, x):
        step = max(1, _BLOCK // self.n_centers)
        for start in range(0, len(x), step):
            yield slice(start, start + step)

    def _flat(self, x):
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            return x.reshape(-1), x.shape
        return x.reshape(-1, self.dim), x.shape[:-1]

    def log_pdf(self, x):
        xs, shape = self._flat(x)
        out = np.empty(len(xs))
        for s in self._blocks(xs):
            u = (self.centers[None] - xs[s, None]) / self.h
            out[s] = logsumexp(self.kernel.log_eval(u), axis=1)
        return (out + self._log_scale).reshape(shape)

    def pdf(self, x):
        if not (self._gaussian and self.dim == 1):
            return np.exp(self.log_pdf(x))
        xs, shape = self._flat(x)
        out = np.empty(len(xs))
        inv_h = 1.0 / self.h
        for s in self._blocks(xs):
            u = np.subtract.outer(xs[s] * inv_h, self.centers * inv_h)
            np.square(u, out=u)
            u *= -0.5
            np.exp(u, out=u)
            out[s] = u.sum(axis=1)
        out *= math.exp(self._log_scale - 0.5 * math.log(2.0 * math.pi))
        # recompute points whose sum underflowed in log space
        tiny = out < 1e-290
        if tiny.any():
            out[tiny] = np.exp(self.log_pdf(xs[tiny]))
        return out.reshape(shape)

    def cdf(self, x):
        if not (self._gaussian and self.dim == 1):
            raise CapabilityError("closed-form CDF needs a 1-d Gaussian kernel")
        xs, shape = self._flat(x)
        out = np.empty(len(xs))
        for s in self._blocks(xs):
            out[s] = norm.cdf(np.subtract.outer(xs[s], self.centers) / self.h).mean(axis=1)
        return out.reshape(shape)

    def sample(self, rng, size):
        return kde_sample(self, rng, size)

    def support(self, eps=1e-10):
        if self.dim != 1:
            raise CapabilityError("support is defined for d == 1 only")
        r = self.h * self.kernel.tail_radius(eps)
        return float(self.centers.min() - r), float(self.centers.max() + r)


def build_kde(centers, h, kernel=None):
    """Kernel density estimator with bandwidth ``h`` (Gaussian kernel by default)."""
    if kernel is None:
        c = np.asarray(centers)
        kernel = gaussian_kernel(1 if c.ndim <= 1 else c.shape[1])
    return KdeProposal(centers, h, kernel)


def kde_sample(kde, rng, size=None):
    """Draw from ``kde``: a uniform center plus ``h`` times a kernel draw."""
    single = size is None
    m = 1 if single else int(size)
    k = rng.integers(kde.n_centers, size=m)
    x = kde.centers[k] + kde.h * kde.kernel.sample(rng, m)
    return x[0] if single else x


BANDWIDTH_REGIMES = ("iid_optimal", "nonstationary_optimal", "numerics_rule")


def _rate_exponent(regime, d):
    if regime == "iid_optimal":
        return 1.0 / (d + 4)
    if regime == "nonstationary_optimal":
        return 1.0 / (2 * d + 4)
    if regime == "numerics_rule":
        return 0.2
    raise InvalidParameterError(f"unknown bandwidth regime {regime!r}")


def bandwidth_schedule(regime, d, N, scale=None, sample=None):
    """Bandwidth ``scale * N^-e`` for the named regime.

    ``e`` is ``1/(d+4)``, ``1/(2d+4)`` or ``1/5``. Without ``scale`` the
    standard deviation (ddof 1, averaged over coordinates) of ``sample``
    is used. The result is floored at ``1e-8 * scale``.
    """
    e = _rate_exponent(regime, d)
    if N < 1:
        raise InvalidParameterError("N must be >= 1")
    if scale is None:
        if sample is None:
            raise InvalidParameterError("need either scale or sample")
        s = np.asarray(sample, dtype=float)
        if len(s) < 2:
            raise InvalidInputError("sample needs at least two points for a scale")
        scale = float(np.mean(np.std(s, axis=0, ddof=1)))
    if not (scale > 0 and math.isfinite(scale)):
        raise InvalidParameterError(f"scale must be positive, got {scale!r}")
    return max(scale * float(N) ** -e, 1e-8 * scale)


@dataclass(frozen=True)
class SobolevNorms:
    """Norms of the weak derivatives of ``p`` entering the bias constants.

    ``d1_l1`` sums ``||d_i p||_L1``, ``d2_l1`` sums ``||d_ij p||_L1`` and
    ``d2_l2`` sums ``||d_ij p||_L2`` (not squared).
    """

    d1_l1: float
    d2_l1: float
    d2_l2: float

    def __post_init__(self):
        for name in ("d1_l1", "d2_l1", "d2_l2"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise InvalidParameterError(f"{name} must be finite and nonnegative")


def gaussian_sobolev_norms(sigma=1.0):
    """Closed forms for ``N(mu, sigma^2)`` on the line."""
    phi0 = 1.0 / math.sqrt(2.0 * math.pi)
    return SobolevNorms(
        d1_l1=2.0 * phi0 / sigma,
        d2_l1=4.0 * phi0 * math.exp(-0.5) / sigma**2,
        d2_l2=math.sqrt(3.0 / (8.0 * math.sqrt(math.pi))) * sigma**-2.5,
    )


def sobolev_norms_by_quadrature(d1, d2, lo, hi, breakpoints=(), tol=1e-10):
    """Norms from analytic first and second derivatives on ``[lo, hi]``."""
    a1, _ = adaptive_simpson(lambda x: np.abs(d1(x)), lo, hi, tol, breakpoints)
    a2, _ = adaptive_simpson(lambda x: np.abs(d2(x)), lo, hi, tol, breakpoints)
    s2, _ = adaptive_simpson(lambda x: d2(x) ** 2, lo, hi, tol, breakpoints)
    return SobolevNorms(a1, a2, math.sqrt(s2))


def bias_bound(sobolev, kernel, h, order="L1"):
    """``C1 h^2`` (``L1``) or ``C2 h^4`` (``L2``, squared norm) bias bound.

    ``C1 = (m2 / 2) d2_l1`` and ``C2 = (m2^2 / 4) d2_l2^2``.
    """
    if h < 0:
        raise InvalidParameterError("h must be nonnegative")
    if order == "L1":
        return 0.5 * kernel.m2 * sobolev.d2_l1 * h**2
    if order == "L2":
        return 0.25 * kernel.m2**2 * sobolev.d2_l2**2 * h**4
    raise InvalidParameterError(f"order must be 'L1' or 'L2', got {order!r}")


def smoothed_target(p, h, kernel=None):
    """Exact ``E[K_h(x - Z)]`` for Gaussian(-mixture) ``p`` and Gaussian ``K``."""
    if kernel is not None and kernel.name != "gaussian":
        raise CapabilityError("closed-form smoothing needs a Gaussian kernel")
    if isinstance(p, GaussianModel):
        return GaussianModel(p.mu, math.hypot(p.sigma, h), p.dim)
    if isinstance(p, GaussianMixtureModel):
        return GaussianMixtureModel(p.weights, p.means, np.hypot(p.sigmas, h))
    raise CapabilityError(f"no closed-form smoothing for {p.label}")


def sphere_area(d):
    """Surface area ``2 pi^(d/2) / Gamma(d/2)`` of the unit sphere in R^d."""
    return math.exp(math.log(2.0) + 0.5 * d * math.log(math.pi) - gammaln(0.5 * d))


def radial_moment(envelope, r, d, name="envelope", tol=1e-10):
    """``|S^(d-1)| int_0^inf envelope(t)^r t^(d-1) dt``.

    Raises
    ------
    AssumptionViolationError
        If the radial integral diverges.
    """

    def g(t):
        return np.asarray(envelope(t), dtype=float) ** r * t ** (d - 1)

    try:
        value, _ = integrate_halfline(g, 1.0, tol)
    except NumericalIntegrationError as exc:
        raise AssumptionViolationError(
            f"radial moment of order {r} of {name} diverges", f"{name} r-moment"
        ) from exc
    return sphere_area(d) * value


def _check_non_increasing(envelope, name):
    t = np.concatenate([[0.0], np.geomspace(1e-6, 1e6, 2000)])
    v = np.asarray(envelope(t), dtype=float)
    if np.any(v < 0) or np.any(np.diff(v) > 1e-12 * np.maximum(np.abs(v[:-1]), 1e-300)):
        raise InvalidParameterError(f"{name} must be nonnegative and non-increasing")


def kernel_moment_constant(psi, phi, r, d=1):
    """``B_r = 2^d (psi(0)^r M_phi + M_psi)`` from radial envelopes.

    ``psi`` envelopes the kernel and ``phi`` envelopes ``V^(-1/2)``; the
    radial moments are ``M = |S^(d-1)| int_0^inf env(t)^r t^(d-1) dt``.
    """
    if r not in (1, 2, 4):
        raise InvalidParameterError(f"r must be 1, 2 or 4, got {r!r}")
    if int(d) != d or d < 1:
        raise InvalidParameterError("d must be a positive integer")
    _check_non_increasing(psi, "psi")
    _check_non_increasing(phi, "phi")
    m_phi = radial_moment(phi, r, d, "phi")
    m_psi = radial_moment(psi, r, d, "psi")
    psi0 = float(np.asarray(psi(np.array([0.0])))[0])
    return 2.0**d * (psi0**r * m_phi + m_psi)
