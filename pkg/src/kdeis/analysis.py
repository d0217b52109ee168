"""Error measurement, bound evaluation and rate fitting."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import beta as beta_fn
from scipy.special import logsumexp

from .distributions import bimodal_lowerbound_model, exact_integral
from .errors import (
    AssumptionViolationError,
    CapabilityError,
    CoverageError,
    DomainError,
    InfeasibleClippingError,
    InvalidInputError,
    InvalidParameterError,
    NumericalIntegrationError,
)
from .kde import radial_moment, smoothed_target, sphere_area
from .quadrature import Grid, integrate_line
from .seeding import parallel_map, replicate_rng

__all__ = [
    "covering_grid",
    "integrated_error",
    "integrated_errors",
    "ErrorEstimate",
    "mise_miae_estimate",
    "integrated_bias",
    "l2_norm",
    "DefensiveVarianceTerms",
    "defensive_variance_terms",
    "random_proposal_error_bound",
    "random_proposal_optimal_v",
    "BoundInputs",
    "DefensiveBounds",
    "defensive_bounds",
    "proposal_l4_norm",
    "KlTvReport",
    "kl_tv_relations",
    "kernel_weighted_moment",
    "stationary_l1_constant",
    "NonstationaryBound",
    "nonstationary_bound",
    "RateFit",
    "rate_fit",
    "LowerBoundResult",
    "lowerbound_demo",
    "binomial_acceptance_interval",
    "mean_upper_ci",
    "variance_upper_ci",
]

COVERAGE = 1e-8
_MAX_GRID = 200_001


def covering_grid(*models, eps=1e-10, per_resolution=20, max_points=_MAX_GRID):
    """Uniform grid spanning every model's ``1 - eps`` mass interval.

    The spacing is ``1 / per_resolution`` of the finest model feature.
    """
    intervals = [m.support(eps) for m in models]
    spacing = min(m.resolution for m in models) / per_resolution
    lo = min(i[0] for i in intervals)
    hi = max(i[1] for i in intervals)
    num = min(int(math.ceil((hi - lo) / spacing)) + 1, max_points)
    return Grid(lo, hi, max(num, 201))


def _mass_outside(model, grid, values):
    try:
        inside = float(model.cdf(np.array([grid.hi]))[0] - model.cdf(np.array([grid.lo]))[0])
    except (AttributeError, CapabilityError):
        inside = float(grid.integrate(values))
    return abs(1.0 - inside)


def _evaluate_pair(qhat, p, grid, coverage):
    if p.dim != 1 or qhat.dim != 1:
        raise InvalidParameterError("integrated errors are computed for d == 1")
    if grid is None:
        grid = covering_grid(p, qhat)
    x = grid.points
    pv = np.asarray(p.pdf(x), dtype=float)
    qv = np.asarray(qhat.pdf(x), dtype=float)
    for model, v in ((p, pv), (qhat, qv)):
        miss = _mass_outside(model, grid, v)
        if miss > coverage:
            raise CoverageError(f"grid misses mass of {model.label}", miss)
    return grid, pv, qv


def integrated_errors(qhat, p, grid=None, coverage=COVERAGE):
    """``(int |q - p|, int (q - p)^2)`` on one grid evaluation."""
    grid, pv, qv = _evaluate_pair(qhat, p, grid, coverage)
    diff = qv - pv
    return float(grid.integrate(np.abs(diff))), float(grid.integrate(diff * diff))


def integrated_error(qhat, p, norm="L1", grid=None, coverage=COVERAGE):
    """Single-realisation ``int |q - p|`` (``L1``) or ``int (q - p)^2`` (``L2``).

    Simpson quadrature on ``grid`` (default: :func:`covering_grid`).

    Raises
    ------
    CoverageError
        If the grid misses more than ``coverage`` of either mass.
    """
    if norm not in ("L1", "L2"):
        raise InvalidParameterError(f"norm must be 'L1' or 'L2', got {norm!r}")
    iae, ise = integrated_errors(qhat, p, grid, coverage)
    return iae if norm == "L1" else ise


@dataclass(frozen=True)
class ErrorEstimate:
    mean: float
    se: float
    values: np.ndarray

    @classmethod
    def from_values(cls, values):
        v = np.asarray(values, dtype=float)
        se = float(np.std(v, ddof=1) / math.sqrt(len(v))) if len(v) > 1 else math.nan
        return cls(math.fsum(v) / len(v), se, v)


def mise_miae_estimate(generator, R, p, norm="L2", grid=None, master_seed=0,
                       threads=1, stream="kde-error"):
    """Mean and standard error of integrated errors over ``R`` proposals.

    ``generator(rng)`` builds one proposal from a numpy Generator; the
    ``r``-th replicate receives ``replicate_rng(master_seed, stream, r)``.
    With ``norm="both"`` a dict keyed by ``"L1"`` and ``"L2"`` is returned.
    """
    if int(R) != R or R < 2:
        raise InvalidParameterError("R must be an integer >= 2")
    if norm not in ("L1", "L2", "both"):
        raise InvalidParameterError(f"unknown norm {norm!r}")

    def one(r):
        return integrated_errors(generator(replicate_rng(master_seed, stream, r)), p, grid)

    values = np.array(parallel_map(one, range(int(R)), threads))
    l1 = ErrorEstimate.from_values(values[:, 0])
    l2 = ErrorEstimate.from_values(values[:, 1])
    if norm == "both":
        return {"L1": l1, "L2": l2}
    return l1 if norm == "L1" else l2


def integrated_bias(p, h, norm="L1", kernel=None, grid=None):
    """``int |E[K_h(x - Z)] - p(x)|`` (or its square) via exact smoothing."""
    ph = smoothed_target(p, h, kernel)
    if grid is None:
        lo, hi = ph.support(1e-12)
        spacing = min(p.resolution, h) / 40.0
        grid = Grid(lo, hi, min(int((hi - lo) / spacing) + 1, _MAX_GRID))
    return integrated_error(ph, p, norm, grid)


def _line_integral(g, p, phi=None, rtol=1e-10):
    bps = tuple(p.breakpoints) + (tuple(phi.breakpoints) if phi is not None else ())
    value, _ = integrate_line(g, p.quad_center, p.quad_scale, bps, 1e-300, rtol)
    return value


def l2_norm(p, f):
    """``||f||_{L2(P)} = (int f^2 p)^(1/2)``."""
    return math.sqrt(exact_integral(p, lambda x: np.asarray(f(x), dtype=float) ** 2))


@dataclass(frozen=True)
class DefensiveVarianceTerms:
    """Ingredients of the defensive-mixture variance bounds.

    Norms follow ``||g||^2_{L2(P)} = int g^2 p``, so
    ``sqrtp_over_phi = (int p^2 / phi^2)^(1/2)`` and
    ``f2sqrtp_over_phi = (int f^4 p^2 / phi^2)^(1/2)``.
    """

    delta: float
    mise_q0: float
    var_f: float
    sqrtp_over_phi: float
    f2sqrtp_over_phi: float
    abs_p_minus_phi_f2: float
    sigma_delta_sq: float
    sigma_delta_f_sq: float


def _times(a, b):
    # 0 * inf = 0, as in integration theory
    return 0.0 if a == 0.0 else a * b


def _assemble(delta, mise_q0, var_f, a, b, c):
    root = math.sqrt(mise_q0)
    mix = delta / (1.0 - delta)
    s2 = _times(root, a) / delta + mix
    s2f = var_f + _times(root, b) / delta + _times(mix, c)
    return s2, s2f


def defensive_variance_terms(p, phi, f, delta, mise_q0, var_f=None, extended=False,
                             rtol=1e-10):
    """Quadrature of the integrability terms and the two variance constants.

    ``sigma_delta_sq = sqrt(mise_q0) ||sqrt(p)/phi|| / delta + delta/(1-delta)``
    and ``sigma_delta_f_sq = Var f + sqrt(mise_q0) ||f^2 sqrt(p)/phi|| / delta
    + delta/(1-delta) int |p - phi| f^2``.

    Raises
    ------
    AssumptionViolationError
        If one of the integrals diverges. With ``extended=True`` the term
        is ``inf`` instead and the constants follow extended arithmetic.
    """
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie strictly between 0 and 1, got {delta!r}")
    if not mise_q0 >= 0:
        raise InvalidParameterError("mise_q0 must be nonnegative")

    def ratio_sq(x):
        with np.errstate(divide="ignore", over="ignore"):
            r = np.exp(2.0 * (p.log_pdf(x) - phi.log_pdf(x)))
        return r

    def fx(x):
        return np.asarray(f(x), dtype=float)

    def term(g, condition):
        try:
            return _line_integral(g, p, phi, rtol)
        except NumericalIntegrationError as exc:
            if extended:
                return math.inf
            raise AssumptionViolationError(f"integral diverges: {condition}", condition) from exc

    a = math.sqrt(term(ratio_sq, "int p^2/phi^2 < inf"))
    b = math.sqrt(term(lambda x: fx(x) ** 4 * ratio_sq(x), "int f^4 p^2/phi^2 < inf"))
    c = term(lambda x: np.abs(p.pdf(x) - phi.pdf(x)) * fx(x) ** 2,
             "int |p - phi| f^2 < inf")
    if var_f is None:
        try:
            mean = exact_integral(p, fx)
            var_f = exact_integral(p, lambda x: (fx(x) - mean) ** 2)
        except NumericalIntegrationError as exc:
            raise AssumptionViolationError("f is not in L2(P)", "f in L2(P)") from exc
    s2, s2f = _assemble(delta, mise_q0, var_f, a, b, c)
    return DefensiveVarianceTerms(delta, mise_q0, var_f, a, b, c, s2, s2f)


def random_proposal_optimal_v(n, miae):
    """Minimiser ``v* = 1 + (a b)^(2/3)`` with ``a = sqrt(n)``, ``b = 2 sqrt(MIAE)``."""
    if n < 1 or miae < 0:
        raise InvalidParameterError("need n >= 1 and miae >= 0")
    return 1.0 + (math.sqrt(n) * 2.0 * math.sqrt(miae)) ** (2.0 / 3.0)


def random_proposal_error_bound(f_l2_norm, n, miae):
    """``(||f|| / sqrt(n)) (1 + (4 n MIAE)^(1/3))^(3/2)``.

    Mean absolute error bound for IS with a random proposal, optimised
    over the truncation level (see :func:`random_proposal_optimal_v`).
    """
    if f_l2_norm < 0 or n < 1 or miae < 0:
        raise InvalidParameterError("need f_l2_norm >= 0, n >= 1 and miae >= 0")
    return f_l2_norm / math.sqrt(n) * (1.0 + (4.0 * n * miae) ** (1.0 / 3.0)) ** 1.5


@dataclass(frozen=True)
class BoundInputs:
    """Scalar inputs of the defensive IS / SNIS / clipped-SNIS bounds.

    ``integral`` is ``I(f)``, needed only by the clipped bound;
    ``f_l4_proposal`` is ``E[||f||^4_{L4(Q)}]^(1/4)``, needed only by the
    SNIS bound.
    """

    f_l2_norm: float
    var_f: float
    miae: float
    mise_q0: float
    delta: float
    term_sqrtp_over_phi: float
    term_f2sqrtp_over_phi: float
    term_abs_p_minus_phi_f2: float
    c: float
    tau: float
    f_l4_proposal: float | None = None
    integral: float | None = None

    def __post_init__(self):
        for name in ("f_l2_norm", "var_f", "miae", "mise_q0", "term_sqrtp_over_phi",
                     "term_f2sqrtp_over_phi", "term_abs_p_minus_phi_f2"):
            if not getattr(self, name) >= 0:
                raise InvalidParameterError(f"{name} must be nonnegative")
        if not 0.0 < self.delta < 1.0:
            raise DomainError("delta must lie strictly between 0 and 1")
        if not (self.c > 0 and self.tau > 0):
            raise InvalidParameterError("c and tau must be positive")

    @classmethod
    def from_terms(cls, terms, f_l2_norm, miae, c, tau, f_l4_proposal=None, integral=None):
        return cls(f_l2_norm, terms.var_f, miae, terms.mise_q0, terms.delta,
                   terms.sqrtp_over_phi, terms.f2sqrtp_over_phi, terms.abs_p_minus_phi_f2,
                   c, tau, f_l4_proposal, integral)

    @property
    def sigma_sq(self):
        return _assemble(self.delta, self.mise_q0, self.var_f, self.term_sqrtp_over_phi,
                         self.term_f2sqrtp_over_phi, self.term_abs_p_minus_phi_f2)


@dataclass(frozen=True)
class DefensiveBounds:
    is_bound: float
    snis_bound: float | None
    clipped_bound: float | None


def defensive_bounds(inputs, n):
    """Mean absolute error bounds for IS, SNIS and clipped SNIS.

    ``snis_bound`` is ``None`` without ``f_l4_proposal`` and
    ``clipped_bound`` is ``None`` without ``integral``.

    Raises
    ------
    InfeasibleClippingError
        If ``tau >= c``.
    """
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    c, tau = inputs.c, inputs.tau
    if tau >= c:
        raise InfeasibleClippingError(f"clipping needs 0 < tau < c, got tau={tau}, c={c}")
    s2, s2f = inputs.sigma_sq
    s, sf = math.sqrt(s2), math.sqrt(s2f)
    rn = math.sqrt(n)
    is_bound = sf / rn
    snis = None
    if inputs.f_l4_proposal is not None:
        snis = (sf + math.sqrt(2.0) * s * (inputs.f_l2_norm + inputs.f_l4_proposal * math.sqrt(s))) / rn
    clipped = None
    if inputs.integral is not None:
        clipped = (sf + c * c * s / (tau * (c - tau)) * (abs(inputs.integral) + sf / rn)) / rn
    return DefensiveBounds(is_bound, snis, clipped)


def proposal_l4_norm(f, proposals):
    """``(mean_k int f^4 q_k)^(1/4)`` over proposal realisations."""
    vals = [exact_integral(q, lambda x: np.asarray(f(x), dtype=float) ** 4) for q in proposals]
    if not vals:
        raise InvalidInputError("need at least one proposal")
    return (math.fsum(vals) / len(vals)) ** 0.25


@dataclass(frozen=True)
class KlTvReport:
    tv: float
    kl: float
    iae: float
    ise: float
    miae_identity_gap: float
    pinsker_slack: float
    mise_bound_slack: float


def kl_tv_relations(p, qhat, grid=None, coverage=COVERAGE):
    """Total variation, KL divergence and the slacks linking them to IAE/ISE.

    ``pinsker_slack = sqrt(2 kl) - 2 tv`` and ``mise_bound_slack =
    2 (sup p + sup q) tv - ise`` are nonnegative up to quadrature error.
    ``kl`` is ``inf`` if ``qhat`` vanishes where ``p`` does not.
    """
    grid, pv, qv = _evaluate_pair(qhat, p, grid, coverage)
    x = grid.points
    diff = qv - pv
    tv = 0.5 * float(grid.integrate(np.abs(diff)))
    iae = integrated_error(qhat, p, "L1", grid, coverage)
    ise = float(grid.integrate(diff * diff))
    pos = pv > 0
    lq = np.asarray(qhat.log_pdf(x[pos]), dtype=float)
    if np.any(lq == -np.inf):
        kl = math.inf
    else:
        integrand = np.zeros_like(pv)
        integrand[pos] = pv[pos] * (np.asarray(p.log_pdf(x[pos]), dtype=float) - lq)
        kl = max(0.0, float(grid.integrate(integrand)))
    s_hat = float(pv.max() + qv.max())
    return KlTvReport(
        tv=tv,
        kl=kl,
        iae=iae,
        ise=ise,
        miae_identity_gap=abs(iae - 2.0 * tv),
        pinsker_slack=math.sqrt(2.0 * kl) - 2.0 * tv,
        mise_bound_slack=2.0 * s_hat * tv - ise,
    )


def kernel_weighted_moment(kernel, m):
    """``M_{K,m} = int (1 + |u|)^m K(u)^2 du``.

    Exact quadrature for ``d == 1``; for ``d > 1`` the kernel is taken to
    be radial and equal to its envelope.
    """
    if kernel.dim == 1:
        value, _ = integrate_line(lambda u: (1.0 + np.abs(u)) ** m * kernel(u) ** 2,
                                  0.0, 1.0, (0.0,))
        return value
    d = kernel.dim
    return radial_moment(lambda t: (1.0 + t) ** (m / 2.0) * kernel.envelope(t), 2, d, "K")


def stationary_l1_constant(c_mc, c_p, m, kernel):
    """``C1 = sqrt(c_mc c_p M_{K,m}) int (1 + |x|)^(-m/2) dx``.

    The tail integral is ``|S^(d-1)| B(d, m/2 - d)`` (``4 / (m - 2)`` for
    ``d == 1``).

    Raises
    ------
    AssumptionViolationError
        If ``m <= 2d``, where the tail integral diverges.
    """
    d = kernel.dim
    if not m > 2 * d:
        raise AssumptionViolationError(f"need m > 2d, got m={m}, d={d}", "m > 2d")
    if not (c_mc > 0 and c_p > 0):
        raise InvalidParameterError("c_mc and c_p must be positive")
    tail = sphere_area(d) * beta_fn(d, 0.5 * m - d)
    return math.sqrt(c_mc * c_p * kernel_weighted_moment(kernel, m)) * tail


@dataclass(frozen=True)
class NonstationaryBound:
    miae_stoch_bound: float
    mise_stoch_bound: float


def nonstationary_bound(alpha0, alpha1, B1, B2, B4, kernel, N, h):
    """Four-term stochastic MIAE and MISE bounds for chains from a fixed start.

    Raises
    ------
    DomainError
        If ``h > 1``.
    """
    if not h > 0:
        raise InvalidParameterError("h must be positive")
    if h > 1:
        raise DomainError(f"bound holds for bandwidths h <= 1, got {h}")
    if N < 1:
        raise InvalidParameterError("N must be >= 1")
    for name, v in (("alpha0", alpha0), ("alpha1", alpha1), ("B1", B1), ("B2", B2), ("B4", B4)):
        if not v > 0:
            raise InvalidParameterError(f"{name} must be positive")
    hd = h**kernel.dim
    rn = math.sqrt(N)
    miae = (alpha0 * kernel.l1_norm / rn + alpha0 * B1 / (rn * hd)
            + 2 * alpha1 * kernel.l2_norm_sq / (N * hd) + 2 * alpha1 * B2 / (N * hd**2))
    mise = (4 * alpha0**2 * kernel.l2_norm_sq / (N * hd) + 4 * alpha0**2 * B2 / (N * hd**2)
            + 8 * alpha1**2 * kernel.l4_norm_4 / (N**2 * hd**3)
            + 8 * alpha1**2 * B4 / (N**2 * hd**4))
    return NonstationaryBound(miae, mise)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    points: tuple


def rate_fit(points, y=None):
    """Least-squares line through ``(log x, log y)``.

    ``points`` is a sequence of ``(x, y)`` pairs, or the ``x`` values when
    ``y`` is given.
    """
    if y is None:
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InvalidInputError("points must be (x, y) pairs")
        x, yv = pts[:, 0], pts[:, 1]
    else:
        x, yv = np.asarray(points, dtype=float), np.asarray(y, dtype=float)
    if len(x) < 3 or x.shape != yv.shape:
        raise InvalidInputError("rate_fit needs at least 3 points")
    if not (np.all(x > 0) and np.all(yv > 0) and np.all(np.isfinite(x)) and np.all(np.isfinite(yv))):
        raise InvalidInputError("rate_fit needs positive finite values")
    lx, ly = np.log(x), np.log(yv)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    if ss_tot == 0.0:
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return RateFit(float(slope), float(intercept), r2, tuple(zip(lx.tolist(), ly.tolist())))


@dataclass(frozen=True)
class LowerBoundResult:
    N: int
    n: int
    reps: int
    p_en_hat: float
    p_en_exact: float
    error_mass_hat: float
    error_mass_given_en: float


def lowerbound_demo(N, n, reps, rng, max_block=1 << 22):
    """Simulate the bimodal construction that defeats a small-sample KDE.

    Each replicate draws ``N`` component labels and points from
    ``bimodal_lowerbound_model(n)``, fits a Gaussian KDE with ``h^2`` equal
    to the sample variance, and estimates ``E[x] = 1`` by IS with ``n``
    KDE draws. Reports the frequency of the all-left event (exact
    probability ``2^-N``) and of ``|I_n - 1| >= 1``.
    """
    if int(N) != N or N < 2:
        raise InvalidParameterError("N must be an integer >= 2")
    if int(n) != n or n < 1 or int(reps) != reps or reps < 1:
        raise InvalidParameterError("n and reps must be positive integers")
    N, n, reps = int(N), int(n), int(reps)
    model = bimodal_lowerbound_model(n)
    sigma = float(model.sigmas[0])
    chunk = max(1, max_block // (n * N))
    all_left = np.empty(reps, dtype=bool)
    big_error = np.empty(reps, dtype=bool)
    log_norm = -0.5 * math.log(2.0 * math.pi) - math.log(N)
    for start in range(0, reps, chunk):
        c = min(chunk, reps - start)
        right = rng.random((c, N)) < 0.5
        z = -1.0 + 4.0 * right + sigma * rng.standard_normal((c, N))
        h = np.std(z, axis=1, ddof=1)
        k = rng.integers(N, size=(c, n))
        x = np.take_along_axis(z, k, axis=1) + h[:, None] * rng.standard_normal((c, n))
        u = (x[:, :, None] - z[:, None, :]) / h[:, None, None]
        lq = logsumexp(-0.5 * u * u, axis=2) + log_norm - np.log(h)[:, None]
        w = np.exp(model.log_pdf(x) - lq)
        estimate = np.mean(w * x, axis=1)
        all_left[start:start + c] = ~right.any(axis=1)
        big_error[start:start + c] = np.abs(estimate - 1.0) >= 1.0
    given = float(big_error[all_left].mean()) if all_left.any() else math.nan
    return LowerBoundResult(N, n, reps, float(all_left.mean()), 2.0**-N,
                            float(big_error.mean()), given)


def binomial_acceptance_interval(reps, prob, level=0.99):
    """Central ``level`` range of event frequencies under Binomial(reps, prob)."""
    lo, hi = stats.binom.interval(level, reps, prob)
    return float(lo) / reps, float(hi) / reps


def mean_upper_ci(values, level=0.99):
    """One-sided normal upper confidence limit for the mean."""
    v = np.asarray(values, dtype=float)
    z = stats.norm.ppf(level)
    return float(v.mean() + z * v.std(ddof=1) / math.sqrt(len(v)))


def variance_upper_ci(values, level=0.99):
    """One-sided chi-square upper confidence limit for the variance."""
    v = np.asarray(values, dtype=float)
    dof = len(v) - 1
    return float(dof * v.var(ddof=1) / stats.chi2.ppf(1.0 - level, dof))
