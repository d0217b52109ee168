"""Defensive mixture proposals, mixing schedules and importance weights."""

import math
from dataclasses import dataclass

import numpy as np

from .distributions import DensityModel
from .errors import (
    CapabilityError,
    DivisionHazardError,
    InvalidParameterError,
    TargetEvaluationError,
    WeightOverflowError,
)
from .quadrature import Grid

__all__ = [
    "DefensiveProposal",
    "make_defensive",
    "DELTA_REGIMES",
    "delta_schedule",
    "importance_weights",
    "importance_weight",
    "TailReport",
    "tail_condition_check",
    "WEIGHT_LIMIT",
]

WEIGHT_LIMIT = 1e300
DELTA_EPS = 1e-12


class DefensiveProposal(DensityModel):
    """``(1 - delta) q_kde + delta phi``.

    Components with zero mixing weight are never evaluated, so
    ``delta == 1`` is exactly ``phi`` and ``delta == 0`` exactly the KDE.
    """

    def __init__(self, kde, defense, delta):
        if kde.dim != defense.dim:
            raise InvalidParameterError("KDE and defense dimensions differ")
        self.kde = kde
        self.defense = defense
        self.delta = float(delta)
        self.dim = kde.dim
        self.label = f"defensive({kde.label},{defense.label},delta={delta:.4g})"
        self.heavy_tailed = defense.heavy_tailed and self.delta > 0
        self.quad_center = kde.quad_center
        self.quad_scale = max(kde.quad_scale, defense.quad_scale)
        self.resolution = min(kde.resolution, defense.resolution)

    def pdf(self, x):
        d = self.delta
        if d == 1.0:
            return self.defense.pdf(x)
        if d == 0.0:
            return self.kde.pdf(x)
        return (1.0 - d) * self.kde.pdf(x) + d * self.defense.pdf(x)

    def log_pdf(self, x):
        d = self.delta
        if d == 1.0:
            return self.defense.log_pdf(x)
        if d == 0.0:
            return self.kde.log_pdf(x)
        return np.logaddexp(math.log1p(-d) + self.kde.log_pdf(x),
                            math.log(d) + self.defense.log_pdf(x))

    def cdf(self, x):
        d = self.delta
        if d == 1.0:
            return self.defense.cdf(x)
        if d == 0.0:
            return self.kde.cdf(x)
        return (1.0 - d) * self.kde.cdf(x) + d * self.defense.cdf(x)

    def sample_with_components(self, rng, size):
        """Draw ``(points, from_defense)`` with ``from_defense ~ Bernoulli(delta)``."""
        from_defense = rng.random(size) < self.delta
        k = int(from_defense.sum())
        shape = (size,) if self.dim == 1 else (size, self.dim)
        x = np.empty(shape)
        if k:
            x[from_defense] = self.defense.sample(rng, k)
        if k < size:
            x[~from_defense] = self.kde.sample(rng, size - k)
        return x, from_defense

    def sample(self, rng, size):
        return self.sample_with_components(rng, size)[0]

    def support(self, eps=1e-10):
        if self.delta == 0.0:
            return self.kde.support(eps)
        if self.delta == 1.0:
            return self.defense.support(eps)
        a, b = self.kde.support(eps)
        c, d = self.defense.support(eps)
        return min(a, c), max(b, d)


def make_defensive(kde, defense, delta):
    """Mix a KDE with a strictly positive, samplable defense density.

    ``delta`` may be 0 or 1 so that the pure-KDE and pure-defense
    proposals can be compared with genuine mixtures.
    """
    if not (0.0 <= delta <= 1.0):
        raise InvalidParameterError(f"delta must lie in [0, 1], got {delta!r}")
    if not defense.has_sampler:
        raise CapabilityError(f"defense {defense.label} has no sampler")
    probe = np.asarray(defense.pdf(kde.centers[:64]))
    if np.any(probe <= 0) or np.any(np.isnan(probe)):
        raise InvalidParameterError("defense density must be strictly positive")
    return DefensiveProposal(kde, defense, delta)


DELTA_REGIMES = ("iid_optimal", "nonstationary_optimal", "numerics_rule", "general_eta")


def delta_schedule(regime, d, N, c0=0.5, eta=None):
    """Mixing weight ``c0 * N^-e`` clamped to ``[1e-12, 1 - 1e-12]``.

    ``e`` is ``1/(d+4)``, ``1/(2d+4)``, ``1/5`` or ``eta/2``.
    """
    if N < 1:
        raise InvalidParameterError("N must be >= 1")
    if not (c0 > 0 and math.isfinite(c0)):
        raise InvalidParameterError("c0 must be positive")
    if regime == "iid_optimal":
        e = 1.0 / (d + 4)
    elif regime == "nonstationary_optimal":
        e = 1.0 / (2 * d + 4)
    elif regime == "numerics_rule":
        e = 0.2
    elif regime == "general_eta":
        if eta is None or not eta > 0:
            raise InvalidParameterError("general_eta needs a positive eta")
        e = 0.5 * eta
    else:
        raise InvalidParameterError(f"unknown delta regime {regime!r}")
    return min(1.0 - DELTA_EPS, max(DELTA_EPS, c0 * float(N) ** -e))


def importance_weights(target, proposal, x):
    """``target.pdf(x) / proposal.pdf(x)`` for an array of points.

    The ratio is formed directly when both densities are representable and
    in log space where the proposal density underflows.

    Raises
    ------
    TargetEvaluationError
        If the target density is NaN or negative.
    DivisionHazardError
        If the proposal density is exactly zero at a point.
    WeightOverflowError
        If a weight exceeds ``1e300``.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(target.pdf(x), dtype=float)
    if np.any(np.isnan(p)) or np.any(p < 0):
        raise TargetEvaluationError(f"{target.label} density is NaN or negative")
    q = np.asarray(proposal.pdf(x), dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        w = p / q
    small = q < 1e-300
    if np.any(small):
        idx = np.flatnonzero(small.reshape(-1))
        pts = x.reshape(-1)[idx] if target.dim == 1 else x.reshape(-1, target.dim)[idx]
        lq = np.asarray(proposal.log_pdf(pts), dtype=float)
        if np.any(lq == -np.inf):
            raise DivisionHazardError(
                "proposal density vanishes at a sampled point",
                pts[lq == -np.inf][0],
            )
        lp = np.asarray(target.log_pdf(pts), dtype=float)
        with np.errstate(over="ignore"):
            w.reshape(-1)[idx] = np.exp(lp - lq)
    big = ~(w <= WEIGHT_LIMIT)
    if np.any(big):
        bad = x[big]
        raise WeightOverflowError(f"importance weight exceeds {WEIGHT_LIMIT:g}", bad[0])
    return w


def importance_weight(target, proposal, x):
    """Scalar version of :func:`importance_weights`."""
    return float(importance_weights(target, proposal, np.asarray([x], dtype=float))[0])


@dataclass(frozen=True)
class TailReport:
    c_u: float
    c_l: float
    c_tail: float
    feasible: bool
    bound: float


def tail_condition_check(p, phi, compact_radius, grid=None):
    """Grid check that ``phi >= sqrt(c_tail p)`` off ``[-R, R]``.

    ``c_u`` is the larger of the two grid suprema, ``c_l`` the minimum of
    ``phi`` on ``[-R, R]`` and ``c_tail`` the minimum of ``phi^2 / p`` on
    the grid points outside. ``bound = c_u / c_l^2 + 1 / c_tail`` bounds
    ``int p^2 / phi^2`` when feasible (``inf`` otherwise).

    ``grid`` is a :class:`Grid` or ``(lo, hi, num)``; it defaults to
    ``[-3R, 3R]`` with 6001 points. The verdict is relative to the grid:
    a ratio that only vanishes far out is seen once the grid reaches there.
    """
    if p.dim != 1 or phi.dim != 1:
        raise InvalidParameterError("tail check supports d == 1 only")
    R = float(compact_radius)
    if not R > 0:
        raise InvalidParameterError("compact_radius must be positive")
    if grid is None:
        grid = Grid(-3.0 * R, 3.0 * R, 6001)
    elif not isinstance(grid, Grid):
        grid = Grid(*grid)
    x = grid.points
    inside = np.abs(x) <= R
    if grid.lo >= -R or grid.hi <= R or inside.sum() < 2 or (~inside).sum() < 2:
        raise InvalidParameterError("grid must resolve and extend beyond [-R, R]")
    px = p.pdf(x)
    fx = phi.pdf(x)
    c_u = float(max(px.max(), fx.max()))
    c_l = float(fx[inside].min())
    out = ~inside
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        lratio = 2.0 * phi.log_pdf(x[out]) - p.log_pdf(x[out])
    c_tail = float(max(0.0, np.exp(np.min(lratio))))
    feasible = c_l > 0 and c_tail > 0
    bound = c_u / c_l**2 + 1.0 / c_tail if feasible else math.inf
    return TailReport(c_u, c_l, c_tail, feasible, bound)
