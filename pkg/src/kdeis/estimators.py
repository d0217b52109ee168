"""Importance sampling, self-normalised and denominator-clipped estimators."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSampleError,
    DivisionHazardError,
    InvalidInputError,
    InvalidParameterError,
    MisuseError,
)
from .proposals import importance_weights

__all__ = [
    "WeightedSample",
    "EstimateReport",
    "draw_weighted_sample",
    "is_value",
    "snis_value",
    "clipped_snis_value",
    "is_estimate",
    "snis_estimate",
    "clipped_snis_estimate",
    "pilot_normalizer",
    "retarget",
    "TAU0",
    "PILOT_MAX",
]

TAU0 = 0.1
PILOT_MAX = 1000


@dataclass(frozen=True)
class WeightedSample:
    """Proposal draws with weights ``p_tilde / q`` and integrand values."""

    points: np.ndarray
    weights: np.ndarray
    f_values: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        fv = np.asarray(self.f_values, dtype=float)
        if w.ndim != 1 or fv.shape != w.shape or len(self.points) != len(w):
            raise InvalidInputError("points, weights and f_values must have equal length")
        if len(w) == 0:
            raise InvalidInputError("empty weighted sample")
        if np.any(np.isnan(w)) or np.any(w < 0):
            raise InvalidInputError("weights must be nonnegative and not NaN")
        if not np.all(np.isfinite(fv)):
            raise InvalidInputError("integrand values must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "f_values", fv)

    @property
    def n(self):
        return len(self.weights)

    @property
    def weight_sum(self):
        return math.fsum(self.weights)

    @property
    def weighted_f_sum(self):
        return math.fsum(self.weights * self.f_values)

    @property
    def ess(self):
        """``(sum w)^2 / sum w^2``, clamped to ``[1, n]`` against rounding."""
        s = self.weight_sum
        if s == 0.0:
            raise DegenerateSampleError("all importance weights are zero")
        ess = s * s / math.fsum(self.weights * self.weights)
        return min(float(self.n), max(1.0, ess))


@dataclass(frozen=True)
class EstimateReport:
    value: float
    kind: str
    n: int
    mean_weight: float
    ess: float
    max_weight: float
    clip_active: bool = False
    seed: int | None = None
    tau: float | None = None

    def __post_init__(self):
        if self.kind not in ("IS", "SNIS", "SNIS_CLIPPED"):
            raise InvalidParameterError(f"unknown estimator kind {self.kind!r}")
        if self.clip_active and self.kind != "SNIS_CLIPPED":
            raise InvalidParameterError("only the clipped estimator can clip")


def _generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng, None
    if isinstance(rng, (int, np.integer)):
        return np.random.default_rng(int(rng)), int(rng)
    raise InvalidParameterError("rng must be a numpy Generator or an integer seed")


def _evaluate_f(f, x):
    fx = np.asarray(f(x), dtype=float)
    if fx.shape != (len(x),):
        fx = np.broadcast_to(fx, (len(x),)).astype(float)
    return fx


def draw_weighted_sample(f, target, proposal, n, rng):
    """Draw ``n`` points from ``proposal`` and weight them against ``target``."""
    if int(n) != n or n < 1:
        raise InvalidParameterError("n must be a positive integer")
    x = proposal.sample(rng, int(n))
    w = importance_weights(target, proposal, x)
    return WeightedSample(x, w, _evaluate_f(f, x))


def is_value(ws):
    """``(1/n) sum w_i f_i``."""
    return ws.weighted_f_sum / ws.n


def snis_value(ws):
    """``sum w_i f_i / sum w_i``."""
    s = ws.weight_sum
    if s == 0.0:
        raise DegenerateSampleError("all importance weights are zero")
    return ws.weighted_f_sum / s


def clipped_snis_value(ws, tau):
    """``sum w_i f_i / max(tau n, sum w_i)`` and whether the clip is active."""
    if not (tau > 0 and math.isfinite(tau)):
        raise InvalidParameterError(f"tau must be positive, got {tau!r}")
    s = ws.weight_sum
    floor = tau * ws.n
    active = s < floor
    return ws.weighted_f_sum / (floor if active else s), active


def _report(kind, value, ws, seed, clip_active=False, tau=None):
    return EstimateReport(
        value=float(value),
        kind=kind,
        n=ws.n,
        mean_weight=ws.weight_sum / ws.n,
        ess=ws.ess,
        max_weight=float(ws.weights.max()),
        clip_active=bool(clip_active),
        seed=seed,
        tau=tau,
    )


def is_estimate(f, target, proposal, n, rng):
    """Unbiased importance sampling estimate of ``E_p[f]``.

    Needs a normalised target; use :func:`snis_estimate` otherwise.
    Weight failures (vanishing or overflowing proposal density) propagate
    as :class:`DivisionHazardError`.
    """
    if not target.normalized:
        raise MisuseError("IS needs a normalised target; use snis_estimate")
    rng, seed = _generator(rng)
    ws = draw_weighted_sample(f, target, proposal, n, rng)
    return _report("IS", is_value(ws), ws, seed)


def snis_estimate(f, target, proposal, n, rng):
    """Self-normalised estimate; the target may be unnormalised."""
    rng, seed = _generator(rng)
    ws = draw_weighted_sample(f, target, proposal, n, rng)
    return _report("SNIS", snis_value(ws), ws, seed)


def clipped_snis_estimate(f, target, proposal, n, rng, tau=None, tau0=TAU0,
                          pilot_size=None):
    """Self-normalised estimate with denominator ``max(tau n, sum w_i)``.

    Without ``tau`` the threshold is ``tau0 * c_hat`` with ``c_hat`` from
    :func:`pilot_normalizer` on ``min(n, 1000)`` draws of a stream spawned
    from ``rng``. Spawning leaves ``rng`` untouched, so the main sample is
    the one :func:`snis_estimate` would draw from the same generator.
    """
    rng, seed = _generator(rng)
    if tau is None:
        m = min(int(n), PILOT_MAX) if pilot_size is None else int(pilot_size)
        pilot_rng = rng.spawn(1)[0]
        tau = tau0 * pilot_normalizer(target, proposal, m, pilot_rng)
    ws = draw_weighted_sample(f, target, proposal, n, rng)
    value, active = clipped_snis_value(ws, tau)
    return _report("SNIS_CLIPPED", value, ws, seed, active, float(tau))


def pilot_normalizer(target, proposal, m, rng):
    """Mean weight ``(1/m) sum p_tilde(Y_j) / q(Y_j)`` over fresh draws."""
    if int(m) != m or m < 1:
        raise InvalidParameterError("pilot size must be a positive integer")
    rng, _ = _generator(rng)
    y = proposal.sample(rng, int(m))
    w = importance_weights(target, proposal, y)
    c_hat = math.fsum(w) / m
    if c_hat == 0.0:
        raise DegenerateSampleError("pilot sample has zero mean weight")
    return c_hat


def retarget(f, p, reference):
    """Integrand ``f p / reference``, whose ``reference``-mean is ``E_p[f]``."""

    def f_tilde(x):
        r = np.asarray(reference.pdf(x), dtype=float)
        if np.any(r <= 0):
            raise DivisionHazardError("reference density is not positive", np.asarray(x)[r <= 0])
        return np.asarray(f(x), dtype=float) * np.asarray(p.pdf(x), dtype=float) / r

    return f_tilde
