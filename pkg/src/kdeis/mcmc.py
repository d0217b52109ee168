"""Random-walk Metropolis chains for auxiliary samples, plus diagnostics."""

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import (
    CapabilityError,
    InvalidInputError,
    InvalidParameterError,
    TargetEvaluationError,
    ZeroVarianceError,
)

__all__ = [
    "ChainConfig",
    "ChainOutput",
    "stationary_config",
    "nonstationary_config",
    "rwm_chain",
    "rwm_chains",
    "autocorrelation",
    "integrated_autocorr_time",
]

DRAW_FROM_TARGET = "draw-from-target"
STATIONARY_BURN_IN = 10_000


@dataclass(frozen=True)
class ChainConfig:
    """Random-walk Metropolis settings.

    ``init`` is a point or ``"draw-from-target"``; ``step_scale`` defaults
    to ``2.4`` times the target standard deviation (``2.4`` if unknown).
    """

    target: Any
    length: int
    step_scale: float | None = None
    init: Any = DRAW_FROM_TARGET
    burn_in: int = 0
    seed: int = 0

    def __post_init__(self):
        if int(self.length) != self.length or self.length < 1:
            raise InvalidParameterError("chain length must be a positive integer")
        if int(self.burn_in) != self.burn_in or self.burn_in < 0:
            raise InvalidParameterError("burn_in must be a nonnegative integer")
        if self.step_scale is None:
            try:
                sd = math.sqrt(self.target.variance)
            except CapabilityError:
                sd = 1.0
            object.__setattr__(self, "step_scale", 2.4 * sd)
        if not (self.step_scale > 0 and math.isfinite(self.step_scale)):
            raise InvalidParameterError("step_scale must be positive")
        if isinstance(self.init, str) and self.init != DRAW_FROM_TARGET:
            raise InvalidParameterError(f"unknown init {self.init!r}")


@dataclass(frozen=True)
class ChainOutput:
    states: np.ndarray
    acceptance_rate: float
    config: ChainConfig = field(repr=False)


def stationary_config(target, length, step_scale=None, seed=0, burn_in=STATIONARY_BURN_IN):
    """Burned-in chain started from the target when it has a sampler."""
    init = DRAW_FROM_TARGET if target.has_sampler else _default_start(target, 0.0)
    return ChainConfig(target, length, step_scale, init, burn_in, seed)


def nonstationary_config(target, length, step_scale=None, seed=0, init=None, offset=3.0):
    """Chain from a fixed start ``mean + offset * sd`` with no burn-in."""
    if init is None:
        init = _default_start(target, offset)
    return ChainConfig(target, length, step_scale, init, 0, seed)


def _default_start(target, offset):
    try:
        mean, sd = target.mean, math.sqrt(target.variance)
    except CapabilityError:
        mean, sd = 0.0, 1.0
    x = mean + offset * sd
    return x if target.dim == 1 else np.full(target.dim, x)


def _checked_log_pdf(target, x):
    lp = np.asarray(target.log_pdf(x), dtype=float)
    if np.any(np.isnan(lp)):
        raise TargetEvaluationError(f"{target.label} log density is NaN")
    return lp


def _draws(config, rng):
    steps = config.length + config.burn_in
    d = config.target.dim
    if isinstance(config.init, str):
        x0 = config.target.sample(rng, 1)[0]
    else:
        x0 = np.asarray(config.init, dtype=float)
        if x0.shape != (() if d == 1 else (d,)):
            raise InvalidInputError(f"init must be a point in R^{d}")
    eps = rng.standard_normal(steps if d == 1 else (steps, d))
    log_u = np.log(rng.random(steps))
    return x0, eps, log_u


def rwm_chains(config, rngs):
    """Run one chain per generator, vectorised across chains.

    Chain ``c`` is identical to ``rwm_chain(config, rngs[c])``.
    """
    target = config.target
    draws = [_draws(config, rng) for rng in rngs]
    x = np.stack([dr[0] for dr in draws]).astype(float)
    eps = np.stack([dr[1] for dr in draws], axis=1) * config.step_scale
    log_u = np.stack([dr[2] for dr in draws], axis=1)
    lp_x = _checked_log_pdf(target, x)
    if np.any(lp_x == -np.inf):
        raise TargetEvaluationError("chain starts where the target density vanishes")
    n_chains = len(rngs)
    states = np.empty((n_chains, config.length) + x.shape[1:])
    accepted = np.zeros(n_chains, dtype=np.int64)
    for t in range(config.length + config.burn_in):
        y = x + eps[t]
        lp_y = _checked_log_pdf(target, y)
        acc = log_u[t] < lp_y - lp_x
        x = np.where(acc if x.ndim == 1 else acc[:, None], y, x)
        lp_x = np.where(acc, lp_y, lp_x)
        if t >= config.burn_in:
            states[:, t - config.burn_in] = x
            accepted += acc
    return [ChainOutput(states[c], float(accepted[c]) / config.length, config)
            for c in range(n_chains)]


def rwm_chain(config, rng=None):
    """Gaussian random-walk Metropolis chain with invariant law ``target``.

    Moves ``x -> x + step_scale * eps`` are accepted with probability
    ``min(1, p(y) / p(x))``, which needs the target only up to a constant.
    The first ``burn_in`` states are discarded; ``acceptance_rate`` refers
    to the retained ones. Without ``rng`` the generator is seeded from
    ``config.seed``.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    return rwm_chains(config, [rng])[0]


def autocorrelation(states, max_lag):
    """Normalised sample autocorrelations at lags ``0..max_lag``."""
    x = np.asarray(states, dtype=float)
    if x.ndim != 1:
        raise InvalidInputError("autocorrelation needs a scalar sequence")
    if int(max_lag) != max_lag or max_lag < 1 or len(x) <= max_lag:
        raise InvalidInputError("need 1 <= max_lag < len(states)")
    x = x - x.mean()
    denom = float(x @ x)
    if denom == 0.0:
        raise ZeroVarianceError("constant sequence has no autocorrelation")
    n = len(x)
    return np.array([float(x[: n - k] @ x[k:]) / denom for k in range(max_lag + 1)])


def integrated_autocorr_time(states, max_lag=None):
    """``1 + 2 sum rho(k)`` summed until the first non-positive pair sum."""
    x = np.asarray(states, dtype=float)
    if max_lag is None:
        max_lag = min(len(x) - 1, 1000)
    rho = autocorrelation(x, max_lag)
    tau = 1.0
    for k in range(1, max_lag, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return tau
