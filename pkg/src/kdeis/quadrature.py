"""Adaptive Simpson quadrature and uniform-grid rules.

All integrands are vectorised: ``g`` receives a 1-d float array and must
return an array of the same shape.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, NumericalIntegrationError

__all__ = [
    "adaptive_simpson",
    "integrate_line",
    "integrate_halfline",
    "Grid",
]

_INITIAL_PANELS = 8


def _checked(g, x):
    y = np.asarray(g(x), dtype=float)
    if y.shape != x.shape:
        y = np.broadcast_to(y, x.shape).astype(float)
    if not np.all(np.isfinite(y)):
        bad = x[~np.isfinite(y)][0]
        raise NumericalIntegrationError(
            f"integrand is not finite at x={bad:.6g}", residual=math.inf
        )
    return y


def adaptive_simpson(g, a, b, tol=1e-10, breakpoints=(), max_depth=48,
                     max_panels=2_000_000, rtol=0.0):
    """Integrate ``g`` over ``[a, b]`` with adaptive composite Simpson.

    Panels are bisected level by level until the local Richardson error
    estimate is below ``t * length / (b - a)``, where ``t`` is the larger
    of ``tol`` and ``rtol`` times the coarse initial estimate of
    ``int |g|``. Interior ``breakpoints`` (e.g. kinks) always lie on panel
    boundaries.

    Returns
    -------
    value, error_estimate : float
        The integral and the summed absolute local error estimates.

    Raises
    ------
    NumericalIntegrationError
        If the integrand is not finite or the tolerance is not met after
        ``max_depth`` bisections.
    """
    a, b = float(a), float(b)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise InvalidParameterError("adaptive_simpson needs finite limits")
    if a == b:
        return 0.0, 0.0
    if a > b:
        value, err = adaptive_simpson(g, b, a, tol, breakpoints, max_depth,
                                      max_panels, rtol)
        return -value, err
    if tol <= 0:
        raise InvalidParameterError("tol must be positive")

    edges = sorted({a, b, *(float(p) for p in breakpoints if a < p < b)})
    lo = np.concatenate([
        np.linspace(l, r, _INITIAL_PANELS + 1)[:-1]
        for l, r in zip(edges[:-1], edges[1:])
    ])
    hi = np.concatenate([
        np.linspace(l, r, _INITIAL_PANELS + 1)[1:]
        for l, r in zip(edges[:-1], edges[1:])
    ])
    mid = 0.5 * (lo + hi)
    f_lo = _checked(g, lo)
    f_mid = _checked(g, mid)
    f_hi = _checked(g, hi)
    whole = (hi - lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi)
    tol = max(tol, rtol * float(np.abs(whole).sum()))

    total = []
    err_total = []
    width = b - a
    for _ in range(max_depth):
        q1 = 0.5 * (lo + mid)
        q3 = 0.5 * (mid + hi)
        f_q1 = _checked(g, q1)
        f_q3 = _checked(g, q3)
        left = (mid - lo) / 6.0 * (f_lo + 4.0 * f_q1 + f_mid)
        right = (hi - mid) / 6.0 * (f_mid + 4.0 * f_q3 + f_hi)
        delta = left + right - whole
        local_tol = tol * (hi - lo) / width
        done = np.abs(delta) <= 15.0 * local_tol
        # panels shorter than a few ulps cannot be refined further
        done |= (hi - lo) <= 4.0 * np.spacing(np.maximum(np.abs(lo), np.abs(hi)))
        total.append(left[done] + right[done] + delta[done] / 15.0)
        err_total.append(np.abs(delta[done]) / 15.0)
        keep = ~done
        if not keep.any():
            break
        if 2 * keep.sum() > max_panels:
            raise NumericalIntegrationError(
                "adaptive Simpson exceeded its panel budget",
                residual=float(np.abs(delta[keep]).sum() / 15.0),
            )
        lo_k, mid_k, hi_k = lo[keep], mid[keep], hi[keep]
        lo = np.concatenate([lo_k, mid_k])
        hi = np.concatenate([mid_k, hi_k])
        mid = np.concatenate([q1[keep], q3[keep]])
        f_lo, f_hi, f_mid_new = (
            np.concatenate([f_lo[keep], f_mid[keep]]),
            np.concatenate([f_mid[keep], f_hi[keep]]),
            np.concatenate([f_q1[keep], f_q3[keep]]),
        )
        f_mid = f_mid_new
        whole = np.concatenate([left[keep], right[keep]])
    else:
        raise NumericalIntegrationError(
            "adaptive Simpson did not converge",
            residual=float(np.abs(delta[keep]).sum() / 15.0),
        )
    value = math.fsum(np.concatenate(total))
    err = math.fsum(np.concatenate(err_total))
    return value, err


def _tail_check(h, end, tol):
    # eps * h(end - eps) must shrink as eps -> 0 for the transformed
    # integrand to be integrable at the endpoint (rules out h ~ 1/eps).
    tails = []
    for eps in (1e-6, 1e-9):
        theta = np.array([end - math.copysign(eps, end)])
        tail = abs(float(h(theta)[0])) * eps
        if not math.isfinite(tail):
            raise NumericalIntegrationError(
                "integrand is not finite near infinity", residual=math.inf
            )
        tails.append(tail)
    if tails[1] > tol and tails[1] >= 0.5 * tails[0]:
        raise NumericalIntegrationError(
            "integrand decays too slowly at infinity", residual=tails[1]
        )


def integrate_line(g, center=0.0, scale=1.0, breakpoints=(), tol=1e-10, rtol=0.0):
    """Integrate ``g`` over the real line.

    Uses the substitution ``x = center + scale * tan(theta)`` on
    ``(-pi/2, pi/2)``, so heavy (polynomial) tails need no truncation.
    Divergent integrals surface as :class:`NumericalIntegrationError`.
    """
    if scale <= 0:
        raise InvalidParameterError("scale must be positive")

    def h(theta):
        x = center + scale * np.tan(theta)
        c = np.cos(theta)
        gx = np.asarray(g(x), dtype=float)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            y = gx * (scale / (c * c))
        # an exactly vanishing integrand stays zero at the endpoints
        return np.where(gx == 0.0, 0.0, y)

    half = math.pi / 2
    thetas = [math.atan((p - center) / scale) for p in breakpoints]
    value, err = adaptive_simpson(h, -half, half, tol, thetas, rtol=rtol)
    tail_tol = max(tol, rtol * abs(value))
    _tail_check(h, half, tail_tol)
    _tail_check(h, -half, tail_tol)
    return value, err


def integrate_halfline(g, scale=1.0, tol=1e-10, rtol=0.0):
    """Integrate ``g`` over ``[0, inf)`` via ``t = scale * tan(theta)``."""
    if scale <= 0:
        raise InvalidParameterError("scale must be positive")

    def h(theta):
        t = scale * np.tan(theta)
        c = np.cos(theta)
        gt = np.asarray(g(t), dtype=float)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            y = gt * (scale / (c * c))
        return np.where(gt == 0.0, 0.0, y)

    half = math.pi / 2
    value, err = adaptive_simpson(h, 0.0, half, tol, rtol=rtol)
    _tail_check(h, half, max(tol, rtol * abs(value)))
    return value, err


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[lo, hi]`` with composite Simpson weights.

    ``num`` is rounded up to an odd count so the Simpson rule applies.
    """

    lo: float
    hi: float
    num: int = 2001

    def __post_init__(self):
        if not self.hi > self.lo:
            raise InvalidParameterError("grid needs hi > lo")
        if self.num < 3:
            raise InvalidParameterError("grid needs at least 3 points")
        if self.num % 2 == 0:
            object.__setattr__(self, "num", self.num + 1)

    @property
    def points(self):
        return np.linspace(self.lo, self.hi, self.num)

    @property
    def spacing(self):
        return (self.hi - self.lo) / (self.num - 1)

    @property
    def weights(self):
        w = np.ones(self.num)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * (self.spacing / 3.0)

    def integrate(self, values):
        """Simpson rule applied along the last axis of ``values``."""
        return np.asarray(values) @ self.weights

    @classmethod
    def covering(cls, *intervals, spacing=None, num=2001):
        """Smallest grid containing every ``(lo, hi)`` interval."""
        lo = min(i[0] for i in intervals)
        hi = max(i[1] for i in intervals)
        if spacing is not None:
            num = int(math.ceil((hi - lo) / spacing)) + 1
        return cls(lo, hi, num)
