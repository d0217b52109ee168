import math

import numpy as np
import pytest
from scipy import integrate, stats

from kdeis.errors import InvalidParameterError
from kdeis.kde import (
    bandwidth_schedule,
    bias_bound,
    build_kde,
    gaussian_kernel,
    gaussian_sobolev_norms,
    kde_sample,
    kernel_moment_constant,
    radial_moment,
    smoothed_target,
)
from kdeis.distributions import gaussian_model


def test_pdf_matches_direct_sum():
    rng = np.random.default_rng(0)
    z = rng.normal(size=50)
    h = 0.3
    kde = build_kde(z, h)
    x = np.linspace(-4, 4, 77)
    ref = stats.norm.pdf((x[:, None] - z[None]) / h).mean(axis=1) / h
    assert np.allclose(kde.pdf(x), ref, rtol=1e-12)
    assert np.allclose(np.exp(kde.log_pdf(x)), ref, rtol=1e-12)


def test_pdf_matches_scipy_gaussian_kde():
    rng = np.random.default_rng(1)
    z = rng.normal(size=200)
    h = 0.25
    ref = stats.gaussian_kde(z, bw_method=h / z.std(ddof=1))
    x = np.linspace(-3, 3, 31)
    assert np.allclose(build_kde(z, h).pdf(x), ref(x), rtol=1e-10)


def test_far_tail_uses_log_space():
    kde = build_kde(np.array([0.0]), 0.1)
    x = np.array([4.0])
    expected = -0.5 * 40.0**2 - math.log(0.1) - 0.5 * math.log(2 * math.pi)
    assert kde.log_pdf(x)[0] == pytest.approx(expected, rel=1e-13)
    # moderate tail: the linear path would underflow below 1e-290 but the value is representable
    y = np.array([3.75])
    assert kde.pdf(y)[0] == pytest.approx(math.exp(kde.log_pdf(y)[0]), rel=1e-12)
    assert kde.pdf(y)[0] > 0


def test_cdf_integrates_pdf():
    kde = build_kde(np.array([-1.0, 0.5, 2.0]), 0.4)
    value, _ = integrate.quad(lambda t: kde.pdf(np.array([t]))[0], -10, 1.0, points=[-1, 0.5])
    assert kde.cdf(np.array([1.0]))[0] == pytest.approx(value, abs=1e-10)


def test_sample_distribution():
    rng = np.random.default_rng(2)
    kde = build_kde(np.array([-2.0, 2.0]), 0.5)
    x = kde_sample(kde, rng, 100_000)
    assert stats.kstest(x, lambda t: kde.cdf(np.asarray(t))).pvalue > 1e-3


def test_kernel_constants():
    k = gaussian_kernel(1)
    assert k.l2_norm_sq == pytest.approx(1 / (2 * math.sqrt(math.pi)))
    l4, _ = integrate.quad(lambda u: stats.norm.pdf(u) ** 4, -np.inf, np.inf)
    assert k.l4_norm_4 == pytest.approx(l4, rel=1e-10)
    assert k.m2 == pytest.approx(1.0)


@pytest.mark.parametrize("regime,e", [("iid_optimal", 0.2), ("nonstationary_optimal", 1 / 6),
                                      ("numerics_rule", 0.2)])
def test_bandwidth_schedule(regime, e):
    assert bandwidth_schedule(regime, 1, 1000, scale=2.0) == pytest.approx(2.0 * 1000**-e)


def test_bandwidth_from_sample_and_floor():
    s = np.array([1.0, 2.0, 3.0])
    assert bandwidth_schedule("iid_optimal", 1, 1, sample=s) == pytest.approx(1.0)
    assert bandwidth_schedule("iid_optimal", 1, 10**5, scale=1.0) == pytest.approx(0.1)
    with pytest.raises(InvalidParameterError):
        bandwidth_schedule("bogus", 1, 10, scale=1.0)


def test_smoothed_target_is_wider_gaussian():
    ph = smoothed_target(gaussian_model(0, 1), 0.5)
    x = np.linspace(-3, 3, 13)
    assert np.allclose(ph.pdf(x), stats.norm.pdf(x, 0, math.sqrt(1.25)), rtol=1e-12)


def test_sobolev_norms_closed_form_against_quadrature():
    d2 = lambda x: (x * x - 1) * stats.norm.pdf(x)  # noqa: E731
    s = gaussian_sobolev_norms(1.0)
    ref_l1, _ = integrate.quad(lambda x: abs(d2(x)), -np.inf, np.inf, points=None)
    ref_l2, _ = integrate.quad(lambda x: d2(x) ** 2, -np.inf, np.inf)
    assert s.d2_l1 == pytest.approx(ref_l1, rel=1e-8)
    assert s.d2_l2 == pytest.approx(math.sqrt(ref_l2), rel=1e-8)
    assert bias_bound(s, gaussian_kernel(1), 0.1) == pytest.approx(0.5 * ref_l1 * 0.01, rel=1e-8)


def test_radial_moment_and_kernel_moment_constant():
    psi = gaussian_kernel(1).envelope
    phi = lambda t: (1.0 + np.asarray(t, dtype=float)) ** -2.0  # noqa: E731
    # 1-d sphere "area" is 2: int_R (1+|t|)^-2 = 2
    assert radial_moment(phi, 1, 1) == pytest.approx(2.0, rel=1e-9)
    m_psi = 1.0  # int_R psi = 1
    b1 = kernel_moment_constant(psi, phi, 1, 1)
    assert b1 == pytest.approx(2.0 * (psi(np.array([0.0]))[0] * 2.0 + m_psi), rel=1e-9)


def test_kernel_moment_constant_rejects_increasing_envelope():
    with pytest.raises(InvalidParameterError):
        kernel_moment_constant(lambda t: np.asarray(t, dtype=float) + 1.0,
                               lambda t: np.exp(-np.asarray(t)), 1)
