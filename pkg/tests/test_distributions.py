import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from kdeis.distributions import (
    bimodal_lowerbound_model,
    cauchy_model,
    exact_integral,
    gaussian_mixture_model,
    gaussian_model,
    laplace_model,
)
from kdeis.errors import InvalidParameterError

X = np.linspace(-40, 60, 1001)


def test_laplace_pdf_cdf_match_scipy():
    p = laplace_model(10, 1.5)
    assert np.allclose(p.pdf(X), stats.laplace.pdf(X, 10, 1.5), rtol=1e-13, atol=0)
    assert np.allclose(p.cdf(X), stats.laplace.cdf(X, 10, 1.5), rtol=1e-12, atol=1e-300)
    assert np.allclose(p.log_pdf(X), stats.laplace.logpdf(X, 10, 1.5), rtol=1e-13)


def test_cauchy_and_gaussian_match_scipy():
    assert np.allclose(cauchy_model(30).pdf(X), stats.cauchy.pdf(X, scale=30), rtol=1e-13)
    assert np.allclose(gaussian_model(2, 3).pdf(X), stats.norm.pdf(X, 2, 3), rtol=1e-12)


def test_mixture_matches_weighted_sum():
    m = gaussian_mixture_model([0.3, 0.7], [-1, 2], [0.5, 1.5])
    ref = 0.3 * stats.norm.pdf(X, -1, 0.5) + 0.7 * stats.norm.pdf(X, 2, 1.5)
    assert np.allclose(m.pdf(X), ref, rtol=1e-12, atol=1e-300)


def test_exact_target_value():
    # E(X-5)^2 = (10-5)^2 + 2 b^2 for Laplace(10, 1.5)
    value = exact_integral(laplace_model(10, 1.5), lambda x: (x - 5) ** 2)
    assert value == pytest.approx(29.5, abs=1e-9)


def test_laplace_variance_of_integrand():
    # Var (X-5)^2 = E(X-5)^4 - 29.5^2 with E(Y)^4 = m^4 + 6 m^2 2b^2 + 24 b^4, m=5
    p = laplace_model(10, 1.5)
    fourth = 5**4 + 6 * 25 * 2 * 1.5**2 + 24 * 1.5**4
    got = exact_integral(p, lambda x: (x - 5) ** 4) - 29.5**2
    assert got == pytest.approx(fourth - 29.5**2, rel=1e-10)
    assert fourth - 29.5**2 == pytest.approx(551.25)


def test_cauchy_normalization():
    assert exact_integral(cauchy_model(30), lambda x: np.ones_like(x)) == pytest.approx(1, abs=1e-9)


@pytest.mark.parametrize("n", [1, 10, 100])
def test_bimodal_target_mean_is_one(n):
    p = bimodal_lowerbound_model(n)
    assert exact_integral(p, lambda x: x) == pytest.approx(1.0, abs=1e-9)
    sigma = (4 * math.log(n + 1)) ** -0.5
    ref = 0.5 * stats.norm.pdf(X, -1, sigma) + 0.5 * stats.norm.pdf(X, 3, sigma)
    assert np.allclose(p.pdf(X), ref, rtol=1e-12, atol=1e-300)


def test_sampling_moments():
    rng = np.random.default_rng(1)
    x = laplace_model(10, 1.5).sample(rng, 200_000)
    assert abs(x.mean() - 10) < 4 * math.sqrt(4.5 / 2e5)
    assert stats.kstest(x, stats.laplace(10, 1.5).cdf).pvalue > 1e-3


def test_scaled_model_is_unnormalized():
    p = laplace_model(10, 1.5).scaled(7.0)
    assert not p.normalized
    assert np.allclose(p.pdf(X), 7.0 * stats.laplace.pdf(X, 10, 1.5), rtol=1e-13)


@pytest.mark.parametrize("args", [(0, 0), (0, -1)])
def test_invalid_scale_rejected(args):
    with pytest.raises(InvalidParameterError):
        laplace_model(*args)


@settings(max_examples=30, deadline=None)
@given(mu=st.floats(-50, 50), b=st.floats(0.1, 10))
def test_laplace_density_integrates_to_one(mu, b):
    assert exact_integral(laplace_model(mu, b), lambda x: np.ones_like(x)) == pytest.approx(1.0, abs=1e-8)
