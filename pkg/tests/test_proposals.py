import math

import numpy as np
import pytest
from scipy import stats

from kdeis.distributions import DensityModel, cauchy_model, gaussian_model, laplace_model
from kdeis.errors import CapabilityError, DivisionHazardError, InvalidParameterError, WeightOverflowError
from kdeis.kde import build_kde
from kdeis.proposals import (
    delta_schedule,
    importance_weight,
    importance_weights,
    make_defensive,
    tail_condition_check,
)
from kdeis.quadrature import Grid

KDE = build_kde(np.array([9.0, 10.0, 11.5]), 0.7)
X = np.linspace(-50, 80, 301)


class UniformNoSampler(DensityModel):
    """Uniform density on [0, 1] without a sampler."""

    dim = 1
    label = "uniform"
    breakpoints = (0.0, 1.0)

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= 0) & (x <= 1), 0.0, -np.inf)

    def pdf(self, x):
        return np.exp(self.log_pdf(x))


def test_mixture_density():
    q = make_defensive(KDE, cauchy_model(30), 0.3)
    ref = 0.7 * KDE.pdf(X) + 0.3 * stats.cauchy.pdf(X, scale=30)
    assert np.allclose(q.pdf(X), ref, rtol=1e-13)
    assert np.allclose(q.log_pdf(X), np.log(ref), rtol=1e-12)


def test_endpoints_are_exact_components():
    assert np.array_equal(make_defensive(KDE, cauchy_model(30), 1.0).pdf(X), cauchy_model(30).pdf(X))
    assert np.array_equal(make_defensive(KDE, cauchy_model(30), 0.0).pdf(X), KDE.pdf(X))


def test_component_frequency_is_binomial():
    q = make_defensive(KDE, cauchy_model(30), 0.25)
    _, comp = q.sample_with_components(np.random.default_rng(0), 100_000)
    assert stats.binomtest(int(comp.sum()), 100_000, 0.25).pvalue > 1e-3


def test_invalid_delta():
    with pytest.raises(InvalidParameterError):
        make_defensive(KDE, cauchy_model(30), 1.5)


def test_defense_needs_sampler():
    with pytest.raises(CapabilityError):
        make_defensive(KDE, UniformNoSampler(), 0.5)


def test_delta_schedule_values():
    assert delta_schedule("numerics_rule", 1, 32) == pytest.approx(0.25)
    assert delta_schedule("iid_optimal", 1, 32) == pytest.approx(0.25)
    assert delta_schedule("nonstationary_optimal", 1, 64) == pytest.approx(0.25)
    assert delta_schedule("general_eta", 1, 16, c0=1.0, eta=0.5) == pytest.approx(0.5)
    assert delta_schedule("numerics_rule", 1, 1, c0=5.0) == pytest.approx(1 - 1e-12)


def test_weights_ratio_and_scaling():
    p = laplace_model(10, 1.5)
    phi = cauchy_model(30)
    x = np.linspace(-20, 40, 101)
    w = importance_weights(p, phi, x)
    assert np.allclose(w, stats.laplace.pdf(x, 10, 1.5) / stats.cauchy.pdf(x, scale=30), rtol=1e-13)
    # a power-of-two scale is exact in floating point
    assert np.array_equal(importance_weights(p.scaled(2.0), p, x), np.full_like(x, 2.0))
    assert importance_weight(p, phi, 10.0) == pytest.approx(w[50])


def test_weights_log_fallback_and_hazards():
    p = gaussian_model(0, 1)
    kde = build_kde(np.array([0.0]), 0.5)
    # q(18.7) is below 1e-300 while the weight is finite
    assert kde.pdf(np.array([18.7]))[0] < 1e-300
    w = importance_weights(p, kde, np.array([18.7]))
    expected = math.exp(stats.norm.logpdf(18.7) - (stats.norm.logpdf(18.7 / 0.5) - math.log(0.5)))
    assert w[0] == pytest.approx(expected, rel=1e-10)
    narrow = build_kde(np.array([0.0]), 0.05)
    with pytest.raises(WeightOverflowError):
        importance_weights(p, narrow, np.array([2.5]))
    with pytest.raises(DivisionHazardError):
        importance_weights(p, UniformNoSampler(), np.array([0.5, 2.0]))


def test_tail_condition_verdicts():
    ok = tail_condition_check(laplace_model(0, 1.5), cauchy_model(30), 20.0,
                              Grid(-1000, 1000, 20001))
    assert ok.feasible and math.isfinite(ok.bound)
    bad = tail_condition_check(cauchy_model(1), gaussian_model(0, 1), 5.0,
                               Grid(-1000, 1000, 20001))
    assert not bad.feasible and bad.bound == math.inf
