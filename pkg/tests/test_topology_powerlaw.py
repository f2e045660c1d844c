import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catnet.topology import powerlaw as P


def sampled_degrees(gamma, k_sat, k_cut, size, seed, k_max=800):
    rng = np.random.default_rng(seed)
    support = np.arange(2, k_max + 1)
    pmf = P.model_pmf(gamma, k_sat, k_cut, support)
    return rng.choice(support, size=size, p=pmf)


@settings(max_examples=30, deadline=None)
@given(
    gamma=st.floats(1.2, 4.0),
    k_sat=st.floats(0.0, 20.0),
    k_cut=st.floats(10.0, 500.0),
)
def test_model_pmf_is_a_distribution(gamma, k_sat, k_cut):
    support = np.arange(1, 301)
    pmf = P.model_pmf(gamma, k_sat, k_cut, support)
    assert pmf.min() >= 0
    assert pmf.sum() == pytest.approx(1.0, abs=1e-10)
    # matches the defining formula entrywise
    raw = (support + k_sat) ** (-gamma) * np.exp(-support / k_cut)
    np.testing.assert_allclose(pmf, raw / raw.sum(), rtol=1e-12)


def test_recovery_moderate_sample():
    deg = sampled_degrees(2.5, 0.0, 400.0, 30_000, seed=3)
    fit = P.fit_adjusted_powerlaw(deg)
    assert fit.gamma == pytest.approx(2.5, abs=0.15)
    assert fit.k_sat <= 3


def test_returned_gamma_is_local_maximum():
    deg = sampled_degrees(2.2, 5.0, 200.0, 10_000, seed=5)
    fit = P.fit_adjusted_powerlaw(deg)
    ll = P.log_likelihood(fit, deg)
    assert ll >= P.log_likelihood(fit, deg, gamma=fit.gamma + 0.01)
    assert ll >= P.log_likelihood(fit, deg, gamma=fit.gamma - 0.01)


def test_too_few_observations_raises():
    with pytest.raises(P.FitError):
        P.fit_adjusted_powerlaw(np.array([3, 4, 5]))


def test_constant_degrees_raise():
    with pytest.raises(P.FitError):
        P.fit_adjusted_powerlaw(np.full(100, 7))


def test_sample_from_fit_roundtrip():
    deg = sampled_degrees(2.5, 0.0, 300.0, 20_000, seed=7)
    fit = P.fit_adjusted_powerlaw(deg)
    rng = np.random.default_rng(0)
    redraw = P.sample_from_fit(fit, 20_000, rng)
    assert redraw.min() >= fit.k_min
    assert redraw.max() <= fit.k_max
    # means of fitted model and data should be in the same ballpark
    assert np.mean(redraw) == pytest.approx(np.mean(deg), rel=0.1)


def test_bootstrap_pvalue_on_model_data():
    deg = sampled_degrees(2.3, 2.0, 150.0, 400, seed=11)
    fit = P.fit_adjusted_powerlaw(deg)
    p = P.bootstrap_pvalue(fit, deg, n_boot=100, seed=1)
    # data drawn from the fitted family: should not be firmly rejected
    assert 0.0 <= p <= 1.0
    assert p > 0.05


def test_bootstrap_deterministic_in_seed():
    deg = sampled_degrees(2.5, 0.0, 200.0, 300, seed=2)
    fit = P.fit_adjusted_powerlaw(deg)
    p1 = P.bootstrap_pvalue(fit, deg, n_boot=50, seed=9)
    p2 = P.bootstrap_pvalue(fit, deg, n_boot=50, seed=9)
    assert p1 == p2
