import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, stats

from rbcopula import rectbeta as rb

# frozen oracle values
BETA55_AT_HALF = 2.4609375            # Gamma(10)/Gamma(5)^2 * 0.5^8 = 630/256
MIXTURE_AT_HALF = 1.8765625           # 0.4 * 1 + 0.6 * 2.4609375
KS_CRIT_1PCT = 1.6276                 # asymptotic Kolmogorov quantile

PARAM_GRID = [
    (0.5, 0.0, 10.0),
    (0.3, 0.2, 50.0),
    (0.9, 0.5, 5.0),
    (0.05, 0.05, 80.0),
    (0.62, 0.9, 2.5),
]

interior = st.floats(min_value=1e-3, max_value=1 - 1e-3)
phis = st.floats(min_value=0.0, max_value=0.95)
rhos = st.floats(min_value=0.2, max_value=500.0)


def test_log_pdf_beta_core_value():
    p = rb.RectBetaParams(0.5, 0.0, 10.0)
    assert_allclose(rb.log_pdf(0.5, p), math.log(BETA55_AT_HALF), rtol=0, atol=1e-12)


def test_log_pdf_mixture_value():
    p = rb.RectBetaParams(0.5, 0.4, 10.0)
    assert_allclose(rb.log_pdf(0.5, p), math.log(MIXTURE_AT_HALF), rtol=0, atol=1e-12)


def test_mixture_weight_example():
    assert_allclose(rb.mixture_weight(0.9, 0.5), 0.1, rtol=0, atol=1e-15)


def test_core_mean_example():
    assert_allclose(rb.core_mean(0.3, 0.2), 3.0 / 11.0, rtol=0, atol=1e-15)


def test_phi_zero_reduces_to_beta():
    y = np.linspace(0.01, 0.99, 57)
    for mu, rho in [(0.3, 7.0), (0.5, 10.0), (0.85, 120.0)]:
        p = rb.RectBetaParams(mu, 0.0, rho)
        ref = stats.beta.logpdf(y, mu * rho, (1 - mu) * rho)
        assert_allclose(rb.log_pdf(y, p), ref, rtol=0, atol=1e-12)
        assert_allclose(rb.cdf(y, p), stats.beta.cdf(y, mu * rho, (1 - mu) * rho),
                        rtol=0, atol=1e-12)


@pytest.mark.parametrize("mu,phi,rho", PARAM_GRID)
def test_density_normalizes_and_mean_is_mu(mu, phi, rho):
    p = rb.RectBetaParams(mu, phi, rho)
    total, _ = integrate.quad(lambda t: math.exp(rb.log_pdf_kernel(t, mu, phi, rho)),
                              0.0, 1.0, limit=200)
    m, _ = integrate.quad(lambda t: t * math.exp(rb.log_pdf_kernel(t, mu, phi, rho)),
                          0.0, 1.0, limit=200)
    assert abs(total - 1.0) <= 1e-6
    assert abs(m - mu) <= 1e-6
    assert rb.mean(p) == mu


def test_cdf_matches_numeric_integration():
    # spot values against an independent quadrature of the density
    cases = [(0.25, 0.5, 0.0, 10.0), (0.6, 0.3, 0.2, 50.0), (0.1, 0.9, 0.5, 5.0)]
    for y, mu, phi, rho in cases:
        p = rb.RectBetaParams(mu, phi, rho)
        ref, _ = integrate.quad(
            lambda t: math.exp(rb.log_pdf_kernel(t, mu, phi, rho)),
            0.0, y, limit=200, epsabs=1e-12, epsrel=1e-12,
        )
        assert_allclose(rb.cdf(y, p), ref, rtol=0, atol=1e-9)


def test_cdf_endpoints_and_monotonicity():
    for mu, phi, rho in PARAM_GRID:
        p = rb.RectBetaParams(mu, phi, rho)
        assert rb.cdf(0.0, p) == 0.0
        assert rb.cdf(1.0, p) == 1.0
        vals = rb.cdf(np.linspace(0.001, 0.999, 300), p)
        assert np.all(np.diff(vals) > 0)


@pytest.mark.parametrize("mu,phi,rho", PARAM_GRID)
def test_quantile_roundtrip(mu, phi, rho):
    p = rb.RectBetaParams(mu, phi, rho)
    q = np.array([0.001, 0.025, 0.2, 0.5, 0.8, 0.975, 0.999])
    y = rb.quantile(q, p)
    err = np.abs(rb.cdf(y, p) - q)
    # resolution floor: cdf increment across 4 ulps at the solution (binding
    # only when a diverging core shape makes the cdf jump between doubles)
    floor = 4.0 * np.spacing(y) * np.exp(rb.log_pdf(y, p))
    assert np.all(err <= np.maximum(1e-10, floor))
    assert np.max(err[q <= 0.975]) <= 1e-10


def test_quantile_matches_grid_inversion():
    # independent oracle: invert the cdf on a dense grid
    mu, phi, rho, q = 0.3, 0.2, 50.0, 0.975
    p = rb.RectBetaParams(mu, phi, rho)
    grid = np.linspace(1e-9, 1 - 1e-9, 2_000_001)
    cdf_vals = rb.cdf_kernel(grid, mu, phi, rho)
    oracle = grid[np.searchsorted(cdf_vals, q)]
    assert abs(rb.quantile(q, p) - oracle) <= 1e-6


def test_sample_ks_and_mean():
    rng = np.random.default_rng(2024)
    n = 100_000
    for mu, phi, rho in [(0.3, 0.2, 50.0), (0.62, 0.9, 2.5)]:
        p = rb.RectBetaParams(mu, phi, rho)
        draws = rb.sample(p, n, rng)
        dist = stats.kstest(draws, lambda t: rb.cdf_kernel(t, mu, phi, rho)).statistic
        assert dist < KS_CRIT_1PCT / math.sqrt(n)
        assert abs(draws.mean() - mu) < 4 * draws.std() / math.sqrt(n)


def test_uniform_limit_at_half():
    p = rb.RectBetaParams(0.5, 1 - 1e-9, 10.0)
    y = np.array([0.1, 0.35, 0.5, 0.77, 0.93])
    assert_allclose(np.exp(rb.log_pdf(y, p)), np.ones_like(y), rtol=0, atol=1e-7)


@pytest.mark.parametrize(
    "mu,phi,rho",
    [(0.0, 0.1, 1.0), (1.0, 0.1, 1.0), (0.5, 1.0, 1.0), (0.5, -0.1, 1.0),
     (0.5, 0.1, 0.0), (0.5, 0.1, -3.0), (float("nan"), 0.1, 1.0)],
)
def test_domain_errors(mu, phi, rho):
    with pytest.raises(ValueError):
        rb.RectBetaParams(mu, phi, rho)


def test_log_pdf_rejects_boundary_y():
    p = rb.RectBetaParams(0.5, 0.1, 10.0)
    with pytest.raises(ValueError):
        rb.log_pdf(0.0, p)
    with pytest.raises(ValueError):
        rb.log_pdf(1.0, p)
    with pytest.raises(ValueError):
        rb.quantile(1.0, p)


@given(mu=interior, phi=phis)
def test_mean_identity_property(mu, phi):
    # omega/2 + (1 - omega) * delta recovers mu exactly up to rounding
    omega = rb.mixture_weight(mu, phi)
    delta = rb.core_mean(mu, phi)
    assert abs(0.5 * omega + (1 - omega) * delta - mu) < 1e-12


@given(mu=interior, phi=phis, rho=rhos, y=interior)
@settings(max_examples=60)
def test_density_positive_and_cdf_bounded(mu, phi, rho, y):
    p = rb.RectBetaParams(mu, phi, rho)
    assert np.isfinite(rb.log_pdf(y, p))
    c = rb.cdf(y, p)
    assert 0.0 <= c <= 1.0
