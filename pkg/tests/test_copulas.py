import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import stats

from rbcopula import copulas as cp

FAMILIES = [cp.CopulaFamily.GAUSSIAN, cp.CopulaFamily.GUMBEL, cp.CopulaFamily.CLAYTON]

unit = st.floats(min_value=0.01, max_value=0.99)


def graded_gl_nodes(n_cells=64, nodes=8, power=3.0):
    """Composite Gauss-Legendre rule on (0,1), refined toward both ends."""
    edges = 0.5 * (np.linspace(0.0, 1.0, n_cells + 1) ** power)
    edges = np.concatenate([edges, 1.0 - edges[-2::-1]])
    x, w = np.polynomial.legendre.leggauss(nodes)
    centers = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    return (centers[:, None] + half[:, None] * x[None, :]).ravel(), \
           (half[:, None] * w[None, :]).ravel()


# ---------------------------------------------------------------------------
# parameter maps
# ---------------------------------------------------------------------------

def test_theta_values():
    assert_allclose(cp.theta_from_tau("gaussian", 0.5), math.sin(math.pi / 4),
                    rtol=0, atol=1e-15)
    assert_allclose(cp.theta_from_tau("gumbel", 0.5), 2.0, rtol=0, atol=1e-15)
    assert_allclose(cp.theta_from_tau("clayton", 0.5), 2.0, rtol=0, atol=1e-15)
    assert cp.tau_from_theta("gumbel", 1.0) == 0.0
    assert cp.theta_from_tau("clayton", 0.0) == 0.0


def test_tau_roundtrip():
    taus = {
        cp.CopulaFamily.GAUSSIAN: np.linspace(-0.95, 0.95, 39),
        cp.CopulaFamily.GUMBEL: np.linspace(0.0, 0.95, 20),
        cp.CopulaFamily.CLAYTON: np.linspace(0.01, 0.95, 19),
    }
    for fam, grid in taus.items():
        for tau in grid:
            back = cp.tau_from_theta(fam, cp.theta_from_tau(fam, tau))
            assert abs(back - tau) <= 1e-12


@pytest.mark.parametrize("fam", ["gumbel", "clayton"])
def test_negative_tau_rejected(fam):
    with pytest.raises(ValueError, match="gaussian"):
        cp.theta_from_tau(fam, -0.2)


def test_gaussian_negative_tau_ok():
    spec = cp.CopulaSpec("gaussian", -0.4)
    assert spec.theta < 0
    pairs = cp.sample_pairs(spec, 20_000, np.random.default_rng(7))
    t_hat = stats.kendalltau(pairs[:, 0], pairs[:, 1]).statistic
    assert abs(t_hat + 0.4) <= 0.02


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

def test_gaussian_log_density_closed_form():
    # at u = v = 1/2 the quadratic vanishes and log c = -log(1-theta^2)/2
    spec = cp.CopulaSpec("gaussian", 0.5)
    assert_allclose(cp.log_density(spec, 0.5, 0.5), -0.5 * math.log(0.5),
                    rtol=0, atol=1e-12)


@pytest.mark.parametrize("fam", ["gaussian", "gumbel", "clayton", "independence"])
def test_independence_limit_density(fam):
    spec = cp.CopulaSpec(fam, 0.0)
    assert_allclose(cp.log_density(spec, 0.3, 0.8), 0.0, rtol=0, atol=1e-12)


@pytest.mark.parametrize("fam,tau", [
    ("gaussian", 0.4), ("gaussian", -0.6),
    ("gumbel", 0.25), ("gumbel", 0.5),
    ("clayton", 0.25), ("clayton", 0.5),
])
def test_density_matches_cdf_mixed_partial(fam, tau):
    # finite-difference oracle, step 1e-5
    spec = cp.CopulaSpec(fam, tau)
    h = 1e-5
    for u, v in [(0.5, 0.5), (0.3, 0.8), (0.15, 0.25), (0.9, 0.7)]:
        fd = (cp.cdf(spec, u + h, v + h) - cp.cdf(spec, u + h, v - h)
              - cp.cdf(spec, u - h, v + h) + cp.cdf(spec, u - h, v - h)) / (4 * h * h)
        an = math.exp(cp.log_density(spec, u, v))
        assert abs(fd - an) <= 1e-4 * max(1.0, an)


@pytest.mark.parametrize("fam,tau", [
    ("gaussian", 0.25), ("gaussian", -0.5),
    ("gumbel", 0.5), ("gumbel", 0.8),
    ("clayton", 0.5), ("clayton", 0.8),
    ("independence", 0.0),
])
def test_density_normalizes(fam, tau):
    pts, wts = graded_gl_nodes()
    uu, vv = np.meshgrid(pts, pts, indexing="ij")
    spec = cp.CopulaSpec(fam, tau)
    total = float(np.sum(np.outer(wts, wts)
                         * np.exp(cp.log_density_kernel(spec.family, spec.theta, uu, vv))))
    assert abs(total - 1.0) <= 1e-3


def test_density_swap_symmetric():
    for fam, tau in [("gaussian", 0.3), ("gumbel", 0.4), ("clayton", 0.6)]:
        spec = cp.CopulaSpec(fam, tau)
        u = np.array([0.1, 0.4, 0.85])
        v = np.array([0.7, 0.2, 0.5])
        assert_allclose(cp.log_density(spec, u, v), cp.log_density(spec, v, u),
                        rtol=0, atol=1e-12)


def test_log_density_rejects_boundary():
    spec = cp.CopulaSpec("gaussian", 0.3)
    for u, v in [(0.0, 0.5), (1.0, 0.5), (0.5, 0.0), (0.5, 1.0)]:
        with pytest.raises(ValueError):
            cp.log_density(spec, u, v)


# ---------------------------------------------------------------------------
# distribution functions
# ---------------------------------------------------------------------------

def test_cdf_values():
    assert_allclose(cp.cdf(cp.CopulaSpec("gumbel", 0.0), 0.5, 0.5), 0.25,
                    rtol=0, atol=1e-12)
    assert_allclose(cp.cdf(cp.CopulaSpec("clayton", 0.5), 0.5, 0.5), 7.0 ** -0.5,
                    rtol=0, atol=1e-12)


def test_gaussian_cdf_against_monte_carlo():
    # 10^7 paired draws; agreement within 3 binomial standard errors
    spec = cp.CopulaSpec("gaussian", tau=2.0 * math.asin(0.5) / math.pi)  # theta 0.5
    assert_allclose(spec.theta, 0.5, rtol=0, atol=1e-15)
    rng = np.random.default_rng(11)
    hits = 0
    n = 10_000_000
    chunk = 1_000_000
    for _ in range(n // chunk):
        z1 = rng.standard_normal(chunk)
        z2 = spec.theta * z1 + math.sqrt(1 - spec.theta ** 2) * rng.standard_normal(chunk)
        hits += int(np.sum((z1 <= 0.0) & (z2 <= 0.0)))
    p_hat = hits / n
    se = math.sqrt(p_hat * (1 - p_hat) / n)
    got = cp.cdf(spec, 0.5, 0.5)
    assert abs(got - p_hat) <= 3 * se
    # arcsine closed form as an exact cross-check
    assert_allclose(got, 0.25 + math.asin(0.5) / (2 * math.pi), rtol=0, atol=5e-9)


def test_bvn_quadrature_high_correlation_branch():
    for r in (-0.999, -0.95, 0.93, 0.999):
        exact = 0.25 + math.asin(r) / (2 * math.pi)
        assert abs(cp.bvn_cdf(0.0, 0.0, r) - exact) <= 5e-9


def test_cdf_boundary_conventions():
    for fam, tau in [("gaussian", 0.3), ("gumbel", 0.4), ("clayton", 0.6),
                     ("independence", 0.0)]:
        spec = cp.CopulaSpec(fam, tau)
        assert cp.cdf(spec, 0.0, 0.7) == 0.0
        assert cp.cdf(spec, 0.7, 0.0) == 0.0
        assert_allclose(cp.cdf(spec, 1.0, 0.7), 0.7, rtol=0, atol=1e-12)
        assert_allclose(cp.cdf(spec, 0.7, 1.0), 0.7, rtol=0, atol=1e-12)
        assert cp.cdf(spec, 1.0, 1.0) == 1.0


@given(u=unit, v=unit, tau=st.floats(min_value=-0.9, max_value=0.9))
@settings(max_examples=80)
def test_frechet_bounds(u, v, tau):
    fams = ["gaussian"] if tau < 0 else ["gaussian", "gumbel", "clayton"]
    for fam in fams:
        c = cp.cdf(cp.CopulaSpec(fam, tau), u, v)
        assert max(u + v - 1.0, 0.0) - 1e-9 <= c <= min(u, v) + 1e-9


# ---------------------------------------------------------------------------
# tail coefficients and samplers
# ---------------------------------------------------------------------------

def test_tail_coefficients():
    lo, up = cp.tail_coefficients(cp.CopulaSpec("gumbel", 0.5))    # theta 2
    assert_allclose((lo, up), (0.0, 2.0 - math.sqrt(2.0)), rtol=0, atol=1e-12)
    lo, up = cp.tail_coefficients(cp.CopulaSpec("clayton", 0.5))   # theta 2
    assert_allclose((lo, up), (2.0 ** -0.5, 0.0), rtol=0, atol=1e-12)
    assert cp.tail_coefficients(cp.CopulaSpec("gaussian", 0.8)) == (0.0, 0.0)
    assert cp.tail_coefficients(cp.CopulaSpec("independence", 0.0)) == (0.0, 0.0)


@pytest.mark.parametrize("fam", FAMILIES)
@pytest.mark.parametrize("tau", [0.1, 0.25, 0.4, 0.5])
def test_sampled_tau_recovery(fam, tau):
    pairs = cp.sample_pairs(cp.CopulaSpec(fam, tau), 20_000, np.random.default_rng(7))
    assert pairs.shape == (20_000, 2)
    assert np.all(pairs > 0.0) and np.all(pairs < 1.0)
    t_hat = stats.kendalltau(pairs[:, 0], pairs[:, 1]).statistic
    assert abs(t_hat - tau) <= 0.02


@pytest.mark.parametrize("fam", FAMILIES + [cp.CopulaFamily.INDEPENDENCE])
def test_sampled_margins_uniform(fam):
    tau = 0.0 if fam is cp.CopulaFamily.INDEPENDENCE else 0.4
    pairs = cp.sample_pairs(cp.CopulaSpec(fam, tau), 50_000, np.random.default_rng(3))
    for j in (0, 1):
        assert stats.kstest(pairs[:, j], "uniform").pvalue > 0.01


def test_batch_sampler_shapes_and_dependence():
    rng = np.random.default_rng(5)
    thetas = np.array([cp.theta_from_tau("clayton", t) for t in (0.0, 0.3, 0.6)])
    u, v = cp.sample_pairs_batch(cp.CopulaFamily.CLAYTON, thetas, 5_000, rng)
    assert u.shape == v.shape == (3, 5_000)
    t0 = stats.kendalltau(u[0], v[0]).statistic
    t2 = stats.kendalltau(u[2], v[2]).statistic
    assert abs(t0) <= 0.03
    assert abs(t2 - 0.6) <= 0.03
