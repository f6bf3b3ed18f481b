"""Bridge-sampling evidence: closed-form targets, warp behavior, reporting.

Oracles: the conjugate normal-location evidence has an exact expression
(checked here against scaled quadrature before anything else relies on
it); a log-gamma target with a planted constant probes skewed posteriors;
a correlated 2-D Gaussian probes the full-covariance warp.
"""
import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from rbcopula.copulas import CopulaFamily
from rbcopula.evidence import (
    BridgeResult,
    bayes_factor_report,
    bridge_lml,
    bridge_lml_core,
    evidence_strength,
    normal_location_log_evidence,
)
from rbcopula.mcmc import ChainConfig, fit
from rbcopula.model import (
    Dataset,
    JointDensity,
    ModelSpec,
    ParameterState,
    simulate_dataset,
)


class TestClosedForm:
    def test_matches_scaled_quadrature(self):
        rng = np.random.default_rng(3)
        y = rng.normal(0.7, 1.0, 12)
        want = normal_location_log_evidence(y)
        # scale the integrand up so quad works near magnitude one
        f = lambda th: math.exp(
            stats.norm.logpdf(y, th, 1.0).sum()
            + stats.norm.logpdf(th) - want)
        val, err = integrate.quad(f, -10.0, 10.0)
        assert err < 1e-9
        assert math.log(val) == pytest.approx(0.0, abs=1e-9)

    def test_single_observation(self):
        # n=1: y ~ N(0, 2) marginally
        y = np.array([0.9])
        assert normal_location_log_evidence(y) == pytest.approx(
            stats.norm.logpdf(0.9, 0.0, math.sqrt(2.0)), rel=1e-12)


class TestBridgeCore:
    def conjugate_setup(self, seed=3, n=12):
        rng = np.random.default_rng(seed)
        y = rng.normal(0.7, 1.0, n)
        post_mean = y.sum() / (n + 1)
        post_sd = 1.0 / math.sqrt(n + 1)

        def h(z):
            th = z[0]
            return (stats.norm.logpdf(y, th, 1.0).sum()
                    + stats.norm.logpdf(th))

        return y, post_mean, post_sd, h

    def test_recovers_conjugate_evidence(self):
        y, post_mean, post_sd, h = self.conjugate_setup()
        want = normal_location_log_evidence(y)
        errs = []
        for seed in range(3):
            rng = np.random.default_rng(seed)
            zs = (post_mean + post_sd * rng.standard_normal(3000))[:, None]
            res = bridge_lml_core(zs, h, rng)
            assert res.converged and res.n_iterations < 50
            assert res.rel_change <= 1e-10
            assert not res.diagonal_fallback
            errs.append(res.logml - want)
        assert max(abs(e) for e in errs) < 5e-4

    def test_skewed_target_with_planted_constant(self):
        logc = 4.2

        def h(z):
            return logc + 3.0 * z[0] - math.exp(z[0]) - special.gammaln(3.0)

        rng = np.random.default_rng(11)
        zs = np.log(rng.gamma(3.0, size=3000))[:, None]
        res = bridge_lml_core(zs, h, rng)
        assert res.logml == pytest.approx(logc, abs=5e-3)

    def test_correlated_2d_target(self):
        mu = np.array([1.0, -2.0])
        cov = np.array([[1.0, 0.8], [0.8, 1.0]])
        prec = np.linalg.inv(cov)
        logdet = math.log(np.linalg.det(cov))

        def h(z):
            d = z - mu
            return (5.0 - 0.5 * float(d @ prec @ d) - 0.5 * logdet
                    - math.log(2.0 * math.pi))

        rng = np.random.default_rng(2)
        zs = rng.multivariate_normal(mu, cov, size=4000)
        res = bridge_lml_core(zs, h, rng)
        assert res.logml == pytest.approx(5.0, abs=5e-3)
        assert res.n_posterior == 4000 and res.n_proposal == 4000

    def test_deterministic_given_rng(self):
        y, post_mean, post_sd, h = self.conjugate_setup()
        zs = (post_mean + post_sd
              * np.random.default_rng(5).standard_normal(2000))[:, None]
        a = bridge_lml_core(zs, h, np.random.default_rng(9)).logml
        b = bridge_lml_core(zs, h, np.random.default_rng(9)).logml
        c = bridge_lml_core(zs, h, np.random.default_rng(10)).logml
        assert a == b
        assert a != c

    def test_degenerate_pool_falls_back_to_diagonal(self):
        mu = np.zeros(2)
        cov = np.array([[1.0, 0.5], [0.5, 1.0]])
        prec = np.linalg.inv(cov)

        def h(z):
            d = z - mu
            return -0.5 * float(d @ prec @ d)

        rng = np.random.default_rng(0)
        t = rng.standard_normal(500)
        zs = np.column_stack([t, 2.0 * t])  # rank-deficient pool
        with pytest.warns(RuntimeWarning, match="diagonal"):
            res = bridge_lml_core(zs, h, rng)
        assert res.diagonal_fallback
        assert math.isfinite(res.logml)

    def test_constant_coordinate_is_an_error(self):
        zs = np.column_stack([np.random.default_rng(0).standard_normal(100),
                              np.full(100, 2.0)])
        with pytest.raises(ValueError, match="constant"):
            bridge_lml_core(zs, lambda z: -0.5 * float(z @ z),
                            np.random.default_rng(1))

    def test_pool_outside_support_is_an_error(self):
        def h(z):
            return 0.0 if z[0] > 100.0 else -math.inf

        zs = np.random.default_rng(0).standard_normal((200, 1))
        with pytest.raises(RuntimeError, match="not finite at posterior"):
            bridge_lml_core(zs, h, np.random.default_rng(1))

    def test_tiny_pool_rejected(self):
        with pytest.raises(ValueError, match="10"):
            bridge_lml_core(np.zeros((5, 1)), lambda z: 0.0,
                            np.random.default_rng(0))


class TestBridgeOnFits:
    def test_evidence_of_fitted_model_is_finite_and_stable(self):
        n = 80
        x = np.column_stack([np.ones(n), (np.arange(n) >= n // 2).astype(float)])
        design = Dataset(np.full(n, 0.5), np.full(n, 0.5), x, x.copy())
        spec = ModelSpec("rectbeta", "rectbeta", CopulaFamily.INDEPENDENCE)
        truth = ParameterState(beta1=[-0.5, 0.4], beta2=[0.3, -0.2],
                               phi1=0.05, phi2=0.05, rho1=30.0, rho2=30.0)
        data = simulate_dataset(truth, spec, design, np.random.default_rng(1))
        draws = fit(data, spec,
                    ChainConfig(n_chains=2, n_iter=900, burn_in=300, thin=3,
                                seed=2))
        jd = JointDensity(data, spec)
        r1 = bridge_lml(draws, jd, np.random.default_rng(0))
        r2 = bridge_lml(draws, jd, np.random.default_rng(1))
        assert r1.converged and r2.converged
        assert math.isfinite(r1.logml)
        # two proposal seeds on the same pool agree to Monte Carlo error
        assert abs(r1.logml - r2.logml) < 0.2

    def test_draws_without_layout_are_rejected(self):
        from rbcopula.mcmc import Draws
        d = Draws(np.random.default_rng(0).standard_normal((50, 2)),
                  np.zeros(50, dtype=int), np.arange(50), ["a", "b"])
        with pytest.raises(ValueError, match="layout"):
            bridge_lml(d, None)


class TestReport:
    def test_strength_bands(self):
        assert evidence_strength(0.5) == "weak"
        assert evidence_strength(2.0) == "positive"
        assert evidence_strength(6.0) == "strong"
        assert evidence_strength(25.0) == "very strong"

    def test_ranking_and_pairwise(self):
        res = bayes_factor_report({
            "flat": -104.0,
            "skewed": BridgeResult(-100.0, 5, 0.0, 10, 10, True, False),
            "heavy": -110.5,
        })
        assert res["best"] == "skewed"
        names = [r["model"] for r in res["ranking"]]
        assert names == ["skewed", "flat", "heavy"]
        assert res["ranking"][0]["strength_vs_best"] == "best"
        assert res["ranking"][1]["delta_lml"] == pytest.approx(4.0)
        assert res["ranking"][1]["strength_vs_best"] == "positive"
        assert res["ranking"][2]["strength_vs_best"] == "very strong"
        assert res["pairwise"]["skewed"]["heavy"] == pytest.approx(10.5)
        assert res["pairwise"]["heavy"]["skewed"] == pytest.approx(-10.5)

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            bayes_factor_report({})
