"""Calibration harness: scenario wiring, aggregation arithmetic,
determinism, checkpoint resume, and the summary table format.

The statistical calibration claims (bias/RMSE/coverage bands at real
replicate counts) live in the acceptance suite; here the scenarios are
deliberately tiny so the plumbing is exercised end to end in seconds.
"""
import json
import math

import numpy as np
import pytest
from scipy import special

from rbcopula.copulas import CopulaFamily
from rbcopula.mcmc import ChainConfig
from rbcopula.simstudy import (
    Scenario,
    StudySummary,
    TABLE_HEADER,
    aggregate,
    desk_chain_config,
    standard_grid,
    run_replicate,
    run_scenario,
    summary_to_table,
)

TINY_CHAINS = ChainConfig(n_chains=2, n_iter=400, burn_in=150, thin=5)


def tiny_scenario(n_replicates=2, tau=0.25, n=80, seed=0):
    return Scenario(0.05, 0.05, tau, n, n_replicates=n_replicates,
                    seed=seed, chains=TINY_CHAINS)


class TestScenario:
    def test_default_truth_matches_design_numbers(self):
        sc = Scenario(0.2, 0.05, 0.25, 300)
        t = sc.true_values()
        assert t["beta1_0"] == pytest.approx(special.logit(0.30), rel=1e-12)
        assert t["beta1_1"] == 0.3
        assert t["beta2_0"] == pytest.approx(special.logit(0.60), rel=1e-12)
        assert t["beta2_1"] == -0.3
        assert t["phi1"] == 0.2 and t["phi2"] == 0.05
        assert t["rho1"] == 50.0 and t["rho2"] == 50.0
        assert t["tau"] == 0.25
        assert len(t) == 9

    def test_design_uses_balanced_binary_covariate(self):
        sc = Scenario(0.05, 0.05, 0.0, 100)
        d = sc.design()
        assert d.x1.shape == (100, 2)
        assert np.all(np.isin(d.x1[:, 1], [0.0, 1.0]))
        assert d.x1[:, 1].mean() == 0.5
        assert np.array_equal(d.x1, d.x2)

    def test_default_chains_are_the_desk_scale(self):
        cfg = desk_chain_config()
        assert (cfg.n_chains, cfg.n_iter, cfg.burn_in, cfg.thin) == \
            (4, 4000, 1500, 5)

    @pytest.mark.parametrize("kwargs", [
        dict(phi1=1.0), dict(phi2=-0.1),
        dict(tau=0.3, copula=CopulaFamily.INDEPENDENCE),
        dict(tau=-0.2, copula=CopulaFamily.CLAYTON),
        dict(n=2), dict(n_replicates=0),
    ])
    def test_invalid_scenarios_rejected(self, kwargs):
        base = dict(phi1=0.05, phi2=0.05, tau=0.0, n=50)
        base.update(kwargs)
        with pytest.raises(ValueError):
            Scenario(**base)

    def test_standard_grid_enumerates_the_crossed_settings(self):
        grid = standard_grid(n_values=(300, 500), n_replicates=200)
        assert len(grid) == 12
        combos = {(sc.phi1, sc.phi2, sc.tau, sc.n) for sc in grid}
        assert (0.05, 0.05, 0.0, 300) in combos
        assert (0.2, 0.05, 0.25, 500) in combos
        assert (0.2, 0.2, 0.25, 300) in combos
        assert all(sc.n_replicates == 200 for sc in grid)
        assert all(sc.copula is CopulaFamily.GAUSSIAN for sc in grid)


class TestAggregate:
    def test_zero_noise_gives_exact_calibration(self):
        truth = {"a": 1.25, "b": -2.0}
        rows = [{"a": (1.25, 1.0, 1.5), "b": (-2.0, -2.2, -1.8)}
                for _ in range(7)]
        bias, rmse, cover = aggregate(truth, rows)
        assert bias == {"a": 0.0, "b": 0.0}
        assert rmse == {"a": 0.0, "b": 0.0}
        assert cover == {"a": 1.0, "b": 1.0}

    def test_rmse_dominates_bias(self):
        rng = np.random.default_rng(0)
        truth = {"a": 0.4}
        for _ in range(25):
            est = rng.normal(0.4, 0.3, 9)
            rows = [{"a": (e, e - 0.1, e + 0.1)} for e in est]
            bias, rmse, _ = aggregate(truth, rows)
            assert rmse["a"] >= abs(bias["a"]) - 1e-15

    def test_known_hand_values(self):
        truth = {"a": 1.0}
        rows = [{"a": (0.5, 0.0, 2.0)}, {"a": (1.5, 1.2, 1.8)}]
        bias, rmse, cover = aggregate(truth, rows)
        assert bias["a"] == pytest.approx(0.0, abs=1e-15)
        assert rmse["a"] == pytest.approx(0.5, rel=1e-12)
        assert cover["a"] == 0.5    # [0,2] contains 1.0, [1.2,1.8] does not

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="replicates"):
            aggregate({"a": 0.0}, [])


class TestRunScenario:
    def test_replicates_differ_and_are_replicate_deterministic(self):
        sc = tiny_scenario()
        a0 = run_replicate(sc, 0)
        a0_again = run_replicate(sc, 0)
        a1 = run_replicate(sc, 1)
        assert a0 == a0_again
        assert a0 != a1
        assert set(a0) == set(sc.true_values())

    def test_summary_deterministic_and_worker_invariant(self):
        sc = tiny_scenario()
        s1 = run_scenario(sc, workers=1)
        s2 = run_scenario(sc, workers=1)
        s3 = run_scenario(sc, workers=2)
        assert s1.bias == s2.bias == s3.bias
        assert s1.rmse == s3.rmse
        assert s1.coverage == s3.coverage
        assert s1.n_used == 2 and s1.n_failed == 0

    def test_checkpoint_resume_skips_finished_replicates(self, tmp_path,
                                                         monkeypatch):
        sc = tiny_scenario()
        path = tmp_path / "study.jsonl"
        full = run_scenario(sc, checkpoint=str(path))
        assert path.exists()
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert [json.loads(ln)["rep"] for ln in lines] == [0, 1]

        # drop replicate 1 from the checkpoint; the resume must recompute
        # exactly that one and agree with the full run
        path.write_text(lines[0] + "\n")
        calls = []
        import rbcopula.simstudy as mod
        real = mod.run_replicate

        def spy(s, rep):
            calls.append(rep)
            return real(s, rep)

        monkeypatch.setattr(mod, "run_replicate", spy)
        resumed = run_scenario(sc, checkpoint=str(path))
        assert calls == [1]
        assert resumed.bias == full.bias
        assert resumed.coverage == full.coverage

    def test_failed_replicates_counted_and_excluded(self, monkeypatch):
        sc = tiny_scenario(n_replicates=3)
        truth = sc.true_values()
        good = {k: (v + 0.1, v - 1.0, v + 1.0) for k, v in truth.items()}

        import rbcopula.simstudy as mod

        def fake(s, rep):
            return None if rep == 1 else good

        monkeypatch.setattr(mod, "run_replicate", fake)
        out = run_scenario(sc)
        assert out.n_failed == 1
        assert out.n_used == 2
        assert out.bias["rho1"] == pytest.approx(0.1, rel=1e-12)
        assert out.coverage["tau"] == 1.0

    def test_loose_recovery_on_a_small_run(self):
        sc = Scenario(0.05, 0.05, 0.25, 120, n_replicates=3, seed=4,
                      chains=ChainConfig(n_chains=2, n_iter=600,
                                         burn_in=200, thin=4))
        out = run_scenario(sc)
        assert out.n_used == 3
        assert abs(out.bias["beta1_0"]) < 0.4
        assert abs(out.bias["tau"]) < 0.35
        assert all(0.0 <= c <= 1.0 for c in out.coverage.values())
        assert all(out.rmse[p] >= abs(out.bias[p]) - 1e-15
                   for p in out.rmse)


class TestSummaryTable:
    def _fake_summary(self, phi1=0.05, phi2=0.2, tau=0.25, n=300):
        sc = Scenario(phi1, phi2, tau, n, n_replicates=2)
        truth = sc.true_values()
        bias = {k: 0.01 for k in truth}
        rmse = {k: 0.05 for k in truth}
        cover = {k: 0.95 for k in truth}
        return StudySummary(sc, truth, bias, rmse, cover, 2, 0)

    def test_layout_and_roundtrip(self, tmp_path):
        path = tmp_path / "table.csv"
        summary_to_table([self._fake_summary(), self._fake_summary(n=500)],
                         path)
        lines = path.read_text().splitlines()
        assert lines[0] == TABLE_HEADER
        assert len(lines) == 1 + 2 * 9
        first = lines[1].split(",")
        assert [float(first[0]), float(first[1]), float(first[2])] == \
            [0.05, 0.2, 0.25]
        assert int(first[3]) == 300
        assert first[4] == "beta1_0"
        assert float(first[5]) == pytest.approx(special.logit(0.3), rel=1e-12)
        assert float(first[6]) == 0.01
        ns = {int(ln.split(",")[3]) for ln in lines[1:]}
        assert ns == {300, 500}

    def test_empty_gives_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        summary_to_table([], path)
        assert path.read_text() == TABLE_HEADER + "\n"
