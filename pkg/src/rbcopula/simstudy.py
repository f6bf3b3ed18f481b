"""Frequentist calibration harness: simulate, refit, summarize.

A Scenario fixes the data-generating truth (contamination weights, the
dependence level, the sample size) around a default regression design:
rectangular-beta margins with logit means logit(0.30) + 0.3 x and
logit(0.60) - 0.3 x over a balanced binary covariate, precisions 50, no
random effects.  Each replicate simulates a dataset, runs the full MCMC
pipeline, and records the posterior median and 95% HPD interval of every
parameter; the study reports Monte Carlo bias, RMSE, and HPD coverage.

Replicate seeds derive from the scenario seed by counter, so any
replicate can be recomputed in isolation and a study can resume from a
checkpoint file.  Replicates are independent jobs; with workers > 1 a
bounded thread pool runs them and results are still aggregated in
replicate order, keeping the summary identical to a serial run.
"""
from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from .copulas import CopulaFamily, theta_from_tau
from .mcmc import ChainConfig, ParameterLayout, fit, posterior_summary
from .model import Dataset, ModelSpec, ParameterState, simulate_dataset

__all__ = [
    "Scenario",
    "StudySummary",
    "desk_chain_config",
    "standard_grid",
    "run_replicate",
    "run_scenario",
    "aggregate",
    "summary_to_table",
]

TABLE_HEADER = "phi1,phi2,tau,n,param,true,bias,rmse,cp"


def desk_chain_config() -> ChainConfig:
    """Shortened chains sized for a replicate inside a study (the full
    standalone-analysis defaults live in ChainConfig itself)."""
    return ChainConfig(n_chains=4, n_iter=4000, burn_in=1500, thin=5)


@dataclass
class Scenario:
    """One data-generating setting of the calibration study."""

    phi1: float
    phi2: float
    tau: float
    n: int
    n_replicates: int = 50
    copula: CopulaFamily = CopulaFamily.GAUSSIAN
    seed: int = 0
    chains: ChainConfig = field(default_factory=desk_chain_config)

    def __post_init__(self) -> None:
        self.copula = CopulaFamily(self.copula)
        for name, v in (("phi1", self.phi1), ("phi2", self.phi2)):
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {v}")
        if self.copula is CopulaFamily.INDEPENDENCE:
            if self.tau != 0.0:
                raise ValueError("independence scenarios need tau = 0")
        else:
            theta_from_tau(self.copula, self.tau)  # validates the domain
        if self.n < 4:
            raise ValueError("n must be at least 4")
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be positive")

    def model_spec(self) -> ModelSpec:
        return ModelSpec("rectbeta", "rectbeta", self.copula)

    def truth(self) -> ParameterState:
        return ParameterState(
            beta1=[special.logit(0.30), 0.3],
            beta2=[special.logit(0.60), -0.3],
            phi1=self.phi1, phi2=self.phi2,
            rho1=50.0, rho2=50.0,
            tau=self.tau if self.copula is not CopulaFamily.INDEPENDENCE
            else None,
        )

    def design(self) -> Dataset:
        """Intercept plus a balanced binary covariate, shared by both
        margins; responses are placeholders until simulate_dataset runs."""
        x = np.column_stack([np.ones(self.n),
                             (np.arange(self.n) % 2).astype(float)])
        half = np.full(self.n, 0.5)
        return Dataset(half, half.copy(), x, x.copy(), None, 0)

    def parameter_names(self) -> list[str]:
        layout = ParameterLayout(self.model_spec(), 2, 2, 0)
        return list(layout.names)

    def true_values(self) -> dict[str, float]:
        layout = ParameterLayout(self.model_spec(), 2, 2, 0)
        vals = layout.natural_from_state(self.truth())
        return dict(zip(layout.names, (float(v) for v in vals)))


def standard_grid(n_values=(300, 500), n_replicates: int = 200,
                  seed: int = 0) -> list[Scenario]:
    """The six standard data-generating settings, per sample size:
    contamination pairs {(0.05,0.05), (0.20,0.05), (0.20,0.20)} crossed
    with tau in {0, 0.25}."""
    out = []
    for n in n_values:
        for phi1, phi2 in ((0.05, 0.05), (0.20, 0.05), (0.20, 0.20)):
            for tau in (0.0, 0.25):
                out.append(Scenario(phi1, phi2, tau, int(n),
                                    n_replicates=n_replicates, seed=seed))
    return out


def _replicate_seed(master: int, rep: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=(master, rep, stream))


def run_replicate(sc: Scenario, rep: int) -> dict | None:
    """Simulate replicate `rep`, fit, and return per-parameter
    (median, hpd_low, hpd_high); None signals a failed fit."""
    data_rng = np.random.default_rng(_replicate_seed(sc.seed, rep, 0))
    data = simulate_dataset(sc.truth(), sc.model_spec(), sc.design(), data_rng)
    chain_seed = int(_replicate_seed(sc.seed, rep, 1).generate_state(1)[0])
    cfg = replace(sc.chains, seed=chain_seed)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            draws = fit(data, sc.model_spec(), cfg)
        rows = posterior_summary(draws)
    except (ValueError, RuntimeError, np.linalg.LinAlgError):
        return None
    out = {}
    for row in rows:
        trip = (row["median"], row["hpd_low"], row["hpd_high"])
        if not all(math.isfinite(v) for v in trip):
            return None
        out[row["name"]] = trip
    return out


def aggregate(true_values: dict[str, float],
              rows: list[dict]) -> tuple[dict, dict, dict]:
    """Bias, RMSE, and HPD-coverage maps over successful replicates."""
    if not rows:
        raise ValueError("no successful replicates to aggregate")
    bias, rmse, cover = {}, {}, {}
    for p, t in true_values.items():
        est = np.array([r[p][0] for r in rows])
        lo = np.array([r[p][1] for r in rows])
        hi = np.array([r[p][2] for r in rows])
        err = est - t
        bias[p] = float(np.mean(err))
        rmse[p] = float(np.sqrt(np.mean(err ** 2)))
        cover[p] = float(np.mean((lo <= t) & (t <= hi)))
    return bias, rmse, cover


@dataclass
class StudySummary:
    """Monte Carlo calibration of one scenario."""

    scenario: Scenario
    true_values: dict[str, float]
    bias: dict[str, float]
    rmse: dict[str, float]
    coverage: dict[str, float]
    n_used: int
    n_failed: int

    def to_rows(self) -> list[dict]:
        sc = self.scenario
        return [
            {"phi1": sc.phi1, "phi2": sc.phi2, "tau": sc.tau, "n": sc.n,
             "param": p, "true": self.true_values[p], "bias": self.bias[p],
             "rmse": self.rmse[p], "cp": self.coverage[p]}
            for p in self.true_values
        ]


def _load_checkpoint(path) -> dict[int, dict | None]:
    done: dict[int, dict | None] = {}
    if path is None or not os.path.exists(path):
        return done
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("failed"):
                done[int(rec["rep"])] = None
            else:
                done[int(rec["rep"])] = {
                    k: tuple(v) for k, v in rec["estimates"].items()}
    return done


def _checkpoint_line(rep: int, result: dict | None) -> str:
    if result is None:
        return json.dumps({"rep": rep, "failed": True}) + "\n"
    return json.dumps({"rep": rep,
                       "estimates": {k: list(v) for k, v in result.items()}},
                      sort_keys=True) + "\n"


def run_scenario(sc: Scenario, workers: int = 1,
                 checkpoint=None) -> StudySummary:
    """Run (or resume) every replicate of a scenario and aggregate.

    checkpoint: optional path to a JSON-lines file; finished replicates
    found there are not recomputed, and the file is rewritten in
    replicate order once the study completes.
    """
    done = _load_checkpoint(checkpoint)
    pending = [r for r in range(sc.n_replicates) if r not in done]
    results: dict[int, dict | None] = {r: done[r] for r in done
                                       if r < sc.n_replicates}

    def record(rep: int, res: dict | None) -> None:
        results[rep] = res
        if checkpoint is not None:
            with open(checkpoint, "a", encoding="utf-8") as fh:
                fh.write(_checkpoint_line(rep, res))

    if workers <= 1:
        for rep in pending:
            record(rep, run_replicate(sc, rep))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {rep: pool.submit(run_replicate, sc, rep)
                       for rep in pending}
            for rep in pending:
                record(rep, futures[rep].result())

    if checkpoint is not None:
        with open(checkpoint, "w", encoding="utf-8") as fh:
            for rep in sorted(results):
                fh.write(_checkpoint_line(rep, results[rep]))

    ordered = [results[r] for r in sorted(results)]
    good = [r for r in ordered if r is not None]
    truth = sc.true_values()
    bias, rmse, cover = aggregate(truth, good)
    return StudySummary(sc, truth, bias, rmse, cover,
                        n_used=len(good), n_failed=len(ordered) - len(good))


def summary_to_table(summaries, path) -> None:
    """Long-format CSV, one row per scenario x parameter."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TABLE_HEADER + "\n")
        for summary in summaries:
            for row in summary.to_rows():
                fh.write(",".join([
                    repr(float(row["phi1"])), repr(float(row["phi2"])),
                    repr(float(row["tau"])), str(int(row["n"])), row["param"],
                    repr(float(row["true"])), repr(float(row["bias"])),
                    repr(float(row["rmse"])), repr(float(row["cp"])),
                ]) + "\n")
