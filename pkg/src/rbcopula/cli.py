"""Command line front end: fit, compare, diagnose, simulate.

Configuration is a YAML file; flags override the seed, thread count, and
output directory.  All artifacts are plain CSV and JSON written without
timestamps, so a rerun of the same command is byte-identical, and the
thread count never changes any output (parallelism only reorders work).

Exit codes: 0 success, 2 validation error (bad config, bad data, bad
flags), 3 convergence-gate failure (some PSRF above 1.05 with the gate
enabled).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, replace

import numpy as np
import yaml

from .copulas import CopulaFamily
from .diagnostics import (
    copula_diagnostics,
    curves_to_csv,
    scaled_rank_residuals,
)
from .evidence import bayes_factor_report, bridge_lml
from .mcmc import ChainConfig, Draws, ParameterLayout, fit, posterior_summary
from .model import Dataset, JointDensity, ModelSpec, standard_variants
from .simstudy import (
    Scenario,
    desk_chain_config,
    standard_grid,
    run_scenario,
    summary_to_table,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
PSRF_GATE = 1.05

# fixed rng stream tags so every command derives independent, reproducible
# generators from the run seed
_STREAM_RESIDUALS = 2
_STREAM_ENVELOPE = 3
_STREAM_BRIDGE = 4


class CliError(Exception):
    """Validation problem; the message names the offending file/row/flag."""


# ---------------------------------------------------------------------------
# configuration

_CHAIN_KEYS = {"n_chains", "n_iter", "burn_in", "thin", "target_accept",
               "adapt_window", "init_step"}
_DIAG_KEYS = {"n_sim", "b_envelope"}
_MODEL_KEYS = {"variant", "margin1", "margin2", "copula",
               "covariates1", "covariates2", "group"}
_TOP_KEYS = {"data", "responses", "model", "chains", "diagnostics",
             "seed", "percent_scale"}


@dataclass
class RunConfig:
    """Validated contents of a fit/diagnose configuration file."""

    data: str
    responses: tuple[str, str]
    spec: ModelSpec
    covariates1: list[str]
    covariates2: list[str]
    group: str | None
    chains: ChainConfig
    n_sim: int = 1000
    b_envelope: int = 500
    seed: int = 0
    percent_scale: bool = False

    def echo(self) -> dict:
        """Canonical config echo for artifacts: everything that affects
        the numbers, nothing that does not (no output dir, no threads)."""
        return {
            "data": self.data,
            "responses": list(self.responses),
            "model": {
                "margin1": self.spec.margin1,
                "margin2": self.spec.margin2,
                "copula": self.spec.copula.value,
                "random_intercepts": self.spec.random_intercepts,
                "covariates1": self.covariates1,
                "covariates2": self.covariates2,
                "group": self.group,
            },
            "chains": asdict(replace(self.chains, seed=self.seed)),
            "diagnostics": {"n_sim": self.n_sim,
                            "b_envelope": self.b_envelope},
            "seed": self.seed,
            "percent_scale": self.percent_scale,
        }

    def model_name(self) -> str:
        for name, spec in standard_variants().items():
            if (spec.margin1, spec.margin2, spec.copula) == \
                    (self.spec.margin1, self.spec.margin2, self.spec.copula):
                return name
        return f"{self.spec.margin1}-{self.spec.margin2}-{self.spec.copula.value}"


def _load_yaml(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise CliError(f"{path}: no such file")
    except yaml.YAMLError as e:
        raise CliError(f"{path}: not valid YAML ({e})")
    if not isinstance(raw, dict):
        raise CliError(f"{path}: top level must be a mapping")
    return raw


def _check_keys(raw: dict, allowed: set, where: str) -> None:
    unknown = set(raw) - allowed
    if unknown:
        raise CliError(f"{where}: unknown key '{sorted(unknown)[0]}'")


def load_run_config(path, seed_override=None,
                    percent_flag=False) -> RunConfig:
    raw = _load_yaml(path)
    _check_keys(raw, _TOP_KEYS, str(path))
    for key in ("data", "responses", "model"):
        if key not in raw:
            raise CliError(f"{path}: missing required key '{key}'")
    responses = raw["responses"]
    if (not isinstance(responses, (list, tuple)) or len(responses) != 2
            or not all(isinstance(r, str) for r in responses)):
        raise CliError(f"{path}: 'responses' must name exactly two columns")

    model = raw["model"]
    if not isinstance(model, dict):
        raise CliError(f"{path}: 'model' must be a mapping")
    _check_keys(model, _MODEL_KEYS, f"{path}: model")
    if "variant" in model:
        variants = standard_variants()
        if model["variant"] not in variants:
            raise CliError(
                f"{path}: model.variant '{model['variant']}' is not one of "
                f"{sorted(variants)}")
        base = variants[model["variant"]]
        margin1, margin2, copula = base.margin1, base.margin2, base.copula
    else:
        try:
            margin1 = model["margin1"]
            margin2 = model["margin2"]
            copula = CopulaFamily(model["copula"])
        except KeyError as e:
            raise CliError(f"{path}: model block missing key {e}")
        except ValueError:
            raise CliError(
                f"{path}: model.copula '{model['copula']}' is not one of "
                "independence/gaussian/gumbel/clayton")
    group = model.get("group")
    try:
        spec = ModelSpec(margin1, margin2, copula,
                         random_intercepts=group is not None)
    except ValueError as e:
        raise CliError(f"{path}: {e}")

    chains_raw = raw.get("chains", {}) or {}
    _check_keys(chains_raw, _CHAIN_KEYS, f"{path}: chains")
    try:
        chains = replace(ChainConfig(), **chains_raw)
    except (TypeError, ValueError) as e:
        raise CliError(f"{path}: chains block invalid ({e})")

    diag_raw = raw.get("diagnostics", {}) or {}
    _check_keys(diag_raw, _DIAG_KEYS, f"{path}: diagnostics")

    seed = raw.get("seed", 0)
    if seed_override is not None:
        seed = seed_override
    if not isinstance(seed, int):
        raise CliError(f"{path}: seed must be an integer")

    return RunConfig(
        data=str(raw["data"]),
        responses=(responses[0], responses[1]),
        spec=spec,
        covariates1=list(model.get("covariates1", []) or []),
        covariates2=list(model.get("covariates2", []) or []),
        group=group,
        chains=replace(chains, seed=seed),
        n_sim=int(diag_raw.get("n_sim", 1000)),
        b_envelope=int(diag_raw.get("b_envelope", 500)),
        seed=seed,
        percent_scale=bool(raw.get("percent_scale", False)) or percent_flag,
    )


# ---------------------------------------------------------------------------
# data ingestion

def _parse_cell(cell: str, row: int, col: str, path) -> float:
    try:
        return float(cell)
    except ValueError:
        raise CliError(
            f"{path}: non-numeric value '{cell}' in row {row}, column '{col}'")


def ingest_csv(path, cfg: RunConfig) -> Dataset:
    """Read and validate the dataset named by the config.

    Row numbers in error messages are 1-based over the data rows (the
    header is row 0).  With percent scaling, responses are divided by 100
    before the open-interval check.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise CliError(f"{path}: no such file")
    if not rows:
        raise CliError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if not body:
        raise CliError(f"{path}: no data rows")

    needed = list(cfg.responses) + cfg.covariates1 + cfg.covariates2
    if cfg.group:
        needed.append(cfg.group)
    index = {}
    for col in needed:
        if col not in header:
            raise CliError(f"{path}: missing column '{col}' "
                           f"(header has {header})")
        index[col] = header.index(col)

    for i, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise CliError(f"{path}: row {i} has {len(row)} fields, "
                           f"header has {len(header)}")

    def numeric(col):
        j = index[col]
        return np.array([_parse_cell(r[j], i, col, path)
                         for i, r in enumerate(body, start=1)])

    ys = []
    for col in cfg.responses:
        y = numeric(col)
        if cfg.percent_scale:
            y = y / 100.0
        bad = [i + 1 for i, v in enumerate(y) if not 0.0 < v < 1.0]
        if bad:
            raise CliError(
                f"{path}: response '{col}' must lie in the open interval "
                f"(0, 1); offending rows {bad[:20]}")
        ys.append(y)

    def design(cols):
        parts = [np.ones(len(body))]
        parts.extend(numeric(c) for c in cols)
        return np.column_stack(parts)

    group_codes, n_groups = None, 0
    if cfg.group:
        labels = [r[index[cfg.group]] for r in body]
        uniq = sorted(set(labels))
        code = {lab: k for k, lab in enumerate(uniq)}
        group_codes = np.array([code[lab] for lab in labels])
        n_groups = len(uniq)

    try:
        return Dataset(ys[0], ys[1], design(cfg.covariates1),
                       design(cfg.covariates2), group_codes, n_groups)
    except ValueError as e:
        raise CliError(f"{path}: {e}")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# artifacts

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, CopulaFamily):
        return obj.value
    return obj


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fit_once(cfg: RunConfig, out_dir) -> tuple[Dataset, Draws, list[dict]]:
    data = ingest_csv(cfg.data, cfg)
    draws = fit(data, cfg.spec, cfg.chains)
    rows = posterior_summary(draws)
    os.makedirs(out_dir, exist_ok=True)
    draws.to_csv(os.path.join(out_dir, "draws.csv"))
    return data, draws, rows


def _psrf_report(rows, gate_enabled: bool):
    finite = [r["psrf"] for r in rows if math.isfinite(r["psrf"])]
    worst = max(finite) if finite else math.nan
    passed = not gate_enabled or (math.isfinite(worst) and worst <= PSRF_GATE)
    return worst, passed


def cmd_fit(args) -> int:
    cfg = load_run_config(args.config, args.seed, args.percent_scale)
    out_dir = args.output_dir or "."
    data, draws, rows = _fit_once(cfg, out_dir)
    worst, passed = _psrf_report(rows, not args.no_psrf_gate)

    summary = {
        "command": "fit",
        "model_name": cfg.model_name(),
        "config": cfg.echo(),
        "data": {"path": cfg.data, "sha256": _sha256(cfg.data),
                 "n": data.n, "n_groups": data.n_groups},
        "parameters": rows,
        "max_psrf": worst,
        "psrf_gate": {"threshold": PSRF_GATE,
                      "enabled": not args.no_psrf_gate,
                      "passed": passed},
        "acceptance": draws.meta.get("acceptance", {}),
        "clamp_events": draws.meta.get("clamp_events", 0),
    }
    _write_json(os.path.join(out_dir, "summary.json"), summary)

    with open(os.path.join(out_dir, "psrf.txt"), "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(f"{r['name']} {repr(r['psrf'])}\n")
        verdict = ("DISABLED" if args.no_psrf_gate
                   else "PASS" if passed else "FAIL")
        fh.write(f"max {repr(worst)} threshold {PSRF_GATE} {verdict}\n")

    print(f"{cfg.model_name()}: n={data.n}, "
          f"{draws.values.shape[0]} retained draws, max PSRF {worst:.4f}")
    for r in rows:
        print(f"  {r['name']:>10s}  median {r['median']:+.4f}  "
              f"95% HPD [{r['hpd_low']:+.4f}, {r['hpd_high']:+.4f}]")
    if not passed:
        print(f"convergence gate: max PSRF {worst:.4f} > {PSRF_GATE}; "
              "rerun with longer chains or --no-psrf-gate to accept",
              file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def _load_fit_dir(fit_dir):
    """Rebuild (config, data, draws-with-layout, summary) from artifacts."""
    summary_path = os.path.join(fit_dir, "summary.json")
    draws_path = os.path.join(fit_dir, "draws.csv")
    for p in (summary_path, draws_path):
        if not os.path.exists(p):
            raise CliError(f"{fit_dir}: missing fit artifact {p}")
    with open(summary_path, encoding="utf-8") as fh:
        summary = json.load(fh)
    echo = summary["config"]
    cfg = RunConfig(
        data=echo["data"],
        responses=tuple(echo["responses"]),
        spec=ModelSpec(echo["model"]["margin1"], echo["model"]["margin2"],
                       CopulaFamily(echo["model"]["copula"]),
                       random_intercepts=echo["model"]["random_intercepts"]),
        covariates1=list(echo["model"]["covariates1"]),
        covariates2=list(echo["model"]["covariates2"]),
        group=echo["model"]["group"],
        chains=ChainConfig(**echo["chains"]),
        n_sim=echo["diagnostics"]["n_sim"],
        b_envelope=echo["diagnostics"]["b_envelope"],
        seed=echo["seed"],
        percent_scale=echo["percent_scale"],
    )
    data = ingest_csv(cfg.data, cfg)
    digest = _sha256(cfg.data)
    if digest != summary["data"]["sha256"]:
        raise CliError(
            f"{cfg.data}: contents changed since the fit in {fit_dir} "
            f"(sha256 {digest} != {summary['data']['sha256']})")
    draws = Draws.from_csv(draws_path)
    layout = ParameterLayout(cfg.spec, data.p1, data.p2,
                             data.n_groups if cfg.spec.random_intercepts
                             else 0)
    if list(layout.names) != draws.names:
        raise CliError(f"{fit_dir}: draws.csv columns do not match the "
                       f"model in summary.json")
    draws.layout = layout
    return cfg, data, draws, summary


def _residual_block(cfg, data, draws):
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=(cfg.seed, _STREAM_RESIDUALS)))
    res = scaled_rank_residuals(data, cfg.spec, draws, rng, n_sim=cfg.n_sim)
    return res


def cmd_compare(args) -> int:
    fits = [_load_fit_dir(d) for d in args.fit_dirs]
    digests = {f[3]["data"]["sha256"] for f in fits}
    if len(digests) > 1:
        raise CliError("compare: the fits were made on different datasets "
                       f"(sha256 values {sorted(digests)})")
    out_dir = args.output_dir or "."
    os.makedirs(out_dir, exist_ok=True)

    lml = {}
    tests = {}
    for cfg, data, draws, summary in fits:
        name = summary["model_name"]
        if name in lml:
            raise CliError(f"compare: duplicate model name '{name}'")
        jd = JointDensity(data, cfg.spec)
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=(cfg.seed, _STREAM_BRIDGE)))
        lml[name] = bridge_lml(draws, jd, rng=rng)
        tests[name] = _residual_block(cfg, data, draws)

    report = bayes_factor_report(lml)
    rank = report["ranking"]

    path = os.path.join(out_dir, "comparison.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("model,lml,delta_lml,strength_vs_best,"
                 "uniformity1,dispersion1,outliers1,"
                 "uniformity2,dispersion2,outliers2\n")
        for entry in rank:
            res = tests[entry["model"]]
            cells = [entry["model"], repr(float(entry["logml"])),
                     repr(float(entry["delta_lml"])),
                     entry["strength_vs_best"]]
            for j in (0, 1):
                cells += [repr(float(res.p_uniformity[j])),
                          repr(float(res.p_dispersion[j])),
                          repr(float(res.p_outlier[j]))]
            fh.write(",".join(cells) + "\n")

    _write_json(os.path.join(out_dir, "comparison.json"), {
        "command": "compare",
        "best": report["best"],
        "ranking": rank,
        "pairwise": report["pairwise"],
        "residual_tests": {m: tests[m].as_dict() for m in tests},
    })

    print(f"{'model':<22s} {'LML':>12s} {'dLML':>8s}  "
          f"{'unif1':>6s} {'disp1':>6s} {'outl1':>6s} "
          f"{'unif2':>6s} {'disp2':>6s} {'outl2':>6s}")
    for entry in rank:
        res = tests[entry["model"]]
        print(f"{entry['model']:<22s} {entry['logml']:>12.3f} "
              f"{entry['delta_lml']:>8.3f}  "
              f"{res.p_uniformity[0]:>6.3f} {res.p_dispersion[0]:>6.3f} "
              f"{res.p_outlier[0]:>6.3f} {res.p_uniformity[1]:>6.3f} "
              f"{res.p_dispersion[1]:>6.3f} {res.p_outlier[1]:>6.3f}")
    print(f"best: {report['best']}")
    return EXIT_OK


_FEATURED = {
    CopulaFamily.GUMBEL: "upper_tail",
    CopulaFamily.CLAYTON: "lower_tail",
    CopulaFamily.GAUSSIAN: "upper_tail",
    CopulaFamily.INDEPENDENCE: "upper_tail",
}


def cmd_diagnose(args) -> int:
    cfg, data, draws, summary = _load_fit_dir(args.fit_dir)
    out_dir = args.output_dir or args.fit_dir
    os.makedirs(out_dir, exist_ok=True)

    res = _residual_block(cfg, data, draws)
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=(cfg.seed, _STREAM_ENVELOPE)))
    curves = copula_diagnostics(data, cfg.spec, draws, rng,
                                b_replicates=cfg.b_envelope)
    curves_to_csv(curves, os.path.join(out_dir, "curves.csv"))

    violations = {}
    for name in ("upper_tail", "lower_tail", "quadrant"):
        mean = curves.mean(name)
        lo, hi = curves.lo[name], curves.hi[name]
        ok = ~(np.isnan(mean) | np.isnan(lo) | np.isnan(hi))
        out = (mean[ok] < lo[ok]) | (mean[ok] > hi[ok])
        violations[name] = {"fraction": float(out.mean()) if ok.any()
                            else math.nan,
                            "checked_points": int(ok.sum())}

    payload = {
        "command": "diagnose",
        "model_name": summary["model_name"],
        "featured_curves": [_FEATURED[cfg.spec.copula], "quadrant"],
        "residual_tests": res.as_dict(),
        "envelope_violations": violations,
        "n_envelope": curves.n_envelope,
        "grid": curves.grid,
    }
    _write_json(os.path.join(out_dir, "diagnostics.json"), payload)

    print(f"{summary['model_name']}: residual tests "
          f"(uniformity/dispersion/outliers)")
    for j, label in ((0, "margin1"), (1, "margin2")):
        print(f"  {label}: {res.p_uniformity[j]:.3f} "
              f"{res.p_dispersion[j]:.3f} {res.p_outlier[j]:.3f}")
    for name, v in violations.items():
        print(f"  envelope violations {name}: {v['fraction']:.3f} "
              f"over {v['checked_points']} grid points")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

_SCENARIO_KEYS = {"phi1", "phi2", "tau", "n", "n_replicates", "copula",
                  "seed"}


def _scenario_from_dict(raw, chains, seed, force_seed, path) -> Scenario:
    _check_keys(raw, _SCENARIO_KEYS, f"{path}: scenario")
    for key in ("phi1", "phi2", "tau", "n"):
        if key not in raw:
            raise CliError(f"{path}: scenario missing key '{key}'")
    kwargs = dict(raw)
    if "copula" in kwargs:
        try:
            kwargs["copula"] = CopulaFamily(kwargs["copula"])
        except ValueError:
            raise CliError(f"{path}: unknown copula '{kwargs['copula']}'")
    if force_seed:
        kwargs["seed"] = seed
    else:
        kwargs.setdefault("seed", seed)
    try:
        return Scenario(chains=chains, **kwargs)
    except (TypeError, ValueError) as e:
        raise CliError(f"{path}: invalid scenario ({e})")


def load_scenarios(path, seed_override=None) -> list[Scenario]:
    raw = _load_yaml(path)
    _check_keys(raw, {"scenarios", "standard_grid", "chains", "seed"}, str(path))
    seed = raw.get("seed", 0)
    if seed_override is not None:
        seed = seed_override
    chains_raw = raw.get("chains", {}) or {}
    _check_keys(chains_raw, _CHAIN_KEYS, f"{path}: chains")
    try:
        chains = replace(desk_chain_config(), **chains_raw)
    except (TypeError, ValueError) as e:
        raise CliError(f"{path}: chains block invalid ({e})")

    if "standard_grid" in raw:
        grid_raw = raw["standard_grid"] or {}
        _check_keys(grid_raw, {"n_values", "n_replicates"},
                    f"{path}: standard_grid")
        scenarios = standard_grid(
            n_values=tuple(grid_raw.get("n_values", (300, 500))),
            n_replicates=int(grid_raw.get("n_replicates", 200)),
            seed=seed)
        return [replace(sc, chains=chains) for sc in scenarios]

    if "scenarios" not in raw:
        raise CliError(f"{path}: need either 'scenarios' or 'standard_grid'")
    items = raw["scenarios"]
    if not isinstance(items, list) or not items:
        raise CliError(f"{path}: 'scenarios' must be a non-empty list")
    return [_scenario_from_dict(item, chains, seed,
                                seed_override is not None, path)
            for item in items]


def cmd_simulate(args) -> int:
    scenarios = load_scenarios(args.config, args.seed)
    out_dir = args.output_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    summaries = []
    for k, sc in enumerate(scenarios):
        checkpoint = os.path.join(out_dir, f"scenario_{k:03d}.jsonl")
        summary = run_scenario(sc, workers=args.threads,
                               checkpoint=checkpoint)
        summaries.append(summary)
        print(f"scenario {k}: phi=({sc.phi1}, {sc.phi2}) tau={sc.tau} "
              f"n={sc.n} -> {summary.n_used} used, "
              f"{summary.n_failed} failed")
    summary_to_table(summaries, os.path.join(out_dir, "simulation.csv"))
    print(f"wrote {os.path.join(out_dir, 'simulation.csv')}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument plumbing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rbcopula",
        description="Robust Bayesian copula regression for paired "
                    "continuous proportions.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="YAML configuration file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="worker bound for replicate-level parallelism")
        p.add_argument("--output-dir", default=None,
                       help="directory for artifacts (default: current)")

    p_fit = sub.add_parser("fit", help="fit one model and write draws, "
                                       "summary, and PSRF report")
    common(p_fit)
    p_fit.add_argument("--no-psrf-gate", action="store_true",
                       help="do not fail on PSRF above 1.05")
    p_fit.add_argument("--percent-scale", action="store_true",
                       help="responses are percentages; divide by 100")
    p_fit.set_defaults(func=cmd_fit)

    p_cmp = sub.add_parser("compare", help="rank fitted models by bridge-"
                                           "sampling evidence")
    p_cmp.add_argument("fit_dirs", nargs="+",
                       help="fit output directories to compare")
    p_cmp.add_argument("--seed", type=int, default=None, help=argparse.SUPPRESS)
    p_cmp.add_argument("--threads", type=int, default=1,
                       help=argparse.SUPPRESS)
    p_cmp.add_argument("--output-dir", default=None,
                       help="directory for the comparison table")
    p_cmp.set_defaults(func=cmd_compare)

    p_diag = sub.add_parser("diagnose", help="residual tests and dependence "
                                             "curves for one fit")
    p_diag.add_argument("fit_dir", help="fit output directory")
    p_diag.add_argument("--output-dir", default=None,
                        help="directory for diagnostics (default: fit dir)")
    p_diag.set_defaults(func=cmd_diagnose)

    p_sim = sub.add_parser("simulate", help="run a frequentist calibration "
                                            "study from a scenario file")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
