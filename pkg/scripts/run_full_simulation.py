"""Run the full calibration grid: 12 scenarios x 200 replicates.

This is the long offline job (hours on a single core; use --threads on a
multicore box). Each scenario checkpoints to scenario_XXX.jsonl in the
output directory, so an interrupted run resumes where it stopped.
Results land in simulation.csv with one row per scenario x parameter.

Usage:
    python3 scripts/run_full_simulation.py --out sim_results --threads 8

For a quick smoke pass, cut the replicate count:
    python3 scripts/run_full_simulation.py --out sim_smoke --n-replicates 5
"""
import argparse
import os
import time

from rbcopula.simstudy import standard_grid, run_scenario, summary_to_table


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="sim_results", help="output directory")
    ap.add_argument("--n-replicates", type=int, default=200)
    ap.add_argument("--n-values", type=int, nargs="+", default=[300, 500])
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    scenarios = standard_grid(n_values=tuple(args.n_values),
                              n_replicates=args.n_replicates,
                              seed=args.seed)
    os.makedirs(args.out, exist_ok=True)

    summaries = []
    for k, sc in enumerate(scenarios):
        checkpoint = os.path.join(args.out, f"scenario_{k:03d}.jsonl")
        t0 = time.time()
        summary = run_scenario(sc, workers=args.threads,
                               checkpoint=checkpoint)
        summaries.append(summary)
        print(f"[{k + 1:2d}/{len(scenarios)}] phi=({sc.phi1}, {sc.phi2}) "
              f"tau={sc.tau} n={sc.n}: {summary.n_used} used, "
              f"{summary.n_failed} failed, {time.time() - t0:.0f}s")

    table = os.path.join(args.out, "simulation.csv")
    summary_to_table(summaries, table)
    print(f"wrote {table}")


if __name__ == "__main__":
    main()
