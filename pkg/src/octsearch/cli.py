"""Command-line benchmark harness.

Example:
    octsearch --size 8 --num-objects 2 --sensor-range 6 --planner mr-pouct \\
        --trials 20 --time-per-step 0.5 --total-time 60 --out results/

Set OCTSEARCH_LOG=DEBUG (or INFO, WARNING) for log verbosity.
Exit code 0 on success, nonzero on configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .harness import PLANNER_NAMES, ExperimentConfig, run_experiment


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="octsearch",
        description="Multi-object search benchmark: octree beliefs + "
                    "multi-resolution online planning in a 3D grid.")
    p.add_argument("--size", type=int, default=8, metavar="M",
                   help="grid side length, power of two (default 8)")
    p.add_argument("--num-objects", type=int, default=2, metavar="N",
                   help="number of objects to search for (default 2)")
    p.add_argument("--sensor-range", type=int, default=6, metavar="D",
                   help="frustum far plane in cells (default 6)")
    p.add_argument("--alpha", type=float, default=1e5,
                   help="detection weight, >1; large means reliable (default 1e5)")
    p.add_argument("--beta", type=float, default=0.0,
                   help="miss weight in [0,1) (default 0)")
    p.add_argument("--planner", choices=PLANNER_NAMES, default="mr-pouct",
                   help="agent to run (default mr-pouct)")
    p.add_argument("--levels", type=str, default=None, metavar="L0,L1,..",
                   help="comma-separated resolution levels for mr-pouct / "
                        "options-pouct (default by grid size)")
    p.add_argument("--k-samples", type=int, default=10,
                   help="samples per abstract observation (default 10)")
    p.add_argument("--time-per-step", type=float, default=0.5, metavar="SEC",
                   help="planning budget per step in seconds (default 0.5)")
    p.add_argument("--total-time", type=float, default=60.0, metavar="SEC",
                   help="total planning+update budget per episode; "
                        "0 disables the cap (default 60)")
    p.add_argument("--max-steps", type=int, default=500,
                   help="step cap per episode (default 500)")
    p.add_argument("--trials", type=int, default=20,
                   help="episodes per batch, seeds base..base+trials-1 (default 20)")
    p.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    p.add_argument("--serial", action="store_true",
                   help="deterministic mode: fixed simulation count instead of "
                        "wall-clock budgets, nominal time charging")
    p.add_argument("--num-sims", type=int, default=None, metavar="K",
                   help="simulations per planning step in serial mode "
                        "(default 200)")
    p.add_argument("--out", type=str, default="out", metavar="DIR",
                   help="output directory for CSVs and logs (default out/)")
    p.add_argument("--world", type=str, default=None, metavar="FILE",
                   help="replay a fixed world file instead of generating")
    p.add_argument("--plots", action="store_true",
                   help="also write SVG bar charts of the summary")
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    levels = None
    if args.levels:
        levels = tuple(int(s) for s in args.levels.split(",") if s.strip() != "")
    total = None if args.total_time == 0 else args.total_time
    return ExperimentConfig(
        m=args.size, n=args.num_objects, d=args.sensor_range,
        alpha=args.alpha, beta=args.beta, planner=args.planner,
        levels=levels, k_samples=args.k_samples,
        time_per_step=args.time_per_step, total_time=total,
        max_steps=args.max_steps, trials=args.trials, seed=args.seed,
        serial=args.serial, num_sims=args.num_sims, out=args.out,
        world_file=args.world, plots=args.plots)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("OCTSEARCH_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
    except ValueError as exc:
        parser.error(str(exc))  # exits with code 2
    results, summary = run_experiment(config)
    ok = [r for r in results if not r.failed]
    failed = len(results) - len(ok)
    if not ok:
        print(f"{config.planner}: all {failed} trials failed", file=sys.stderr)
        return 1
    print(f"{config.planner}: {len(ok)} trials"
          + (f" ({failed} failed)" if failed else ""))
    for row in summary:
        ci_r = row["ci95_reward"]
        ci_f = row["ci95_found"]
        ci_r_s = f" +- {ci_r:.2f}" if ci_r is not None else ""
        ci_f_s = f" +- {ci_f:.2f}" if ci_f is not None else ""
        print(f"  m={row['m']} n={row['n']}: "
              f"reward {row['mean_reward']:.2f}{ci_r_s}, "
              f"found {row['mean_found']:.2f}{ci_f_s}"
              + ("  [single sample]" if row["single_sample"] else ""))
    print(f"wrote {config.out}/results.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
