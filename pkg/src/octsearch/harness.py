"""Benchmark harness: experiment configuration, seeded trial batches over
the planner zoo, aggregation with t-distribution confidence intervals, and
CSV/SVG outputs.

Serial mode replaces every wall-clock planning budget with a fixed
simulation count and charges the nominal per-step time instead of measured
time, which makes a whole batch bit-reproducible. Wall mode measures and
charges real planning plus belief-update time against the total budget,
like the timed experiments it mirrors.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._impl import kernels
from .belief import OctreeBelief
from .domain import RewardSpec, SensorModel
from .geometry import FrustumParams
from .planners import (
    MrPouctPlanner,
    PlannerConfig,
    PomcpPlanner,
    execute_step,
)
from .sim import Episode, ExhaustiveSweep, WorldSpec, generate_world, random_policy

log = logging.getLogger("octsearch")

derive_seed = kernels.derive_seed

PLANNER_NAMES = ("mr-pouct", "pouct", "options-pouct", "pomcp",
                 "exhaustive", "random")

RESULTS_HEADER = "trial,planner,m,n,d,alpha,beta,seed,steps,reward,found,wall_time"

DEFAULT_SERIAL_SIMS = 200


@dataclass
class ExperimentConfig:
    m: int = 8
    n: int = 2
    d: int = 6
    alpha: float = 1e5
    beta: float = 0.0
    planner: str = "mr-pouct"
    levels: tuple[int, ...] | None = None
    k_samples: int = 10
    time_per_step: float = 0.5
    total_time: float | None = 60.0
    max_steps: int = 500
    trials: int = 20
    seed: int = 0
    serial: bool = False
    num_sims: int | None = None
    out: str = "out"
    world_file: str | None = None
    plots: bool = False

    def __post_init__(self) -> None:
        if self.planner not in PLANNER_NAMES:
            raise ValueError(
                f"unknown planner {self.planner!r}; choose from {PLANNER_NAMES}")
        if self.m < 2 or self.m & (self.m - 1):
            raise ValueError("size must be a power of two, at least 2")
        if self.n < 1:
            raise ValueError("need at least one object")
        if self.d < 1:
            raise ValueError("sensor range must be at least 1")
        if self.alpha <= 1:
            raise ValueError("alpha must exceed 1")
        if not 0 <= self.beta < 1:
            raise ValueError("beta must lie in [0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.time_per_step <= 0:
            raise ValueError("time budget must be positive")
        if self.total_time is not None and self.total_time <= 0:
            raise ValueError("total time budget must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


@dataclass
class TrialResult:
    trial: int
    planner: str
    m: int
    n: int
    d: int
    alpha: float
    beta: float
    seed: int
    steps: int
    reward: float
    found: int
    wall_time: float
    failed: bool = False


def _sensor(config: ExperimentConfig) -> SensorModel:
    return SensorModel(alpha=config.alpha, beta=config.beta,
                       frustum=FrustumParams(far=config.d))


def _planner_config(config: ExperimentConfig) -> PlannerConfig:
    num_sims = config.num_sims
    if config.serial and num_sims is None:
        num_sims = DEFAULT_SERIAL_SIMS
    return PlannerConfig(time_budget_per_step=config.time_per_step,
                         num_sims=num_sims, k_samples=config.k_samples)


def _make_world(config: ExperimentConfig, trial: int) -> WorldSpec:
    seed = config.seed + trial
    if config.world_file:
        return WorldSpec.load(config.world_file, d=config.d, seed=seed)
    return generate_world(config.m, config.n, config.d, seed)


def run_trial(config: ExperimentConfig, trial: int) -> tuple[TrialResult, list[dict]]:
    """One seeded episode with the configured agent; returns the result row
    and the per-step episode log."""
    world = _make_world(config, trial)
    sensor = _sensor(config)
    rewards = RewardSpec()
    episode = Episode(world, sensor, rewards, max_steps=config.max_steps,
                      total_time=config.total_time)
    rng = np.random.default_rng(derive_seed(config.seed, trial, 1))
    planner_seed = derive_seed(config.seed, trial, 2)
    t0 = time.perf_counter()

    if config.planner in ("exhaustive", "random"):
        sweep = ExhaustiveSweep(world.m) if config.planner == "exhaustive" else None
        last_obs = None
        while not episode.done:
            if sweep is not None:
                action = sweep.next_action(episode.state.robot, last_obs)
            else:
                action = random_policy(rng)
            last_obs, _ = episode.step(action, rng)
    else:
        pcfg = _planner_config(config)
        object_ids = tuple(world.objects)
        common = dict(m=world.m, object_ids=object_ids, sensor=sensor,
                      rewards=rewards, config=pcfg, obstacles=world.obstacles,
                      seed=planner_seed)
        beliefs: dict[int, OctreeBelief] | None
        if config.planner == "pomcp":
            planner = PomcpPlanner(**common)
            beliefs = None
        elif config.planner == "pouct":
            planner = MrPouctPlanner(levels=(0,), name="pouct", **common)
            beliefs = {oid: OctreeBelief.new_uniform(world.m) for oid in object_ids}
        elif config.planner == "options-pouct":
            lmax = world.m.bit_length() - 1
            source = config.levels or ((0, 1) if world.m <= 8 else (0, 1, 2))
            mo_levels = tuple(sorted({min(l, lmax) for l in source if l > 0})) or (1,)
            planner = MrPouctPlanner(levels=(0,), moveop_levels=mo_levels,
                                     name="options-pouct", **common)
            beliefs = {oid: OctreeBelief.new_uniform(world.m) for oid in object_ids}
        else:
            planner = MrPouctPlanner(levels=config.levels, name="mr-pouct", **common)
            beliefs = {oid: OctreeBelief.new_uniform(world.m) for oid in object_ids}

        while not episode.done:
            p0 = time.perf_counter()
            decision = planner.plan(episode.state.robot, beliefs)
            plan_dt = time.perf_counter() - p0
            if config.serial:
                episode.charge_time(config.time_per_step if decision.charged else 0.0)
            else:
                episode.charge_time(plan_dt)
            if episode.done:
                break
            u0 = time.perf_counter()
            act = decision.plan if decision.plan is not None else decision.action
            _, obs, beliefs = execute_step(episode, act, beliefs, sensor, rng)
            if isinstance(planner, PomcpPlanner):
                planner.update(decision.action, obs, episode.state.robot)
            if not config.serial:
                episode.charge_time(time.perf_counter() - u0)

    wall = 0.0 if config.serial else time.perf_counter() - t0
    result = TrialResult(
        trial=trial, planner=config.planner, m=world.m, n=world.n, d=config.d,
        alpha=config.alpha, beta=config.beta, seed=config.seed + trial,
        steps=episode.t, reward=episode.discounted_reward,
        found=episode.found_count, wall_time=wall)
    return result, episode.log


def run_batch(config: ExperimentConfig) -> tuple[list[TrialResult], list[dict]]:
    """Run all trials; a trial that raises is recorded as failed and the
    batch continues. Returns (results incl. failed rows, episode logs)."""

    def one(trial: int):
        try:
            return run_trial(config, trial)
        except Exception:
            log.exception("trial %d failed", trial)
            return (TrialResult(trial=trial, planner=config.planner, m=config.m,
                                n=config.n, d=config.d, alpha=config.alpha,
                                beta=config.beta, seed=config.seed + trial,
                                steps=0, reward=0.0, found=0, wall_time=0.0,
                                failed=True), [])

    workers = 1 if config.serial else max(1, int(os.environ.get("OCTSEARCH_WORKERS", "1")))
    if workers == 1:
        outcomes = [one(t) for t in range(config.trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, range(config.trials)))
    results = [r for r, _ in outcomes]
    logs = [lg for _, lg in outcomes]
    return results, logs


def _t_ci95(values: Sequence[float]) -> float | None:
    """Half-width of the 95% t confidence interval; None for one sample."""
    k = len(values)
    if k < 2:
        return None
    from scipy import stats

    sd = float(np.std(values, ddof=1))
    return float(stats.t.ppf(0.975, k - 1) * sd / math.sqrt(k))


def aggregate(results: Iterable[TrialResult]) -> list[dict]:
    """Per (planner, m, n) group: mean and 95% CI of reward and found.
    Failed trials are excluded; single-sample groups get flagged, CI-less
    rows."""
    groups: dict[tuple, list[TrialResult]] = {}
    for r in results:
        if r.failed:
            continue
        groups.setdefault((r.planner, r.m, r.n), []).append(r)
    rows = []
    for (planner, m, n), rs in sorted(groups.items()):
        rewards = [r.reward for r in rs]
        founds = [float(r.found) for r in rs]
        rows.append({
            "planner": planner, "m": m, "n": n, "trials": len(rs),
            "mean_reward": float(np.mean(rewards)),
            "ci95_reward": _t_ci95(rewards),
            "mean_found": float(np.mean(founds)),
            "ci95_found": _t_ci95(founds),
            "single_sample": len(rs) < 2,
        })
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    return str(value)


def result_to_row(r: TrialResult) -> str:
    return ",".join(_fmt(v) for v in (
        r.trial, r.planner, r.m, r.n, r.d, r.alpha, r.beta, r.seed,
        r.steps, r.reward, r.found, r.wall_time))


def read_results_csv(path) -> list[TrialResult]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != RESULTS_HEADER:
        raise ValueError(f"unexpected results header in {path}")
    out = []
    for line in lines[1:]:
        f = line.split(",")
        out.append(TrialResult(
            trial=int(f[0]), planner=f[1], m=int(f[2]), n=int(f[3]),
            d=int(f[4]), alpha=float(f[5]), beta=float(f[6]), seed=int(f[7]),
            steps=int(f[8]), reward=float(f[9]), found=int(f[10]),
            wall_time=float(f[11])))
    return out


def emit_outputs(results: Sequence[TrialResult], summary: Sequence[dict],
                 out_dir, plots: bool = False,
                 logs: Sequence[list] | None = None) -> dict[str, Path]:
    """Write results.csv (fixed column order, failed trials excluded),
    summary.csv, grouped series files, per-episode logs and optional SVG
    bar charts. Returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    ok = [r for r in results if not r.failed]
    results_path = out / "results.csv"
    results_path.write_text(
        "\n".join([RESULTS_HEADER] + [result_to_row(r) for r in ok]) + "\n")
    written["results"] = results_path

    failed = [r for r in results if r.failed]
    if failed:
        fail_path = out / "failures.log"
        fail_path.write_text("".join(
            f"trial {r.trial} (seed {r.seed}) failed\n" for r in failed))
        written["failures"] = fail_path

    sum_header = ("planner,m,n,trials,mean_reward,ci95_reward,"
                  "mean_found,ci95_found,single_sample")
    sum_lines = [sum_header]
    for row in summary:
        sum_lines.append(",".join(_fmt(row[k]) for k in (
            "planner", "m", "n", "trials", "mean_reward", "ci95_reward",
            "mean_found", "ci95_found", "single_sample")))
    sum_path = out / "summary.csv"
    sum_path.write_text("\n".join(sum_lines) + "\n")
    written["summary"] = sum_path

    for metric in ("reward", "found"):
        lines = ["planner,m,n,mean,ci95"]
        for row in summary:
            lines.append(",".join(_fmt(v) for v in (
                row["planner"], row["m"], row["n"],
                row[f"mean_{metric}"], row[f"ci95_{metric}"])))
        p = out / f"series_{metric}.csv"
        p.write_text("\n".join(lines) + "\n")
        written[f"series_{metric}"] = p

    if logs:
        log_dir = out / "logs"
        log_dir.mkdir(exist_ok=True)
        for r, steps in zip(results, logs):
            p = log_dir / f"trial{r.trial:03d}.jsonl"
            p.write_text("".join(json.dumps(s) + "\n" for s in steps))
        written["logs"] = log_dir

    if plots and summary:
        written.update(_emit_plots(summary, out))
    return written


def _emit_plots(summary: Sequence[dict], out: Path) -> dict[str, Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = {}
    labels = [f"{row['planner']}\nm={row['m']} n={row['n']}" for row in summary]
    for metric in ("reward", "found"):
        means = [row[f"mean_{metric}"] for row in summary]
        errs = [row[f"ci95_{metric}"] or 0.0 for row in summary]
        fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(labels)), 3.5))
        ax.bar(range(len(labels)), means, yerr=errs, capsize=4)
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, fontsize=8)
        ax.set_ylabel(f"mean {metric} (95% CI)")
        fig.tight_layout()
        p = out / f"bar_{metric}.svg"
        fig.savefig(p)
        plt.close(fig)
        written[f"plot_{metric}"] = p
    return written


def run_experiment(config: ExperimentConfig) -> tuple[list[TrialResult], list[dict]]:
    """run_batch + aggregate + emit_outputs under config.out."""
    results, logs = run_batch(config)
    summary = aggregate(results)
    emit_outputs(results, summary, config.out, plots=config.plots, logs=logs)
    return results, summary
