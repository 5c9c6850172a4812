"""Timing comparison of the pure-Python and compiled search kernels.

Runs the same seeded workloads through both implementations, checks that
they return identical results, and reports throughput side by side:

    python3 benchmarks/bench_kernels.py --sims 3000 --repeats 3
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from octsearch import _pure
from octsearch.abstraction import make_instance
from octsearch.belief import OctreeBelief
from octsearch.domain import (
    PRIMITIVE_ACTIONS,
    LabeledVoxel,
    RewardSpec,
    SensorModel,
)
from octsearch.engine import belief_pyramid, build_problem
from octsearch.geometry import CameraPose, FrustumParams, frustum_geom, occupancy_grid

try:
    from octsearch import _native
except ImportError:  # pragma: no cover - extension not built
    _native = None


def _noisy_beliefs(m: int, seed: int) -> dict[int, OctreeBelief]:
    rng = np.random.default_rng(seed)
    beliefs = {}
    for oid in (1, 2):
        b = OctreeBelief(m)
        for _ in range(8):
            voxels = [
                LabeledVoxel(tuple(int(v) for v in rng.integers(0, m, 3)),
                             oid if rng.random() < 0.3 else -1)
                for _ in range(6)
            ]
            b.update(voxels, alpha=1e3, beta=0.2, object_id=oid)
        beliefs[oid] = b
    return beliefs


def _problem(m: int, level: int, particles: np.ndarray | None = None):
    sensor = SensorModel(alpha=1e3, beta=0.2, frustum=FrustumParams(far=6))
    pose = CameraPose((1, 2, 2), 0)
    if level == 0:
        actions = PRIMITIVE_ACTIONS
    else:
        actions = make_instance(level, pose, m).actions
    pyramids = ({} if particles is not None else
                {oid: belief_pyramid(b)
                 for oid, b in _noisy_beliefs(m, seed=3).items()})
    return build_problem(
        level=level, actions=actions, pose_xyz=pose.position,
        pose_dir=pose.direction, found_mask=0, object_order=(1, 2),
        pyramids=pyramids, sensor=sensor, rewards=RewardSpec(), m=m,
        max_depth=12, ucb_c=1000.0, k_samples=10,
        obstacle_cells=((4, 4, 4),), particles=particles)


def _strip(result: dict) -> dict:
    return {k: v for k, v in result.items() if k != "impl"}


def bench_search(kernel, problem, sims: int, repeats: int):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = kernel.run_pouct(problem, 42, num_sims=sims)
        best = min(best, time.perf_counter() - t0)
    return sims / best, result


def bench_classify(kernel, repeats: int, calls: int = 2000):
    m = 16
    rng = np.random.default_rng(3)
    occ_map = {tuple(int(v) for v in rng.integers(0, m, 3)): 1
               for _ in range(12)}
    occ = occupancy_grid(occ_map, m)
    geom = frustum_geom(FrustumParams(far=7))
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for i in range(calls):
            d = i % 6
            kernel.classify(8, 8, 8, geom.offsets[d], geom.pixels[d],
                            geom.depths[d], occ, m, geom.r)
        best = min(best, time.perf_counter() - t0)
    return calls / best


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sims", type=int, default=3000,
                    help="simulations per search workload (default 3000)")
    ap.add_argument("--repeats", type=int, default=3,
                    help="timing repeats, best-of counts (default 3)")
    args = ap.parse_args()

    if _native is None:
        print("compiled kernel unavailable; only the pure kernel is timed")
    kernels = [("pure", _pure)] + ([("native", _native)] if _native else [])

    rng = np.random.default_rng(0)
    workloads = [
        ("search m=8 ground", _problem(8, 0)),
        ("search m=8 level 1", _problem(8, 1)),
        ("search m=16 level 2", _problem(16, 2)),
        ("search m=8 particles",
         _problem(8, 0, particles=rng.integers(0, 8 ** 3,
                                               size=(1000, 2)).astype(np.int32))),
    ]

    print(f"{'workload':<22} " + " ".join(f"{n + ' sims/s':>16}" for n, _ in kernels)
          + ("  speedup" if _native else ""))
    for name, problem in workloads:
        rates = []
        results = []
        for _, kernel in kernels:
            rate, res = bench_search(kernel, problem, args.sims, args.repeats)
            rates.append(rate)
            results.append(_strip(res))
        if len(results) == 2 and results[0] != results[1]:
            raise SystemExit(f"kernel results diverge on {name!r}")
        line = f"{name:<22} " + " ".join(f"{r:>16,.0f}" for r in rates)
        if len(rates) == 2:
            line += f"  {rates[1] / rates[0]:>6.1f}x"
        print(line)

    rates = [bench_classify(kernel, args.repeats) for _, kernel in kernels]
    line = f"{'classify m=16':<22} " + " ".join(f"{r:>16,.0f}" for r in rates)
    if len(rates) == 2:
        line += f"  {rates[1] / rates[0]:>6.1f}x"
    print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
