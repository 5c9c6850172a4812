"""Bridges domain objects to the planner kernels.

An EngineProblem is a flat, array-only snapshot of one planning instance:
encoded actions, frustum lookup tables, obstacle grid, per-object belief
value pyramids and the root robot state. Both kernel implementations
(compiled and pure) consume it identically; build it once per planning
step and per instance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._impl import IMPL_NAME, kernels
from .belief import OctreeBelief
from .domain import (
    Find,
    Look,
    MosAction,
    Move,
    MoveOp,
    RewardSpec,
    SensorModel,
)
from .geometry import Cell, center_ground_cell, frustum_geom


def pyramid_offsets(m: int) -> tuple[np.ndarray, int]:
    """Start offset of each level inside a belief value pyramid."""
    lmax = m.bit_length() - 1
    off = np.zeros(lmax + 1, dtype=np.int64)
    pos = 0
    for lev in range(lmax + 1):
        off[lev] = pos
        pos += (m >> lev) ** 3
    return off, pos


def belief_pyramid(belief: OctreeBelief) -> np.ndarray:
    """Dense per-level value sums of one octree belief, level 0 first.

    Index layout at level l: flat = (x * s + y) * s + z with s = m >> l.
    Sampling from the pyramid by proportional 8-way descent reproduces the
    octree's sampling distribution exactly.
    """
    m = belief.m
    cur = belief.ground_array()
    parts = [cur.ravel()]
    s = m
    while s > 1:
        s //= 2
        cur = cur.reshape(s, 2, s, 2, s, 2).sum(axis=(1, 3, 5))
        parts.append(cur.ravel())
    return np.ascontiguousarray(np.concatenate(parts))


@dataclass
class EngineProblem:
    m: int
    lmax: int
    level: int
    n_objects: int
    gamma: float
    ucb_c: float
    p_hit: float
    r_max: float
    r_min: float
    r_step: float
    max_depth: int
    k_samples: int
    far: int
    act_kind: np.ndarray   # int8[A]: 0 move, 1 look, 2 find, 3 moveop
    act_par: np.ndarray    # int32[A]: direction index or goal center flat idx
    lut_pix: np.ndarray    # int32[6 * side^3]
    lut_dep: np.ndarray    # int32[6 * side^3]
    obstacles: np.ndarray  # int32[B, 3]
    obst_grid: np.ndarray  # uint8[m^3]
    pyramid: np.ndarray    # float64[n_objects * plen]
    pyr_off: np.ndarray    # int64[lmax + 1]
    plen: int
    robot: tuple[int, int, int, int]
    found0: int
    particles: np.ndarray | None = None  # int32[P, n]: flat ground cells


def encode_actions(actions: Sequence[MosAction], m: int) -> tuple[np.ndarray, np.ndarray]:
    kinds = np.zeros(len(actions), dtype=np.int8)
    pars = np.zeros(len(actions), dtype=np.int32)
    for i, a in enumerate(actions):
        if isinstance(a, Move):
            kinds[i] = 0
            pars[i] = a.direction
        elif isinstance(a, Look):
            kinds[i] = 1
            pars[i] = a.direction
        elif isinstance(a, Find):
            kinds[i] = 2
        elif isinstance(a, MoveOp):
            kinds[i] = 3
            x, y, z = center_ground_cell(a.goal)
            pars[i] = (x * m + y) * m + z
        else:
            raise TypeError(f"cannot encode action {a!r}")
    return kinds, pars


def obstacle_arrays(obstacles: Iterable[Cell], m: int) -> tuple[np.ndarray, np.ndarray]:
    cells = sorted(set(obstacles))
    arr = np.array(cells, dtype=np.int32).reshape(len(cells), 3)
    grid = np.zeros(m * m * m, dtype=np.uint8)
    for x, y, z in cells:
        grid[(x * m + y) * m + z] = 1
    return arr, grid


def build_problem(
    *,
    level: int,
    actions: Sequence[MosAction],
    pose_xyz: tuple[int, int, int],
    pose_dir: int,
    found_mask: int,
    object_order: Sequence[int],
    pyramids: Mapping[int, np.ndarray],
    sensor: SensorModel,
    rewards: RewardSpec,
    m: int,
    max_depth: int,
    ucb_c: float,
    k_samples: int,
    discount: float | None = None,
    obstacle_cells: Iterable[Cell] = (),
    particles: np.ndarray | None = None,
) -> EngineProblem:
    geom = frustum_geom(sensor.frustum)
    kinds, pars = encode_actions(actions, m)
    obst, obst_grid = obstacle_arrays(obstacle_cells, m)
    pyr_off, plen = pyramid_offsets(m)
    if pyramids:
        pyramid = np.concatenate([pyramids[oid] for oid in object_order])
    else:
        pyramid = np.zeros(len(object_order) * plen, dtype=np.float64)
    return EngineProblem(
        m=m,
        lmax=m.bit_length() - 1,
        level=level,
        n_objects=len(object_order),
        gamma=rewards.gamma if discount is None else discount,
        ucb_c=ucb_c,
        p_hit=sensor.p_hit,
        r_max=rewards.r_max,
        r_min=rewards.r_min,
        r_step=rewards.r_step,
        max_depth=max_depth,
        k_samples=k_samples,
        far=sensor.frustum.far,
        act_kind=kinds,
        act_par=pars,
        lut_pix=np.ascontiguousarray(geom.lut_pix.ravel()),
        lut_dep=np.ascontiguousarray(geom.lut_dep.ravel()),
        obstacles=obst,
        obst_grid=obst_grid,
        pyramid=pyramid,
        pyr_off=pyr_off,
        plen=plen,
        robot=(pose_xyz[0], pose_xyz[1], pose_xyz[2], pose_dir),
        found0=found_mask,
        particles=particles,
    )


def run_plan(problem: EngineProblem, seed: int,
             num_sims: int | None = None,
             deadline: float | None = None) -> dict:
    """Run one search on the selected kernel implementation."""
    return kernels.run_pouct(problem, seed, num_sims, deadline)


__all__ = [
    "EngineProblem",
    "IMPL_NAME",
    "belief_pyramid",
    "build_problem",
    "encode_actions",
    "obstacle_arrays",
    "pyramid_offsets",
    "run_plan",
]
