"""Multi-resolution abstraction: coarsened object states, MoveOp motion
options, and the sampled abstract transition / observation models.

An abstract instance at level l keeps the robot state exact but represents
each object by the level-l cell containing it. Ground detail enters only
through weighted sampling against the current octree beliefs: Find draws
one ground cell from the object's level-l block, Look draws k and takes a
strict-majority vote. Level 0 degenerates to the ground problem with the
13 primitive actions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .belief import OctreeBelief
from .domain import (
    PRIMITIVE_ACTIONS,
    FactoredObservation,
    Find,
    Look,
    MosAction,
    MosState,
    Move,
    MoveOp,
    RewardSpec,
    RobotState,
    SensorModel,
    generative,
)
from .geometry import (
    CameraPose,
    Cell,
    CellAtLevel,
    cell_visible,
    center_ground_cell,
    level_ancestor,
)

MOVEOP_GOAL_CAP = 26


@dataclass(frozen=True)
class AbstractInstance:
    """One resolution of the planning hierarchy with its action set."""

    level: int
    actions: tuple[MosAction, ...]
    k_samples: int = 10


@dataclass(frozen=True)
class MoveOpPlan:
    """A MoveOp expanded at a concrete pose: the greedy primitive path to
    the goal block's center cell and its discounted cost."""

    goal: CellAtLevel
    primitive_moves: tuple[Move, ...]
    cumulative_discounted_cost: float


class AbstractObjectState(CellAtLevel):
    """Alias type: an object's state at level l is its level-l cell."""


def abstract_state(state: MosState, level: int) -> tuple[RobotState, dict[int, CellAtLevel]]:
    """Coarsen every object cell to its level-l ancestor; the robot state
    passes through unchanged."""
    objs = {oid: level_ancestor(cell, level) for oid, cell in state.objects.items()}
    return state.robot, objs


def expand_moveop(pose: CameraPose, goal: CellAtLevel,
                  rewards: RewardSpec) -> MoveOpPlan:
    """Greedy axis-ordered primitive move sequence from pose to the center
    ground cell of the goal block, with its cumulative discounted cost
    sum(gamma^k * r_step). A goal covering the current position expands to
    the empty sequence at zero cost."""
    target = center_ground_cell(goal)
    cur = list(pose.position)
    moves: list[Move] = []
    for axis in range(3):
        while cur[axis] != target[axis]:
            sign = 1 if target[axis] > cur[axis] else -1
            moves.append(Move(axis * 2 + (0 if sign > 0 else 1)))
            cur[axis] += sign
    if moves:
        n = len(moves)
        cost = rewards.r_step * (1.0 - rewards.gamma ** n) / (1.0 - rewards.gamma)
    else:
        cost = 0.0
    return MoveOpPlan(goal, tuple(moves), cost)


def moveop_goals(pose: CameraPose, level: int, m: int,
                 cap: int = MOVEOP_GOAL_CAP) -> list[CellAtLevel]:
    """Level-l motion goals near the robot: blocks whose center ground cell
    lies within Chebyshev distance 2^(level+1), nearest (by path length)
    first, capped, excluding the block containing the robot."""
    if level < 1:
        raise ValueError(f"moveop goals need level >= 1, got {level}")
    s = m >> level
    if s < 1:
        return []
    px, py, pz = pose.position
    w = 1 << level
    radius = 1 << (level + 1)
    own = level_ancestor(pose.position, level).cell
    lo = [max(0, (c - radius) >> level) for c in (px, py, pz)]
    hi = [min(s - 1, (c + radius) >> level) for c in (px, py, pz)]
    cands: list[tuple[int, int, CellAtLevel]] = []
    for cx in range(lo[0], hi[0] + 1):
        for cy in range(lo[1], hi[1] + 1):
            for cz in range(lo[2], hi[2] + 1):
                if (cx, cy, cz) == own:
                    continue
                cal = CellAtLevel((cx, cy, cz), level)
                tx, ty, tz = center_ground_cell(cal)
                cheb = max(abs(tx - px), abs(ty - py), abs(tz - pz))
                if cheb > radius:
                    continue
                l1 = abs(tx - px) + abs(ty - py) + abs(tz - pz)
                flat = (cx * s + cy) * s + cz
                cands.append((l1, flat, cal))
    cands.sort(key=lambda t: (t[0], t[1]))
    return [cal for _, _, cal in cands[:cap]]


def make_instance(
    level: int,
    pose: CameraPose,
    m: int,
    k_samples: int = 10,
    moveop_levels: Iterable[int] | None = None,
) -> AbstractInstance:
    """Build the action set for one instance at the current pose.

    Level 0 without moveop_levels is the ground problem with the primitive
    actions. Otherwise the action set is MoveOps (goals at the instance's
    level, or at the explicit moveop_levels for flat planning with options)
    plus the six Looks and Find.
    """
    if level == 0 and not moveop_levels:
        return AbstractInstance(0, PRIMITIVE_ACTIONS, k_samples)
    goal_levels = tuple(moveop_levels) if moveop_levels else (level,)
    ops: list[MosAction] = []
    for gl in goal_levels:
        ops.extend(MoveOp(g) for g in moveop_goals(pose, gl, m))
    actions = tuple(ops) + tuple(Look(d) for d in range(6)) + (Find(),)
    return AbstractInstance(level, actions, k_samples)


# -- sampled abstract models ---------------------------------------------------


def abstract_observation(
    cell_l: CellAtLevel,
    pose: CameraPose,
    belief: OctreeBelief,
    sensor: SensorModel,
    k: int,
    m: int,
    rng: np.random.Generator,
    obstacles: Iterable[Cell] = (),
) -> bool:
    """Sampled detection of one object abstracted to a level-l block.

    Draws k ground cells from the block weighted by the belief; each draw
    that is visible (obstacles occluding, other objects ignored) registers
    a detection with probability alpha/(alpha+beta). Returns True (label i)
    on a strict majority, False (label Free) otherwise; a zero-mass block
    carries no information and reads Free.
    """
    if belief.value_at(cell_l) <= 0.0:
        return False
    hits = 0
    obst = list(obstacles)
    for _ in range(k):
        g = belief.sample_descend(cell_l, rng)
        if g is None:
            continue
        if cell_visible(pose, sensor.frustum, g, obst, m):
            if rng.random() < sensor.p_hit:
                hits += 1
    return 2 * hits > k


def abstract_find_transition(
    found: bool,
    cell_l: CellAtLevel,
    belief: OctreeBelief,
    pose: CameraPose,
    sensor: SensorModel,
    m: int,
    rng: np.random.Generator,
    obstacles: Iterable[Cell] = (),
) -> bool:
    """Find outcome for one abstract object: draw a ground cell from the
    block (belief-weighted) and apply the ground visibility rule. Found
    objects stay found; zero-mass blocks never produce a find."""
    if found:
        return True
    if belief.value_at(cell_l) <= 0.0:
        return False
    g = belief.sample_descend(cell_l, rng)
    if g is None:
        return False
    return cell_visible(pose, sensor.frustum, g, list(obstacles), m)


def abstract_generative(
    instance: AbstractInstance,
    state,
    action: MosAction,
    beliefs: Mapping[int, OctreeBelief],
    sensor: SensorModel,
    rewards: RewardSpec,
    m: int,
    rng: np.random.Generator,
    obstacles: Iterable[Cell] = (),
):
    """Sampled abstract step (s', o, r) at the instance's level.

    At level 0 the state is a ground MosState and this delegates to the
    ground generative model exactly, forwarding the world occupancy (the
    state's object cells plus the instance's obstacles). At level >= 1 the
    state is (RobotState, {id: CellAtLevel}); the observation is a
    per-object (cell, detected) map for Look and None otherwise.
    """
    if instance.level == 0:
        occ = {cell: oid for oid, cell in state.objects.items()}
        for c in obstacles:
            occ[c] = -1
        return generative(state, action, sensor, rewards, m, rng, occupied=occ)
    robot, objs = state
    pose = robot.pose
    if isinstance(action, MoveOp):
        plan = expand_moveop(pose, action.goal, rewards)
        target = center_ground_cell(action.goal)
        blocked = target in set(obstacles)
        new_pose = CameraPose(pose.position if blocked else target, pose.direction)
        s2 = (RobotState(new_pose, robot.found), objs)
        return s2, None, plan.cumulative_discounted_cost
    if isinstance(action, Look):
        new_pose = CameraPose(pose.position, action.direction)
        s2 = (RobotState(new_pose, robot.found), objs)
        obs = {
            oid: (cell_l, abstract_observation(cell_l, new_pose, beliefs[oid],
                                               sensor, instance.k_samples, m, rng,
                                               obstacles))
            for oid, cell_l in objs.items()
        }
        return s2, obs, rewards.r_step
    if isinstance(action, Find):
        newly = False
        found = set(robot.found)
        for oid, cell_l in objs.items():
            if oid in found:
                continue
            if abstract_find_transition(False, cell_l, beliefs[oid], pose,
                                        sensor, m, rng, obstacles):
                found.add(oid)
                newly = True
        s2 = (RobotState(pose, frozenset(found)), objs)
        return s2, None, rewards.r_max if newly else rewards.r_min
    raise TypeError(f"unsupported abstract action: {action!r}")
