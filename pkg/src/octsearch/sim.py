"""Ground-truth simulator: random world generation, episode stepping with
occlusion-aware observations, termination accounting, and the scripted
exhaustive-sweep and uniform-random baseline policies."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .domain import (
    PRIMITIVE_ACTIONS,
    FactoredObservation,
    Find,
    Look,
    MosAction,
    MosState,
    Move,
    RewardSpec,
    RobotState,
    SensorModel,
    generative,
    load_world_file,
    save_world_file,
)
from .geometry import DIR_VECTORS, CameraPose, Cell


@dataclass(frozen=True)
class WorldSpec:
    """A search world: grid size m, sensor range d, static objects (cell
    sets keyed by positive id) and obstacle cells."""

    m: int
    d: int
    objects: Mapping[int, tuple[Cell, ...]]
    obstacles: tuple[Cell, ...] = ()
    seed: int | None = None

    def __post_init__(self) -> None:
        if not self.objects:
            raise ValueError("a world needs at least one object")
        seen: set[Cell] = set()
        for oid, cells in self.objects.items():
            if oid <= 0:
                raise ValueError(f"object ids must be positive: {oid}")
            for c in cells:
                if not all(0 <= v < self.m for v in c):
                    raise ValueError(f"object {oid} cell out of bounds: {c}")
                if c in seen:
                    raise ValueError(f"overlapping occupancy at {c}")
                seen.add(c)
        for c in self.obstacles:
            if not all(0 <= v < self.m for v in c):
                raise ValueError(f"obstacle out of bounds: {c}")
            if c in seen:
                raise ValueError(f"overlapping occupancy at {c}")
            seen.add(c)

    @property
    def n(self) -> int:
        return len(self.objects)

    def occupied(self) -> dict[Cell, int]:
        occ: dict[Cell, int] = {}
        for oid, cells in self.objects.items():
            for c in cells:
                occ[c] = oid
        for c in self.obstacles:
            occ[c] = -1
        return occ

    def com(self, oid: int) -> Cell:
        """Representative cell of an object: per-axis midpoint of its
        bounding box (always a covered cell for box-shaped objects)."""
        cells = self.objects[oid]
        lo = [min(c[k] for c in cells) for k in range(3)]
        hi = [max(c[k] for c in cells) for k in range(3)]
        return ((lo[0] + hi[0]) // 2, (lo[1] + hi[1]) // 2, (lo[2] + hi[2]) // 2)

    def initial_state(self) -> MosState:
        robot = RobotState(CameraPose((0, 0, 0), 0), frozenset())
        return MosState(robot, {oid: self.com(oid) for oid in self.objects})

    def save(self, path) -> None:
        save_world_file(path, self.m, dict(self.objects), list(self.obstacles))

    @classmethod
    def load(cls, path, d: int, seed: int | None = None) -> "WorldSpec":
        m, objects, obstacles = load_world_file(path)
        return cls(m=m, d=d, objects=objects, obstacles=tuple(obstacles), seed=seed)


def generate_world(m: int, n: int, d: int, seed: int,
                   max_attempts: int = 1000) -> WorldSpec:
    """Place n random axis-aligned box objects (per-axis size uniform on
    {1, .., max(1, m//8)}) without overlap, keeping the robot start cell
    (0,0,0) free. Deterministic per seed."""
    if n < 1:
        raise ValueError("need at least one object")
    rng = np.random.default_rng(seed)
    hi = max(1, m // 8)
    occupied: set[Cell] = set()
    objects: dict[int, tuple[Cell, ...]] = {}
    for oid in range(1, n + 1):
        for _ in range(max_attempts):
            dims = rng.integers(1, hi + 1, size=3)
            pos = rng.integers(0, m - dims + 1, size=3)
            cells = {
                (int(x), int(y), int(z))
                for x in range(pos[0], pos[0] + dims[0])
                for y in range(pos[1], pos[1] + dims[1])
                for z in range(pos[2], pos[2] + dims[2])
            }
            if (0, 0, 0) in cells or cells & occupied:
                continue
            objects[oid] = tuple(sorted(cells))
            occupied |= cells
            break
        else:
            raise RuntimeError(
                f"could not place object {oid} after {max_attempts} attempts")
    return WorldSpec(m=m, d=d, objects=objects, obstacles=(), seed=seed)


class Episode:
    """One search episode over a fixed world.

    Tracks the ground MosState, step index, cumulative discounted reward,
    Find attempts and charged wall-clock. The episode is done when all
    objects are found, n Find actions were taken (any outcome), the step
    cap is hit, or the charged time reaches the total budget.
    """

    def __init__(self, world: WorldSpec, sensor: SensorModel,
                 rewards: RewardSpec | None = None, max_steps: int = 500,
                 total_time: float | None = None) -> None:
        self.world = world
        self.sensor = sensor
        self.rewards = rewards or RewardSpec()
        self.max_steps = max_steps
        self.total_time = total_time
        self.state = world.initial_state()
        self._occupied = world.occupied()
        self._object_cells = {oid: cells for oid, cells in world.objects.items()}
        self.t = 0
        self.discounted_reward = 0.0
        self.time_used = 0.0
        self.finds_attempted = 0
        self.done = False
        self.log: list[dict] = []

    @property
    def found_count(self) -> int:
        return len(self.state.robot.found)

    def charge_time(self, seconds: float) -> None:
        """Account planning/update time against the total budget."""
        self.time_used += seconds
        if self.total_time is not None and self.time_used >= self.total_time:
            self.done = True

    def step(self, action: MosAction, rng: np.random.Generator):
        """Apply one primitive action; returns (observation, reward)."""
        if self.done:
            raise RuntimeError("cannot step a finished episode")
        s2, obs, r = generative(
            self.state, action, self.sensor, self.rewards, self.world.m, rng,
            occupied=self._occupied, object_cells=self._object_cells)
        self.discounted_reward += (self.rewards.gamma ** self.t) * r
        self.state = s2
        if isinstance(action, Find):
            self.finds_attempted += 1
        px, py, pz = s2.robot.pose.position
        self.log.append({
            "t": self.t,
            "action": str(action),
            "reward": r,
            "pose": [px, py, pz, s2.robot.pose.direction_name()],
            "found": sorted(s2.robot.found),
        })
        self.t += 1
        n = self.world.n
        if (len(s2.robot.found) >= n or self.finds_attempted >= n
                or self.t >= self.max_steps):
            self.done = True
        return obs, r


def _snake_order(m: int) -> list[Cell]:
    """Boustrophedon visit order over all cells, consecutive cells adjacent."""
    order: list[Cell] = []
    for z in range(m):
        ys = range(m) if z % 2 == 0 else range(m - 1, -1, -1)
        for y in ys:
            xs = range(m) if (y + z) % 2 == 0 else range(m - 1, -1, -1)
            for x in xs:
                order.append((x, y, z))
    return order


def _move_toward(pose_cell: Cell, target: Cell) -> Move:
    for axis in range(3):
        delta = target[axis] - pose_cell[axis]
        if delta != 0:
            step = 1 if delta > 0 else -1
            vec = tuple(step if k == axis else 0 for k in range(3))
            return Move(DIR_VECTORS.index(vec))
    raise ValueError("already at target")


class ExhaustiveSweep:
    """Scripted baseline: snake over every cell, six Looks per cell, and an
    immediate Find whenever the latest observation shows an unfound object.
    Deterministic given the start pose; wraps around if the sweep ends. A
    target whose approach move gets clamped by an occupied cell is skipped."""

    def __init__(self, m: int) -> None:
        self.m = m
        self._order = _snake_order(m)
        self._idx = 0
        self._look_i = 0
        self._prev_pos: Cell | None = None
        self._prev_was_move = False

    def next_action(self, state: RobotState,
                    last_obs: FactoredObservation | None) -> MosAction:
        pos = state.pose.position
        if last_obs is not None and not last_obs.is_empty():
            if set(last_obs.visible_object_ids()) - set(state.found):
                self._prev_was_move = False
                return Find()
        if self._prev_was_move and pos == self._prev_pos:
            # the move was clamped, the approach is blocked: skip this target
            self._idx = (self._idx + 1) % len(self._order)
            self._look_i = 0
        self._prev_pos = pos
        target = self._order[self._idx]
        if pos != target:
            self._prev_was_move = True
            return _move_toward(pos, target)
        self._prev_was_move = False
        if self._look_i < 6:
            a = Look(self._look_i)
            self._look_i += 1
            return a
        self._idx = (self._idx + 1) % len(self._order)
        self._look_i = 0
        self._prev_was_move = True
        return _move_toward(pos, self._order[self._idx])


def random_policy(rng: np.random.Generator) -> MosAction:
    """Uniform draw over the 13 primitive actions."""
    return PRIMITIVE_ACTIONS[int(rng.integers(len(PRIMITIVE_ACTIONS)))]
