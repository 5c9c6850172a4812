"""Multi-object search domain: factored states, the 13 primitive actions,
deterministic transitions, the per-voxel sensor model and step rewards.

The state factors into an observable robot state (camera pose plus the set
of already-found object ids) and one static cell per object. Only Look
senses: it yields a volumetric observation labeling every in-frustum cell
as the occupying object's id, Free, or Unknown when occluded. A visible
cell occupied by object i is labeled i with probability alpha/(alpha+beta)
and Free otherwise; visible empty cells (and visible obstacle surfaces)
are always Free. Find flags the unfound objects whose cells are currently
visible and is rewarded only when that set grows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, NamedTuple

import numpy as np

from ._impl import kernels
from .belief import LabeledVoxel, OctreeBelief
from .geometry import (
    DIR_NAMES,
    DIR_VECTORS,
    FREE,
    OUT_OF_GRID,
    UNKNOWN,
    CameraPose,
    Cell,
    CellAtLevel,
    FrustumParams,
    VisibilityResult,
    cell_visible,
    frustum_geom,
    occupancy_grid,
)

# -- actions -------------------------------------------------------------


@dataclass(frozen=True)
class Move:
    direction: int  # index into DIR_VECTORS

    def __str__(self) -> str:
        return f"move{DIR_NAMES[self.direction]}"


@dataclass(frozen=True)
class Look:
    direction: int

    def __str__(self) -> str:
        return f"look{DIR_NAMES[self.direction]}"


@dataclass(frozen=True)
class Find:
    def __str__(self) -> str:
        return "find"


@dataclass(frozen=True)
class MoveOp:
    """Abstract motion to a (possibly distant) multi-resolution cell."""

    goal: CellAtLevel

    def __str__(self) -> str:
        (x, y, z), lev = self.goal
        return f"moveop({x},{y},{z})@{lev}"


MosAction = Move | Look | Find | MoveOp

PRIMITIVE_ACTIONS: tuple[MosAction, ...] = (
    tuple(Move(d) for d in range(6))
    + tuple(Look(d) for d in range(6))
    + (Find(),)
)


# -- states ----------------------------------------------------------------


class RobotState(NamedTuple):
    pose: CameraPose
    found: frozenset[int]


class MosState(NamedTuple):
    robot: RobotState
    objects: dict[int, Cell]  # object id -> cell (treat as immutable)


@dataclass(frozen=True)
class SensorModel:
    alpha: float
    beta: float
    frustum: FrustumParams

    def __post_init__(self) -> None:
        if not self.alpha > 1.0:
            raise ValueError(f"alpha must exceed 1: {self.alpha}")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must be in [0, 1): {self.beta}")

    @property
    def p_hit(self) -> float:
        """Probability a visible object voxel is labeled with its id."""
        return self.alpha / (self.alpha + self.beta)


@dataclass(frozen=True)
class RewardSpec:
    r_max: float = 1000.0   # Find that discovers at least one new object
    r_min: float = -1000.0  # Find that discovers nothing new
    r_step: float = -1.0    # every Move and Look
    gamma: float = 0.99


# -- observations -------------------------------------------------------------


@dataclass
class FactoredObservation:
    """Volumetric observation from one Look (empty for Move and Find).

    codes holds the sampled label per frustum-table entry, aligned with the
    table for (params, pose.direction): OUT_OF_GRID, UNKNOWN, FREE, or an
    object id. visibility is the raw geometric classification before sensor
    noise.
    """

    pose: CameraPose | None
    params: FrustumParams | None
    visibility: VisibilityResult | None
    codes: np.ndarray | None

    @staticmethod
    def empty() -> "FactoredObservation":
        return FactoredObservation(None, None, None, None)

    def is_empty(self) -> bool:
        return self.codes is None

    def _cells(self) -> np.ndarray:
        geom = frustum_geom(self.params)
        off = geom.offsets[self.pose.direction]
        return off + np.array(self.pose.position, dtype=np.int32)

    def label_map(self) -> dict[Cell, int]:
        """Sampled label for every in-frustum, in-grid cell."""
        if self.is_empty():
            return {}
        out: dict[Cell, int] = {}
        cells = self._cells()
        codes = self.codes.tolist()
        for k, code in enumerate(codes):
            if code == OUT_OF_GRID:
                continue
            out[(int(cells[k, 0]), int(cells[k, 1]), int(cells[k, 2]))] = code
        return out

    def labeled_voxels_for(self, object_id: int) -> list[LabeledVoxel]:
        """Object i's view: every informative voxel labeled i or FREE.

        Unknown (occluded) voxels are excluded; voxels labeled with another
        object's id count as FREE evidence for this object.
        """
        out = []
        for cell, code in self.label_map().items():
            if code == UNKNOWN:
                continue
            out.append(LabeledVoxel(cell, object_id if code == object_id else FREE))
        return out

    def visible_object_ids(self) -> set[int]:
        if self.is_empty():
            return set()
        return {int(c) for c in np.unique(self.codes) if c > 0}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FactoredObservation):
            return NotImplemented
        if self.is_empty() or other.is_empty():
            return self.is_empty() and other.is_empty()
        return self.label_map() == other.label_map()


# -- dynamics ----------------------------------------------------------------


def _own_cells(object_cells: Mapping[int, Iterable[Cell]] | None,
               state: MosState, oid: int) -> set[Cell]:
    if object_cells is not None and oid in object_cells:
        return set(object_cells[oid])
    return {state.objects[oid]}


def transition(
    state: MosState,
    action: MosAction,
    m: int,
    *,
    frustum: FrustumParams | None = None,
    occupied: Mapping[Cell, int] | None = None,
    object_cells: Mapping[int, Iterable[Cell]] | None = None,
    motion_noise: Callable[[CameraPose, CameraPose, np.random.Generator], CameraPose] | None = None,
    rng: np.random.Generator | None = None,
) -> MosState:
    """Deterministic transition; objects never move.

    Move translates one cell, clamped at grid bounds and at occupied cells;
    Look only turns the camera; Find adds every unfound object whose cell is
    visible (its own covered cells never occlude it). The optional
    motion_noise hook maps (pose, intended pose, rng) to the realized pose.
    """
    robot = state.robot
    pose = robot.pose
    if isinstance(action, Move):
        dx, dy, dz = DIR_VECTORS[action.direction]
        x, y, z = pose.position
        nx, ny, nz = x + dx, y + dy, z + dz
        target = (nx, ny, nz)
        blocked = occupied is not None and target in occupied
        if not (0 <= nx < m and 0 <= ny < m and 0 <= nz < m) or blocked:
            target = pose.position
        new_pose = CameraPose(target, pose.direction)
        if motion_noise is not None:
            new_pose = motion_noise(pose, new_pose, rng)
            cx, cy, cz = new_pose.position
            if not (0 <= cx < m and 0 <= cy < m and 0 <= cz < m):
                new_pose = CameraPose(pose.position, new_pose.direction)
        return MosState(RobotState(new_pose, robot.found), state.objects)
    if isinstance(action, Look):
        new_pose = CameraPose(pose.position, action.direction)
        return MosState(RobotState(new_pose, robot.found), state.objects)
    if isinstance(action, Find):
        if frustum is None:
            raise ValueError("Find transition needs the sensor frustum")
        occ = occupied if occupied is not None else {c: i for i, c in state.objects.items()}
        newly = set()
        for oid, cell in state.objects.items():
            if oid in robot.found:
                continue
            own = _own_cells(object_cells, state, oid)
            occluders = [c for c in occ if c not in own]
            if cell_visible(pose, frustum, cell, occluders, m):
                newly.add(oid)
        return MosState(RobotState(pose, robot.found | frozenset(newly)), state.objects)
    raise TypeError(f"transition expects a primitive action, got {action!r}")


def sample_observation(
    state: MosState,
    action: MosAction,
    sensor: SensorModel,
    m: int,
    rng: np.random.Generator,
    *,
    occupied: Mapping[Cell, int] | None = None,
) -> FactoredObservation:
    """Sample the sensor's volumetric labeling after the action.

    Only Look produces an observation. occupied may supply the full world
    occupancy (multi-cell objects, obstacles); it defaults to the state's
    one-cell-per-object map.
    """
    if not isinstance(action, Look):
        return FactoredObservation.empty()
    pose = state.robot.pose
    occ_map = occupied if occupied is not None else {c: i for i, c in state.objects.items()}
    occ = occupancy_grid(occ_map, m)
    geom = frustum_geom(sensor.frustum)
    d = pose.direction
    codes = kernels.classify(
        pose.position[0], pose.position[1], pose.position[2],
        geom.offsets[d], geom.pixels[d], geom.depths[d],
        occ, m, geom.r,
    )
    vis = _visibility_from_codes(pose, geom, codes)
    sampled = codes.copy()
    hit_idx = np.nonzero(sampled > 0)[0]
    if hit_idx.size:
        misses = rng.random(hit_idx.size) >= sensor.p_hit
        sampled[hit_idx[misses]] = FREE
    return FactoredObservation(pose, sensor.frustum, vis, sampled)


def _visibility_from_codes(pose: CameraPose, geom, codes: np.ndarray) -> VisibilityResult:
    off = geom.offsets[pose.direction]
    px, py, pz = pose.position
    visible_free: set[Cell] = set()
    visible_object: dict[Cell, int] = {}
    occluded: set[Cell] = set()
    codes_list = codes.tolist()
    for k, code in enumerate(codes_list):
        if code == OUT_OF_GRID:
            continue
        cell = (px + int(off[k, 0]), py + int(off[k, 1]), pz + int(off[k, 2]))
        if code == UNKNOWN:
            occluded.add(cell)
        elif code == FREE:
            visible_free.add(cell)
        else:
            visible_object[cell] = code
    return VisibilityResult(visible_free, visible_object, occluded)


def reward(state: MosState, action: MosAction, next_state: MosState,
           spec: RewardSpec) -> float:
    """Find pays r_max exactly when the found set grew, else r_min; every
    other primitive costs r_step."""
    if isinstance(action, Find):
        if len(next_state.robot.found) > len(state.robot.found):
            return spec.r_max
        return spec.r_min
    return spec.r_step


def generative(
    state: MosState,
    action: MosAction,
    sensor: SensorModel,
    rewards: RewardSpec,
    m: int,
    rng: np.random.Generator,
    *,
    occupied: Mapping[Cell, int] | None = None,
    object_cells: Mapping[int, Iterable[Cell]] | None = None,
) -> tuple[MosState, FactoredObservation, float]:
    """Black-box sample (s', o, r) of one primitive step."""
    s2 = transition(state, action, m, frustum=sensor.frustum,
                    occupied=occupied, object_cells=object_cells)
    obs = sample_observation(s2, action, sensor, m, rng, occupied=occupied)
    r = reward(state, action, s2, rewards)
    return s2, obs, r


def belief_update_all(
    beliefs: dict[int, OctreeBelief],
    action: MosAction,
    obs: FactoredObservation,
    sensor: SensorModel,
    found: frozenset[int] | set[int] = frozenset(),
) -> dict[int, OctreeBelief]:
    """Independent per-object Bayes updates from one observation.

    Found objects' beliefs are frozen; empty observations (Move, Find)
    change nothing. Updates mutate the beliefs in place and return them.
    """
    if obs.is_empty():
        return beliefs
    for oid, belief in beliefs.items():
        if oid in found:
            continue
        voxels = obs.labeled_voxels_for(oid)
        if voxels:
            belief.update(voxels, sensor.alpha, sensor.beta, oid)
    return beliefs


# -- world files ---------------------------------------------------------------


def save_world_file(
    path: str,
    m: int,
    objects: Mapping[int, Iterable[Cell]],
    obstacles: Iterable[Cell] = (),
) -> None:
    doc = {
        "m": m,
        "objects": [
            {"id": int(oid), "cells": [list(c) for c in cells]}
            for oid, cells in sorted(objects.items())
        ],
        "obstacles": [list(c) for c in obstacles],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_world_file(path: str) -> tuple[int, dict[int, tuple[Cell, ...]], tuple[Cell, ...]]:
    """Parse and validate a world file; raises ValueError on bad content."""
    with open(path) as fh:
        doc = json.load(fh)
    m = int(doc["m"])
    if m < 2 or (m & (m - 1)) != 0:
        raise ValueError(f"world size must be a power of two >= 2: {m}")
    objects: dict[int, tuple[Cell, ...]] = {}
    seen: set[Cell] = set()
    for entry in doc.get("objects", []):
        oid = int(entry["id"])
        if oid <= 0:
            raise ValueError(f"object ids must be positive: {oid}")
        if oid in objects:
            raise ValueError(f"duplicate object id: {oid}")
        cells = tuple((int(x), int(y), int(z)) for x, y, z in entry["cells"])
        if not cells:
            raise ValueError(f"object {oid} has no cells")
        for c in cells:
            if not all(0 <= v < m for v in c):
                raise ValueError(f"object {oid} cell out of bounds: {c}")
            if c in seen:
                raise ValueError(f"overlapping occupancy at {c}")
            seen.add(c)
        objects[oid] = cells
    obstacles = tuple((int(x), int(y), int(z)) for x, y, z in doc.get("obstacles", []))
    for c in obstacles:
        if not all(0 <= v < m for v in c):
            raise ValueError(f"obstacle out of bounds: {c}")
        if c in seen:
            raise ValueError(f"overlapping occupancy at {c}")
        seen.add(c)
    return m, objects, obstacles
