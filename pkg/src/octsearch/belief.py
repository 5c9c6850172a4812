"""Octree belief over a single object's position in an m^3 grid.

The belief stores an unnormalized value per ground cell, organized as a
lazily materialized octree: a node at level l covers a (2^l)^3 block and
its value equals the sum over its children; an unmaterialized subtree at
level l implicitly carries 8^l * default_ground_value. Normalized
probabilities divide node values by the tracked normalizer (the total
ground mass), which is maintained incrementally as updates propagate value
deltas up the tree, so a Bayes-rule update of k voxels touches only
O(k * log m) nodes and never renormalizes the full grid.

Per-voxel evidence multiplies a ground value by alpha (the voxel was
labeled with this object's id) or beta (labeled free). Unknown-labeled
voxels carry no information and must be filtered out by the caller.
"""

from __future__ import annotations

from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .geometry import FREE, UNKNOWN, Cell, CellAtLevel

RENORM_THRESHOLD = 1e100


class LabeledVoxel(NamedTuple):
    cell: Cell
    label: int  # object id, FREE, or UNKNOWN


class _Node:
    __slots__ = ("value", "children")

    def __init__(self, value: float) -> None:
        self.value = value
        self.children: list[_Node | None] | None = None


def _child_index(x: int, y: int, z: int, bit: int) -> int:
    return (((x >> bit) & 1) << 2) | (((y >> bit) & 1) << 1) | ((z >> bit) & 1)


class OctreeBelief:
    """Unnormalized octree density over ground cells, with lazy nodes."""

    __slots__ = ("m", "lmax", "normalizer", "default_ground_value", "_root", "_nodes")

    def __init__(self, m: int) -> None:
        if m < 2 or (m & (m - 1)) != 0:
            raise ValueError(f"grid size must be a power of two >= 2, got {m}")
        self.m = m
        self.lmax = m.bit_length() - 1
        self.default_ground_value = 1.0
        self.normalizer = float(m) ** 3
        self._root = _Node(self.normalizer)
        self._nodes = 1

    @classmethod
    def new_uniform(cls, m: int) -> "OctreeBelief":
        return cls(m)

    @classmethod
    def with_prior(cls, m: int, prior: Mapping[Cell, float]) -> "OctreeBelief":
        """Uniform belief with selected ground cells pre-materialized to
        the given relative weights (unspecified cells keep weight 1)."""
        b = cls(m)
        for cell, w in prior.items():
            if w < 0:
                raise ValueError(f"prior weight must be nonnegative: {w}")
            b._set_ground_value(cell, float(w))
        return b

    # -- queries -----------------------------------------------------------

    def _check_cell(self, cell: Cell, level: int) -> None:
        if not 0 <= level <= self.lmax:
            raise ValueError(f"level out of range: {level}")
        s = self.m >> level
        x, y, z = cell
        if not (0 <= x < s and 0 <= y < s and 0 <= z < s):
            raise ValueError(f"cell {cell} out of bounds at level {level}")

    def value_at(self, cell: Cell | CellAtLevel, level: int = 0) -> float:
        """Unnormalized value of a node (materialized or not)."""
        if isinstance(cell, CellAtLevel):
            cell, level = cell.cell, cell.level
        self._check_cell(cell, level)
        x, y, z = cell
        node = self._root
        for lev in range(self.lmax, level, -1):
            if node.children is None:
                return 8.0 ** level * self.default_ground_value
            ch = node.children[_child_index(x, y, z, lev - 1 - level)]
            if ch is None:
                return 8.0 ** level * self.default_ground_value
            node = ch
        return node.value

    def prob_at(self, cell: Cell | CellAtLevel, level: int = 0) -> float:
        """Normalized probability of the object being inside the node."""
        return self.value_at(cell, level) / self.normalizer

    def materialized_node_count(self) -> int:
        return self._nodes

    # -- updates -----------------------------------------------------------

    def _ground_path(self, x: int, y: int, z: int) -> tuple[list[_Node], _Node]:
        """Materialize and return (ancestors root..level1, ground node)."""
        node = self._root
        path = [node]
        for lev in range(self.lmax, 0, -1):
            if node.children is None:
                node.children = [None] * 8
            ci = _child_index(x, y, z, lev - 1)
            ch = node.children[ci]
            if ch is None:
                ch = _Node(8.0 ** (lev - 1) * self.default_ground_value)
                node.children[ci] = ch
                self._nodes += 1
            node = ch
            if lev > 1:
                path.append(node)
        return path, node

    def _set_ground_value(self, cell: Cell, value: float) -> None:
        self._check_cell(cell, 0)
        x, y, z = cell
        path, ground = self._ground_path(x, y, z)
        delta = value - ground.value
        ground.value = value
        for anc in path:
            anc.value += delta
        self.normalizer += delta

    def update(
        self,
        voxels: Iterable[LabeledVoxel | tuple[Cell, int]],
        alpha: float,
        beta: float,
        object_id: int,
    ) -> "OctreeBelief":
        """Multiply ground values by alpha (label == object_id) or beta
        (label == FREE); propagate the deltas to keep every interior value
        and the normalizer consistent. Rejects Unknown or foreign labels,
        out-of-bounds voxels, alpha <= 0 and beta < 0.
        """
        if alpha <= 0:
            raise ValueError(f"alpha must be positive: {alpha}")
        if beta < 0:
            raise ValueError(f"beta must be nonnegative: {beta}")
        for cell, label in voxels:
            if label == object_id:
                factor = alpha
            elif label == FREE:
                factor = beta
            elif label == UNKNOWN:
                raise ValueError("Unknown-labeled voxels carry no evidence; filter them out")
            else:
                raise ValueError(f"voxel label {label} is not {object_id} or FREE")
            self._check_cell(cell, 0)
            x, y, z = cell
            path, ground = self._ground_path(x, y, z)
            new = ground.value * factor
            delta = new - ground.value
            ground.value = new
            for anc in path:
                anc.value += delta
            self.normalizer += delta
        if self.normalizer > RENORM_THRESHOLD:
            self.renormalize_in_place()
        return self

    def renormalize_in_place(self) -> None:
        """Divide all values by normalizer / m^3; probabilities unchanged."""
        factor = self.normalizer / float(self.m) ** 3
        stack = [self._root]
        while stack:
            node = stack.pop()
            node.value /= factor
            if node.children is not None:
                for ch in node.children:
                    if ch is not None:
                        stack.append(ch)
        self.default_ground_value /= factor
        self.normalizer /= factor

    # -- sampling ----------------------------------------------------------

    def sample(
        self,
        level: int,
        rng: np.random.Generator,
        stats: dict | None = None,
    ) -> CellAtLevel:
        """Draw a level-l cell with probability proportional to its value.

        Descends one level at a time picking a child proportionally to its
        effective value, so a draw visits at most lmax nodes and costs
        O(log m) regardless of how much of the tree is materialized.
        """
        if not 0 <= level <= self.lmax:
            raise ValueError(f"level out of range: {level}")
        steps = self.lmax - level
        if steps == 0:
            return CellAtLevel((0, 0, 0), self.lmax)
        us = rng.random(steps)
        node: _Node | None = self._root
        x = y = z = 0
        visits = 0
        for i, lev in enumerate(range(self.lmax, level, -1)):
            u = us[i]
            ci = -1
            child: _Node | None = None
            if node is not None and node.children is not None:
                target = u * node.value
                default = 8.0 ** (lev - 1) * self.default_ground_value
                acc = 0.0
                last_pos = -1
                last_child: _Node | None = None
                for j in range(8):
                    ch = node.children[j]
                    v = ch.value if ch is not None else default
                    if v > 0.0:
                        last_pos = j
                        last_child = ch
                    acc += v
                    if target < acc:
                        ci = j
                        child = ch
                        break
                if ci < 0:  # float roundoff guard
                    ci = last_pos
                    child = last_child
            else:
                # untouched subtree: children are uniform by construction
                ci = int(u * 8)
                child = None
            visits += 1
            x = (x << 1) | ((ci >> 2) & 1)
            y = (y << 1) | ((ci >> 1) & 1)
            z = (z << 1) | (ci & 1)
            node = child
        if stats is not None:
            stats["visits"] = stats.get("visits", 0) + visits
        return CellAtLevel((x, y, z), level)

    def sample_descend(
        self,
        cell_l: CellAtLevel,
        rng: np.random.Generator,
    ) -> Cell | None:
        """Draw a ground cell inside a level-l block, weighted by ground
        values (None if the block carries zero mass)."""
        self._check_cell(cell_l.cell, cell_l.level)
        if self.value_at(cell_l) <= 0.0:
            return None
        x, y, z = cell_l.cell
        # walk to the block's node, tracking materialization
        node: _Node | None = self._root
        for lev in range(self.lmax, cell_l.level, -1):
            if node is None or node.children is None:
                node = None
                break
            node = node.children[_child_index(x, y, z, lev - 1 - cell_l.level)]
        steps = cell_l.level
        if steps == 0:
            return (x, y, z)
        us = rng.random(steps)
        for i, lev in enumerate(range(cell_l.level, 0, -1)):
            u = us[i]
            ci = -1
            child: _Node | None = None
            if node is not None and node.children is not None:
                target = u * node.value
                default = 8.0 ** (lev - 1) * self.default_ground_value
                acc = 0.0
                last_pos = -1
                last_child: _Node | None = None
                for j in range(8):
                    ch = node.children[j]
                    v = ch.value if ch is not None else default
                    if v > 0.0:
                        last_pos = j
                        last_child = ch
                    acc += v
                    if target < acc:
                        ci = j
                        child = ch
                        break
                if ci < 0:
                    ci = last_pos
                    child = last_child
            else:
                ci = int(u * 8)
                child = None
            x = (x << 1) | ((ci >> 2) & 1)
            y = (y << 1) | ((ci >> 1) & 1)
            z = (z << 1) | (ci & 1)
            node = child
        return (x, y, z)

    # -- bulk access ---------------------------------------------------------

    def ground_array(self) -> np.ndarray:
        """Dense (m, m, m) array of unnormalized ground values."""
        m = self.m
        arr = np.full((m, m, m), self.default_ground_value, dtype=np.float64)
        stack: list[tuple[_Node, int, int, int, int]] = [(self._root, self.lmax, 0, 0, 0)]
        while stack:
            node, lev, x, y, z = stack.pop()
            if lev == 0:
                arr[x, y, z] = node.value
                continue
            if node.children is None:
                continue  # untouched subtree stays at the default
            for ci, ch in enumerate(node.children):
                if ch is not None:
                    stack.append((
                        ch,
                        lev - 1,
                        (x << 1) | ((ci >> 2) & 1),
                        (y << 1) | ((ci >> 1) & 1),
                        (z << 1) | (ci & 1),
                    ))
        return arr

    # -- serialization ---------------------------------------------------------

    def save(self, path: str) -> None:
        """Structured-text snapshot: header, then one materialized node per
        line (level x y z value) in parent-before-child order."""
        lines = [
            "octree-belief 1",
            f"m {self.m}",
            f"normalizer {self.normalizer!r}",
            f"default {self.default_ground_value!r}",
        ]
        stack: list[tuple[_Node, int, int, int, int]] = [(self._root, self.lmax, 0, 0, 0)]
        while stack:
            node, lev, x, y, z = stack.pop()
            lines.append(f"{lev} {x} {y} {z} {node.value!r}")
            if node.children is not None:
                for ci, ch in enumerate(node.children):
                    if ch is not None:
                        stack.append((
                            ch,
                            lev - 1,
                            (x << 1) | ((ci >> 2) & 1),
                            (y << 1) | ((ci >> 1) & 1),
                            (z << 1) | (ci & 1),
                        ))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str) -> "OctreeBelief":
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        if not lines or lines[0].split() != ["octree-belief", "1"]:
            raise ValueError(f"not an octree belief snapshot: {path}")
        m = int(lines[1].split()[1])
        normalizer = float(lines[2].split()[1])
        default = float(lines[3].split()[1])
        b = cls(m)
        for ln in lines[4:]:
            parts = ln.split()
            lev, x, y, z = (int(v) for v in parts[:4])
            value = float(parts[4])
            if lev == b.lmax:
                b._root.value = value
                continue
            node = b._root
            for cur in range(b.lmax, lev, -1):
                if node.children is None:
                    node.children = [None] * 8
                ci = _child_index(x, y, z, cur - 1 - lev)
                ch = node.children[ci]
                if ch is None:
                    ch = _Node(0.0)
                    node.children[ci] = ch
                    b._nodes += 1
                node = ch
            node.value = value
        b.normalizer = normalizer
        b.default_ground_value = default
        return b

    def __repr__(self) -> str:
        return (f"OctreeBelief(m={self.m}, nodes={self._nodes}, "
                f"normalizer={self.normalizer:.6g})")
