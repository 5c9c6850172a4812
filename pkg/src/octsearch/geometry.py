"""Grid geometry for a discretized cube world: resolution levels, camera
frames, viewing-frustum tables and occlusion-aware visibility.

Cells are unit cubes addressed by nonnegative integer coordinates. All
frustum tests treat a cell as the point at its center and place the camera
at the center of its own cell, so relative cell positions are exact integer
offsets. A cell is inside the frustum iff its forward depth z satisfies
near <= z < far (far plane exclusive) and its projection fits the
field-of-view cone along both camera axes.

Occlusion uses a depth raster: the frustum cross-section is divided into
r x r pixels (r = 2 * far); within a pixel only the nearest occupied cell
is visible and anything strictly behind it is occluded (Unknown).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from ._impl import kernels

Cell = tuple[int, int, int]

# Observation label codes shared across the package. Object labels are the
# (positive) object ids themselves.
FREE = -1        # visible empty space, or a visible obstacle surface
UNKNOWN = -2     # inside the frustum but occluded
OUT_OF_GRID = -3

DIR_VECTORS: tuple[Cell, ...] = (
    (1, 0, 0), (-1, 0, 0),
    (0, 1, 0), (0, -1, 0),
    (0, 0, 1), (0, 0, -1),
)
DIR_NAMES = ("+x", "-x", "+y", "-y", "+z", "-z")


def direction_index(name: str) -> int:
    return DIR_NAMES.index(name)


class CellAtLevel(NamedTuple):
    """A cell of the level-l grid; level 0 is the ground resolution."""

    cell: Cell
    level: int


@dataclass(frozen=True)
class CameraPose:
    position: Cell
    direction: int  # index into DIR_VECTORS

    def __post_init__(self) -> None:
        if not 0 <= self.direction < 6:
            raise ValueError(f"direction index out of range: {self.direction}")

    def direction_name(self) -> str:
        return DIR_NAMES[self.direction]


@dataclass(frozen=True)
class FrustumParams:
    far: int
    fov_angle_deg: float = 45.0
    aspect: float = 1.0
    near: int = 1

    def __post_init__(self) -> None:
        if not 0 < self.near < self.far:
            raise ValueError(f"require 0 < near < far, got {self.near}, {self.far}")
        if not 0.0 < self.fov_angle_deg < 180.0:
            raise ValueError(f"fov_angle_deg out of range: {self.fov_angle_deg}")
        if self.aspect <= 0.0:
            raise ValueError(f"aspect must be positive: {self.aspect}")


@dataclass
class VisibilityResult:
    """Partition of the in-frustum, in-grid cells for one camera pose."""

    visible_free: set[Cell]
    visible_object: dict[Cell, int]
    occluded: set[Cell]

    def all_cells(self) -> set[Cell]:
        return self.visible_free | set(self.visible_object) | self.occluded

    def label_of(self, cell: Cell) -> int:
        if cell in self.visible_object:
            return self.visible_object[cell]
        if cell in self.visible_free:
            return FREE
        if cell in self.occluded:
            return UNKNOWN
        return OUT_OF_GRID


def camera_basis(direction: int) -> tuple[Cell, Cell, Cell]:
    """Forward, right and up unit vectors for a cardinal view direction.

    The up hint is +z for horizontal directions and +x for the vertical
    ones; right = forward x up_hint and up = right x forward, so the basis
    is right-handed and fully determined by the direction index.
    """
    f = DIR_VECTORS[direction]
    hint = (0, 0, 1) if direction < 4 else (1, 0, 0)
    r = _cross(f, hint)
    u = _cross(r, f)
    return f, r, u


def _cross(a: Cell, b: Cell) -> Cell:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def _dot(a: Cell, b: Cell) -> int:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


@dataclass(frozen=True)
class FrustumGeom:
    """Precomputed per-direction frustum tables for one parameter set.

    offsets[d] lists the integer cell offsets inside the frustum for view
    direction d; pixels[d] and depths[d] give each offset's raster pixel
    (flattened px * r + py) and integer depth. lut_pix / lut_dep are dense
    offset-indexed lookups over the cube [-far, far]^3 (value -1 = outside
    the frustum), laid out with a per-direction stride of side**3.
    """

    params: FrustumParams
    r: int
    side: int  # 2 * far + 1
    tan_half: float
    offsets: tuple[np.ndarray, ...] = field(repr=False)
    pixels: tuple[np.ndarray, ...] = field(repr=False)
    depths: tuple[np.ndarray, ...] = field(repr=False)
    lut_pix: np.ndarray = field(repr=False)
    lut_dep: np.ndarray = field(repr=False)

    def cells_in_frustum(self, direction: int) -> int:
        return int(self.offsets[direction].shape[0])


@lru_cache(maxsize=32)
def frustum_geom(params: FrustumParams) -> FrustumGeom:
    far = params.far
    near = params.near
    tan_half = math.tan(math.radians(params.fov_angle_deg) / 2.0)
    r = 2 * far
    side = 2 * far + 1

    axes = np.arange(-far, far + 1, dtype=np.int64)
    dx, dy, dz = np.meshgrid(axes, axes, axes, indexing="ij")
    dx = dx.ravel()
    dy = dy.ravel()
    dz = dz.ravel()

    offsets = []
    pixels = []
    depths = []
    lut_pix = np.full((6, side**3), -1, dtype=np.int32)
    lut_dep = np.zeros((6, side**3), dtype=np.int32)
    for d in range(6):
        f, rv, uv = camera_basis(d)
        z = dx * f[0] + dy * f[1] + dz * f[2]
        u = dx * rv[0] + dy * rv[1] + dz * rv[2]
        v = dx * uv[0] + dy * uv[1] + dz * uv[2]
        half_u = z * (tan_half * params.aspect)
        half_v = z * tan_half
        mask = (z >= near) & (z < far) & (np.abs(u) <= half_u) & (np.abs(v) <= half_v)

        ox = dx[mask]
        oy = dy[mask]
        oz = dz[mask]
        zm = z[mask]
        um = u[mask]
        vm = v[mask]
        px = np.floor((um / (zm * tan_half * params.aspect) + 1.0) / 2.0 * r).astype(np.int64)
        py = np.floor((vm / (zm * tan_half) + 1.0) / 2.0 * r).astype(np.int64)
        np.clip(px, 0, r - 1, out=px)
        np.clip(py, 0, r - 1, out=py)
        pix = (px * r + py).astype(np.int32)
        dep = zm.astype(np.int32)

        off = np.stack([ox, oy, oz], axis=1).astype(np.int32)
        offsets.append(np.ascontiguousarray(off))
        pixels.append(np.ascontiguousarray(pix))
        depths.append(np.ascontiguousarray(dep))

        lut_idx = ((ox + far) * side + (oy + far)) * side + (oz + far)
        lut_pix[d, lut_idx] = pix
        lut_dep[d, lut_idx] = dep

    return FrustumGeom(
        params=params,
        r=r,
        side=side,
        tan_half=tan_half,
        offsets=tuple(offsets),
        pixels=tuple(pixels),
        depths=tuple(depths),
        lut_pix=lut_pix,
        lut_dep=lut_dep,
    )


def frustum_contains(pose: CameraPose, params: FrustumParams, cell: Cell) -> bool:
    """True iff the cell center lies inside all six frustum planes."""
    f, rv, uv = camera_basis(pose.direction)
    o = (
        cell[0] - pose.position[0],
        cell[1] - pose.position[1],
        cell[2] - pose.position[2],
    )
    z = _dot(o, f)
    if z < params.near or z >= params.far:
        return False
    tan_half = math.tan(math.radians(params.fov_angle_deg) / 2.0)
    if abs(_dot(o, rv)) > z * tan_half * params.aspect:
        return False
    return abs(_dot(o, uv)) <= z * tan_half


def occupancy_grid(occupied: Mapping[Cell, int], m: int) -> np.ndarray:
    """Flat int32 occupancy array: 0 empty, >0 object id, <0 obstacle."""
    occ = np.zeros(m * m * m, dtype=np.int32)
    for (x, y, z), oid in occupied.items():
        if not (0 <= x < m and 0 <= y < m and 0 <= z < m):
            raise ValueError(f"occupied cell out of bounds: {(x, y, z)}")
        if oid == 0:
            raise ValueError("occupant id 0 is reserved for empty space")
        occ[(x * m + y) * m + z] = oid
    return occ


def compute_visibility(
    pose: CameraPose,
    params: FrustumParams,
    occupied: Mapping[Cell, int],
    m: int,
) -> VisibilityResult:
    """Classify every in-frustum grid cell as visible or occluded.

    occupied maps in-bounds cells to occupant ids; positive ids are objects
    and negative ids are obstacles. Obstacles block sight like objects but
    are reported as visible free space (an observed obstacle surface carries
    the Free label), never as visible objects.
    """
    geom = frustum_geom(params)
    occ = occupied if isinstance(occupied, np.ndarray) else occupancy_grid(occupied, m)
    codes = kernels.classify(
        pose.position[0], pose.position[1], pose.position[2],
        geom.offsets[pose.direction],
        geom.pixels[pose.direction],
        geom.depths[pose.direction],
        occ, m, geom.r,
    )
    off = geom.offsets[pose.direction]
    visible_free: set[Cell] = set()
    visible_object: dict[Cell, int] = {}
    occluded: set[Cell] = set()
    px, py, pz = pose.position
    codes_list = codes.tolist()
    for k in range(off.shape[0]):
        c = codes_list[k]
        if c == OUT_OF_GRID:
            continue
        cell = (px + int(off[k, 0]), py + int(off[k, 1]), pz + int(off[k, 2]))
        if c == UNKNOWN:
            occluded.add(cell)
        elif c == FREE:
            visible_free.add(cell)
        else:
            visible_object[cell] = c
    return VisibilityResult(visible_free, visible_object, occluded)


def cell_visible(
    pose: CameraPose,
    params: FrustumParams,
    cell: Cell,
    occupied: Iterable[Cell],
    m: int,
) -> bool:
    """True iff the in-grid cell is inside the frustum and not occluded.

    occupied iterates candidate occluder cells; the queried cell itself and
    cells sharing its exact depth never occlude it.
    """
    if not all(0 <= c < m for c in cell):
        return False
    geom = frustum_geom(params)
    far = params.far
    side = geom.side
    d = pose.direction
    px, py, pz = pose.position
    ox, oy, oz = cell[0] - px, cell[1] - py, cell[2] - pz
    if abs(ox) > far or abs(oy) > far or abs(oz) > far:
        return False
    lut = ((ox + far) * side + (oy + far)) * side + (oz + far)
    pix = int(geom.lut_pix[d, lut])
    if pix < 0:
        return False
    dep = int(geom.lut_dep[d, lut])
    for qx, qy, qz in occupied:
        if (qx, qy, qz) == cell:
            continue
        wx, wy, wz = qx - px, qy - py, qz - pz
        if abs(wx) > far or abs(wy) > far or abs(wz) > far:
            continue
        qlut = ((wx + far) * side + (wy + far)) * side + (wz + far)
        qpix = int(geom.lut_pix[d, qlut])
        if qpix == pix and int(geom.lut_dep[d, qlut]) < dep:
            return False
    return True


def max_coverage_fraction(m: int, params: FrustumParams) -> float:
    """Largest fraction of the grid a single pose can place in-frustum."""
    geom = frustum_geom(params)
    best = 0
    for d in range(6):
        counts = np.zeros((m, m, m), dtype=np.int32)
        for ox, oy, oz in geom.offsets[d].tolist():
            xl, xh = max(0, -ox), min(m, m - ox)
            yl, yh = max(0, -oy), min(m, m - oy)
            zl, zh = max(0, -oz), min(m, m - oz)
            if xl < xh and yl < yh and zl < zh:
                counts[xl:xh, yl:yh, zl:zh] += 1
        best = max(best, int(counts.max()))
    return best / float(m**3)


def level_ancestor(cell: Cell, level: int) -> CellAtLevel:
    """Map a ground cell to the level-l cell whose block contains it."""
    if level < 0:
        raise ValueError(f"level must be nonnegative: {level}")
    return CellAtLevel((cell[0] >> level, cell[1] >> level, cell[2] >> level), level)


def ground_cells_of(cell_l: CellAtLevel) -> set[Cell]:
    """All ground cells covered by a level-l cell (the preimage of phi)."""
    (cx, cy, cz), lev = cell_l
    w = 1 << lev
    x0, y0, z0 = cx * w, cy * w, cz * w
    return {
        (x0 + i, y0 + j, z0 + k)
        for i in range(w)
        for j in range(w)
        for k in range(w)
    }


def center_ground_cell(cell_l: CellAtLevel) -> Cell:
    """Representative ground cell at the center of a level-l block."""
    (cx, cy, cz), lev = cell_l
    w = 1 << lev
    h = (w - 1) >> 1
    return (cx * w + h, cy * w + h, cz * w + h)
