import numpy as np
import pytest

from octsearch.geometry import (
    FREE,
    OUT_OF_GRID,
    UNKNOWN,
    CameraPose,
    CellAtLevel,
    DIR_NAMES,
    DIR_VECTORS,
    FrustumParams,
    camera_basis,
    cell_visible,
    center_ground_cell,
    compute_visibility,
    direction_index,
    frustum_contains,
    frustum_geom,
    ground_cells_of,
    level_ancestor,
    max_coverage_fraction,
    occupancy_grid,
)

from _oracles import raycast_visible


def _random_world(rng, m, n_objects, cells_per_object=3):
    occupied = {}
    oid = 1
    while oid <= n_objects:
        seed_cell = tuple(int(v) for v in rng.integers(0, m, size=3))
        if seed_cell in occupied:
            continue
        block = {seed_cell}
        while len(block) < cells_per_object:
            base = list(block)[rng.integers(0, len(block))]
            axis = int(rng.integers(0, 3))
            step = 1 if rng.random() < 0.5 else -1
            nxt = list(base)
            nxt[axis] += step
            nxt = tuple(nxt)
            if all(0 <= v < m for v in nxt) and nxt not in occupied:
                block.add(nxt)
        for c in block:
            occupied[c] = oid
        oid += 1
    return occupied


class TestFrustumContains:
    def test_camera_cell_excluded(self):
        pose = CameraPose((4, 4, 4), direction_index("+x"))
        params = FrustumParams(far=4)
        assert not frustum_contains(pose, params, (4, 4, 4))

    def test_near_plane(self):
        pose = CameraPose((0, 4, 4), direction_index("+x"))
        params = FrustumParams(far=4)
        assert frustum_contains(pose, params, (1, 4, 4))
        assert frustum_contains(pose, params, (3, 4, 4))

    def test_far_plane_exclusive(self):
        pose = CameraPose((0, 4, 4), direction_index("+x"))
        params = FrustumParams(far=4)
        assert not frustum_contains(pose, params, (4, 4, 4))
        assert not frustum_contains(pose, params, (5, 4, 4))

    def test_behind_camera_excluded(self):
        pose = CameraPose((4, 4, 4), direction_index("+x"))
        params = FrustumParams(far=4)
        assert not frustum_contains(pose, params, (3, 4, 4))
        assert not frustum_contains(pose, params, (2, 4, 4))

    def test_fov_cone(self):
        # at depth z=2 with 45 degree fov the half-extent is 2*tan(22.5) ~ 0.83,
        # so lateral offset 0 is inside and offset 1 is outside
        pose = CameraPose((0, 4, 4), direction_index("+x"))
        params = FrustumParams(far=4)
        assert frustum_contains(pose, params, (2, 4, 4))
        assert not frustum_contains(pose, params, (2, 5, 4))
        # at depth 3 the half-extent is ~1.24 so offset 1 fits
        assert frustum_contains(pose, params, (3, 5, 4))

    def test_matches_offset_tables(self):
        params = FrustumParams(far=6)
        geom = frustum_geom(params)
        pose = CameraPose((8, 8, 8), 3)
        inside = {
            (8 + int(o[0]), 8 + int(o[1]), 8 + int(o[2]))
            for o in geom.offsets[3]
        }
        rng = np.random.default_rng(0)
        for _ in range(300):
            cell = tuple(int(v) for v in rng.integers(0, 17, size=3))
            assert frustum_contains(pose, params, cell) == (cell in inside)


class TestCameraBasis:
    def test_right_handed_orthonormal(self):
        for d in range(6):
            f, r, u = camera_basis(d)
            for v in (f, r, u):
                assert sum(x * x for x in v) == 1
            assert sum(a * b for a, b in zip(f, r)) == 0
            assert sum(a * b for a, b in zip(f, u)) == 0
            assert sum(a * b for a, b in zip(r, u)) == 0
            # camera convention: right x up points backward
            cross = (
                r[1] * u[2] - r[2] * u[1],
                r[2] * u[0] - r[0] * u[2],
                r[0] * u[1] - r[1] * u[0],
            )
            assert cross == (-f[0], -f[1], -f[2])

    def test_direction_names(self):
        assert direction_index("+x") == 0
        assert direction_index("-z") == 5
        assert len(DIR_NAMES) == len(DIR_VECTORS) == 6

    def test_bad_direction_rejected(self):
        with pytest.raises(ValueError):
            CameraPose((0, 0, 0), 6)


class TestVisibility:
    def test_empty_world_nothing_occluded(self):
        m = 8
        pose = CameraPose((0, 4, 4), direction_index("+x"))
        params = FrustumParams(far=6)
        res = compute_visibility(pose, params, {}, m)
        assert res.occluded == set()
        assert res.visible_object == {}
        for cell in res.visible_free:
            assert frustum_contains(pose, params, cell)
            assert all(0 <= v < m for v in cell)

    def test_blocker_occludes_cells_behind(self):
        m = 8
        pose = CameraPose((0, 3, 3), direction_index("+x"))
        params = FrustumParams(far=7)
        res = compute_visibility(pose, params, {(2, 3, 3): 1}, m)
        assert res.visible_object == {(2, 3, 3): 1}
        assert (3, 3, 3) in res.occluded
        assert (4, 3, 3) in res.occluded
        assert (1, 3, 3) in res.visible_free

    def test_obstacle_blocks_but_reads_free(self):
        m = 8
        pose = CameraPose((0, 3, 3), direction_index("+x"))
        params = FrustumParams(far=7)
        res = compute_visibility(pose, params, {(2, 3, 3): -1}, m)
        assert res.visible_object == {}
        assert (2, 3, 3) in res.visible_free
        assert (3, 3, 3) in res.occluded

    def test_partition_of_in_frustum_cells(self):
        m = 8
        rng = np.random.default_rng(3)
        occupied = _random_world(rng, m, 3)
        pose = CameraPose((1, 4, 4), direction_index("+x"))
        params = FrustumParams(far=6)
        res = compute_visibility(pose, params, occupied, m)
        assert res.visible_free.isdisjoint(res.occluded)
        assert res.visible_free.isdisjoint(res.visible_object)
        assert res.occluded.isdisjoint(res.visible_object)
        expected = {
            (x, y, z)
            for x in range(m)
            for y in range(m)
            for z in range(m)
            if frustum_contains(pose, params, (x, y, z))
        }
        assert res.all_cells() == expected

    def test_labels(self):
        m = 8
        pose = CameraPose((0, 3, 3), direction_index("+x"))
        params = FrustumParams(far=7)
        res = compute_visibility(pose, params, {(2, 3, 3): 5}, m)
        assert res.label_of((2, 3, 3)) == 5
        assert res.label_of((1, 3, 3)) == FREE
        assert res.label_of((3, 3, 3)) == UNKNOWN
        assert res.label_of((0, 0, 0)) == OUT_OF_GRID

    def test_raycast_oracle_agreement(self):
        # random 8^3 world with 3 objects: per-cell visible/occluded must
        # agree with a 9-ray majority cast on at least 95% of in-frustum cells
        m = 8
        rng = np.random.default_rng(7)
        occupied = _random_world(rng, m, 3)
        pose = CameraPose((0, 4, 4), direction_index("+x"))
        params = FrustumParams(far=6)
        res = compute_visibility(pose, params, occupied, m)
        cells = sorted(res.all_cells())
        assert len(cells) > 30
        agree = 0
        for cell in cells:
            lib_visible = cell not in res.occluded
            oracle = raycast_visible(pose.position, cell, occupied)
            agree += lib_visible == oracle
        assert agree / len(cells) >= 0.95

    def test_removing_occupant_never_hides_cells(self):
        m = 8
        rng = np.random.default_rng(11)
        occupied = _random_world(rng, m, 3)
        pose = CameraPose((1, 3, 4), direction_index("+x"))
        params = FrustumParams(far=6)
        base = compute_visibility(pose, params, occupied, m)
        base_visible = base.visible_free | set(base.visible_object)
        for cell in list(occupied):
            reduced = dict(occupied)
            del reduced[cell]
            res = compute_visibility(pose, params, reduced, m)
            assert base_visible <= (res.visible_free | set(res.visible_object))

    def test_cell_visible_matches_full_classification(self):
        m = 8
        rng = np.random.default_rng(13)
        occupied = _random_world(rng, m, 3)
        params = FrustumParams(far=6)
        for d in (0, 2, 5):
            pose = CameraPose((3, 4, 4), d)
            res = compute_visibility(pose, params, occupied, m)
            for x in range(m):
                for y in range(m):
                    for z in range(m):
                        cell = (x, y, z)
                        expect = cell in res.visible_free or cell in res.visible_object
                        assert cell_visible(pose, params, cell, occupied, m) == expect

    def test_occupancy_grid_validation(self):
        with pytest.raises(ValueError):
            occupancy_grid({(9, 0, 0): 1}, 8)
        with pytest.raises(ValueError):
            occupancy_grid({(0, 0, 0): 0}, 8)


class TestCoverage:
    @pytest.mark.parametrize(
        "m,far,expected,tol",
        [
            (4, 4, 0.172, 0.02),
            (8, 6, 0.088, 0.02),
            (16, 10, 0.047, 0.01),
            (32, 16, 0.026, 0.02),
        ],
    )
    def test_max_coverage_fraction(self, m, far, expected, tol):
        frac = max_coverage_fraction(m, FrustumParams(far=far))
        assert abs(frac - expected) <= tol

    def test_coverage_is_attained_by_some_pose(self):
        m = 4
        params = FrustumParams(far=4)
        frac = max_coverage_fraction(m, params)
        best = 0
        for d in range(6):
            for x in range(m):
                for y in range(m):
                    for z in range(m):
                        res = compute_visibility(CameraPose((x, y, z), d), params, {}, m)
                        best = max(best, len(res.all_cells()))
        assert best / m**3 == pytest.approx(frac, abs=1e-12)


class TestLevels:
    def test_level_ancestor_examples(self):
        assert level_ancestor((7, 7, 7), 1) == CellAtLevel((3, 3, 3), 1)
        assert level_ancestor((5, 2, 0), 2) == CellAtLevel((1, 0, 0), 2)
        assert level_ancestor((5, 2, 0), 0) == CellAtLevel((5, 2, 0), 0)

    def test_ground_cells_of_block(self):
        cells = ground_cells_of(CellAtLevel((1, 1, 1), 1))
        assert cells == {(x, y, z) for x in (2, 3) for y in (2, 3) for z in (2, 3)}
        assert ground_cells_of(CellAtLevel((2, 0, 1), 0)) == {(2, 0, 1)}

    def test_blocks_partition_grid(self):
        m = 8
        for level in (0, 1, 2, 3):
            seen = set()
            w = m >> level
            for bx in range(w):
                for by in range(w):
                    for bz in range(w):
                        block = ground_cells_of(CellAtLevel((bx, by, bz), level))
                        assert len(block) == 8**level
                        assert seen.isdisjoint(block)
                        seen |= block
            assert len(seen) == m**3

    def test_round_trip(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            level = int(rng.integers(0, 4))
            cell = tuple(int(v) for v in rng.integers(0, 32, size=3))
            anc = level_ancestor(cell, level)
            assert cell in ground_cells_of(anc)
            for g in ground_cells_of(anc):
                assert level_ancestor(g, level) == anc

    def test_center_ground_cell(self):
        assert center_ground_cell(CellAtLevel((0, 0, 0), 1)) == (0, 0, 0)
        assert center_ground_cell(CellAtLevel((1, 0, 2), 2)) == (5, 1, 9)
        assert center_ground_cell(CellAtLevel((3, 3, 3), 0)) == (3, 3, 3)

    def test_negative_level_rejected(self):
        with pytest.raises(ValueError):
            level_ancestor((0, 0, 0), -1)


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            FrustumParams(far=1)
        with pytest.raises(ValueError):
            FrustumParams(far=4, near=0)
        with pytest.raises(ValueError):
            FrustumParams(far=4, fov_angle_deg=0.0)
        with pytest.raises(ValueError):
            FrustumParams(far=4, aspect=-1.0)
