"""Pure-Python planner kernels: the reference twin of octsearch._native.

Both implementations share the exact same arithmetic and consume random
numbers from the same splitmix64 stream in the same order, so a seeded
search returns bit-identical results on either. Keep any change here in
lockstep with the extension.

The hot entry points are classify (frustum visibility with occlusion),
match_particles (particle filtering against an observed label array) and
run_pouct (one UCT search over a sampled-belief generative model).
"""

from __future__ import annotations

import math
import time

import numpy as np

IMPL = "pure"

# Label codes shared with geometry.py (kept literal here so the kernel
# modules stay import-independent).
_OUT = -3
_UNKNOWN = -2
_FREE = -1

# Engine-internal per-object look labels used only inside observation keys.
_L_NONE = 0
_L_FREE = 1
_L_HIT = 2

_DIRV = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))

_MASK64 = (1 << 64) - 1
_TWO53 = 2.0 ** -53


class SplitMix64:
    """Deterministic 64-bit RNG; mirrors the C implementation bit for bit."""

    __slots__ = ("state",)

    def __init__(self, seed: int) -> None:
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_float(self) -> float:
        return (self.next_u64() >> 11) * _TWO53

    def next_int(self, n: int) -> int:
        return int(self.next_float() * n)


def derive_seed(*parts: int) -> int:
    """Folds integers into one 64-bit seed through the splitmix permutation."""
    rng = SplitMix64(0x5DEECE66D)
    acc = 0
    for p in parts:
        rng.state = (rng.state ^ (p & _MASK64)) & _MASK64
        acc = rng.next_u64()
    return acc


def classify(px, py, pz, off, pix, dep, occ, m, r):
    """Label every frustum-table entry for a camera at (px, py, pz).

    Returns an int32 array aligned with the table rows: -3 out of grid,
    -2 occluded, -1 visible free space (or a visible obstacle), otherwise
    the positive id of the visible object occupying the cell. occ is the
    flat int32 occupancy grid (0 empty, >0 object, <0 obstacle).
    """
    ox = off[:, 0].astype(np.int64) + px
    oy = off[:, 1].astype(np.int64) + py
    oz = off[:, 2].astype(np.int64) + pz
    inb = (
        (ox >= 0) & (ox < m)
        & (oy >= 0) & (oy < m)
        & (oz >= 0) & (oz < m)
    )
    flat = (ox * m + oy) * m + oz
    occv = np.zeros(off.shape[0], dtype=np.int32)
    occv[inb] = occ[flat[inb]]

    big = np.int32(2**31 - 1)
    dmin = np.full(r * r, big, dtype=np.int32)
    blockers = inb & (occv != 0)
    np.minimum.at(dmin, pix[blockers], dep[blockers])

    codes = np.full(off.shape[0], _OUT, dtype=np.int32)
    occluded = inb & (dep > dmin[pix])
    vis = inb & ~occluded
    codes[occluded] = _UNKNOWN
    codes[vis] = np.where(occv[vis] > 0, occv[vis], _FREE)
    return codes


def match_particles(
    px, py, pz,
    off, pix, dep,
    lut_pix, lut_dep, far, side,
    obstacles, particles, obj_ids,
    m, r, real_codes, p_hit, seed,
):
    """Flag which particles reproduce an observed label array exactly.

    Each particle is a row of flat ground cell indices (one per object).
    The predicted observation places the particle's objects plus the fixed
    obstacles in an empty grid, applies the same occlusion rule as classify
    and samples per-voxel detection with probability p_hit, consuming draws
    from a splitmix64 stream seeded with `seed` in (particle, table-entry)
    order. Returns a uint8 array: 1 = predicted observation equals
    real_codes at every table entry.
    """
    rng = SplitMix64(seed)
    K = off.shape[0]
    P, n = particles.shape
    big = 2**31 - 1

    off_l = off.tolist()
    pix_l = pix.tolist()
    dep_l = dep.tolist()
    lut_pix_l = lut_pix.tolist()
    lut_dep_l = lut_dep.tolist()
    real_l = real_codes.tolist()
    obst_l = [tuple(row) for row in obstacles.tolist()]
    parts_l = particles.tolist()
    ids_l = obj_ids.tolist()

    # Obstacle pixel/depth entries are pose-fixed across particles.
    obst_pd = []
    obst_cells = set()
    for (qx, qy, qz) in obst_l:
        obst_cells.add((qx, qy, qz))
        wx, wy, wz = qx - px, qy - py, qz - pz
        if abs(wx) > far or abs(wy) > far or abs(wz) > far:
            continue
        li = ((wx + far) * side + (wy + far)) * side + (wz + far)
        ppix = lut_pix_l[li]
        if ppix >= 0:
            obst_pd.append((ppix, lut_dep_l[li]))

    out = np.zeros(P, dtype=np.uint8)
    mm = m * m
    for p in range(P):
        row = parts_l[p]
        cells = []
        dmin = {}
        for ppix, pdep in obst_pd:
            cur = dmin.get(ppix, big)
            if pdep < cur:
                dmin[ppix] = pdep
        for j in range(n):
            f = row[j]
            cx = f // mm
            cy = (f // m) % m
            cz = f % m
            cells.append((cx, cy, cz))
            wx, wy, wz = cx - px, cy - py, cz - pz
            if abs(wx) > far or abs(wy) > far or abs(wz) > far:
                continue
            li = ((wx + far) * side + (wy + far)) * side + (wz + far)
            ppix = lut_pix_l[li]
            if ppix >= 0:
                pdep = lut_dep_l[li]
                cur = dmin.get(ppix, big)
                if pdep < cur:
                    dmin[ppix] = pdep
        ok = True
        for k in range(K):
            cx = off_l[k][0] + px
            cy = off_l[k][1] + py
            cz = off_l[k][2] + pz
            if not (0 <= cx < m and 0 <= cy < m and 0 <= cz < m):
                continue  # real observation is out-of-grid here too
            kpix = pix_l[k]
            kdep = dep_l[k]
            if kdep > dmin.get(kpix, big):
                pred = _UNKNOWN
            else:
                pred = _FREE
                cell = (cx, cy, cz)
                for j in range(n):
                    if cells[j] == cell:
                        if rng.next_float() < p_hit:
                            pred = ids_l[j]
                        break
            if pred != real_l[k]:
                ok = False
                break
        out[p] = 1 if ok else 0
    return out


class _Engine:
    """One UCT search over the sampled-belief generative model."""

    def __init__(self, prob, seed: int) -> None:
        self.rng = SplitMix64(seed)
        self.m = prob.m
        self.level = prob.level
        self.lmax = prob.lmax
        self.n = prob.n_objects
        self.all_mask = (1 << self.n) - 1
        self.gamma = prob.gamma
        self.ucb_c = prob.ucb_c
        self.p_hit = prob.p_hit
        self.r_max = prob.r_max
        self.r_min = prob.r_min
        self.r_step = prob.r_step
        self.max_depth = prob.max_depth
        self.k_samples = prob.k_samples
        self.far = prob.far
        self.side = 2 * prob.far + 1
        self.s3 = self.side ** 3

        self.act_kind = prob.act_kind.tolist()
        self.act_par = prob.act_par.tolist()
        self.A = len(self.act_kind)
        self.lut_pix = prob.lut_pix.tolist()
        self.lut_dep = prob.lut_dep.tolist()
        self.obst_cells = [tuple(rw) for rw in prob.obstacles.tolist()]
        self.obst_grid = prob.obst_grid.tolist()
        self.pyr = prob.pyramid.tolist()
        self.poff = prob.pyr_off.tolist()
        self.plen = prob.plen

        self.rx, self.ry, self.rz, self.rdir = prob.robot
        self.found0 = prob.found0

        if prob.particles is not None:
            self.particles = prob.particles.tolist()
            self.n_particles = len(self.particles)
        else:
            self.particles = None
            self.n_particles = 0

        self.objf = [0] * self.n
        self.objx = [0] * self.n
        self.objy = [0] * self.n
        self.objz = [0] * self.n

        self.nh: list[int] = []
        self.nq: list[list[int]] = []
        self.q: list[list[float]] = []
        self.children: list[dict] = []

    # -- tree ------------------------------------------------------------

    def _new_node(self) -> int:
        self.nh.append(0)
        self.nq.append([0] * self.A)
        self.q.append([0.0] * self.A)
        self.children.append({})
        return len(self.nh) - 1

    def _select(self, node: int) -> int:
        nq = self.nq[node]
        for a in range(self.A):
            if nq[a] == 0:
                return a
        q = self.q[node]
        logn = math.log(self.nh[node])
        c = self.ucb_c
        best = -math.inf
        besta = 0
        for a in range(self.A):
            val = q[a] + c * math.sqrt(logn / nq[a])
            if val > best:
                best = val
                besta = a
        return besta

    # -- belief pyramid --------------------------------------------------

    def _descend(self, base: int, from_level: int, flat: int, to_level: int) -> int:
        """Weighted 8-way descent through one object's value pyramid."""
        pyr = self.pyr
        poff = self.poff
        m = self.m
        rng = self.rng
        for lev in range(from_level, to_level, -1):
            sp = m >> lev
            sc = m >> (lev - 1)
            x = flat // (sp * sp)
            rem = flat % (sp * sp)
            y = rem // sp
            z = rem % sp
            pv = pyr[base + poff[lev] + flat]
            rr = rng.next_float() * pv
            acc = 0.0
            pick = -1
            last_pos = -1
            child_base = base + poff[lev - 1]
            for ci in range(8):
                cx = x + x + ((ci >> 2) & 1)
                cy = y + y + ((ci >> 1) & 1)
                cz = z + z + (ci & 1)
                cf = (cx * sc + cy) * sc + cz
                v = pyr[child_base + cf]
                if v > 0.0:
                    last_pos = cf
                acc += v
                if rr < acc:
                    pick = cf
                    break
            if pick < 0:
                pick = last_pos  # float roundoff guard
            flat = pick
        return flat

    def _sample_root(self) -> None:
        n = self.n
        m = self.m
        if self.particles is not None:
            row = self.particles[self.rng.next_int(self.n_particles)]
            mm = m * m
            for i in range(n):
                f = row[i]
                self.objf[i] = f
                self.objx[i] = f // mm
                self.objy[i] = (f // m) % m
                self.objz[i] = f % m
        else:
            lev = self.level
            s = m >> lev
            ss = s * s
            for i in range(n):
                f = self._descend(i * self.plen, self.lmax, 0, lev)
                self.objf[i] = f
                self.objx[i] = f // ss
                self.objy[i] = (f // s) % s
                self.objz[i] = f % s

    # -- visibility ------------------------------------------------------

    def _vis_ground_cell(self, gx, gy, gz, rx, ry, rz, rdir, skip_obj):
        """Is ground cell (gx,gy,gz) visible from the robot?

        skip_obj >= 0 means the sampled objects (other than skip_obj)
        occlude, as in the ground-level instance; skip_obj == -1 restricts
        occluders to obstacles, as in abstract instances.
        """
        far = self.far
        ox = gx - rx
        oy = gy - ry
        oz = gz - rz
        if ox < -far or ox > far or oy < -far or oy > far or oz < -far or oz > far:
            return False
        side = self.side
        base = rdir * self.s3
        li = ((ox + far) * side + (oy + far)) * side + (oz + far)
        pixv = self.lut_pix[base + li]
        if pixv < 0:
            return False
        depv = self.lut_dep[base + li]
        if skip_obj >= 0:
            objx = self.objx
            objy = self.objy
            objz = self.objz
            for j in range(self.n):
                if j == skip_obj:
                    continue
                wx = objx[j] - rx
                wy = objy[j] - ry
                wz = objz[j] - rz
                if wx < -far or wx > far or wy < -far or wy > far or wz < -far or wz > far:
                    continue
                lj = ((wx + far) * side + (wy + far)) * side + (wz + far)
                if self.lut_pix[base + lj] == pixv and self.lut_dep[base + lj] < depv:
                    return False
        for (qx, qy, qz) in self.obst_cells:
            wx = qx - rx
            wy = qy - ry
            wz = qz - rz
            if wx < -far or wx > far or wy < -far or wy > far or wz < -far or wz > far:
                continue
            lj = ((wx + far) * side + (wy + far)) * side + (wz + far)
            if self.lut_pix[base + lj] == pixv and self.lut_dep[base + lj] < depv:
                return False
        return True

    # -- generative model -------------------------------------------------

    def _look_ground(self, rx, ry, rz, rdir):
        labs = []
        rng = self.rng
        p_hit = self.p_hit
        for i in range(self.n):
            if self._vis_ground_cell(self.objx[i], self.objy[i], self.objz[i],
                                     rx, ry, rz, rdir, i):
                labs.append(_L_HIT if rng.next_float() < p_hit else _L_FREE)
            else:
                labs.append(_L_NONE)
        labs.sort()
        return tuple(labs)

    def _look_abstract(self, rx, ry, rz, rdir):
        out = []
        rng = self.rng
        k = self.k_samples
        lev = self.level
        m = self.m
        mm = m * m
        p_hit = self.p_hit
        for i in range(self.n):
            base = i * self.plen
            cl = self.objf[i]
            pv = self.pyr[base + self.poff[lev] + cl]
            hits = 0
            if pv > 0.0:
                for _ in range(k):
                    g = self._descend(base, lev, cl, 0)
                    gx = g // mm
                    gy = (g // m) % m
                    gz = g % m
                    if self._vis_ground_cell(gx, gy, gz, rx, ry, rz, rdir, -1):
                        if rng.next_float() < p_hit:
                            hits += 1
            out.append(cl)
            out.append(_L_HIT if 2 * hits > k else _L_FREE)
        return tuple(out)

    def _gen(self, a, rx, ry, rz, rdir, found):
        """One generative step; objects are static within a simulation."""
        kind = self.act_kind[a]
        if kind == 0:  # primitive move, clamped at bounds and obstacles
            par = self.act_par[a]
            m = self.m
            dv = _DIRV[par]
            nx = rx + dv[0]
            ny = ry + dv[1]
            nz = rz + dv[2]
            if (0 <= nx < m and 0 <= ny < m and 0 <= nz < m
                    and self.obst_grid[(nx * m + ny) * m + nz] == 0):
                rx, ry, rz = nx, ny, nz
            return rx, ry, rz, rdir, found, None, self.r_step, False
        if kind == 1:  # look
            rdir = self.act_par[a]
            if self.level == 0:
                key = self._look_ground(rx, ry, rz, rdir)
            else:
                key = self._look_abstract(rx, ry, rz, rdir)
            return rx, ry, rz, rdir, found, key, self.r_step, False
        if kind == 2:  # find
            newfound = found
            if self.level == 0:
                for i in range(self.n):
                    if (found >> i) & 1:
                        continue
                    if self._vis_ground_cell(self.objx[i], self.objy[i], self.objz[i],
                                             rx, ry, rz, rdir, i):
                        newfound |= 1 << i
            else:
                m = self.m
                mm = m * m
                for i in range(self.n):
                    if (found >> i) & 1:
                        continue
                    base = i * self.plen
                    pv = self.pyr[base + self.poff[self.level] + self.objf[i]]
                    if pv <= 0.0:
                        continue
                    g = self._descend(base, self.level, self.objf[i], 0)
                    gx = g // mm
                    gy = (g // m) % m
                    gz = g % m
                    if self._vis_ground_cell(gx, gy, gz, rx, ry, rz, rdir, -1):
                        newfound |= 1 << i
            r = self.r_max if newfound != found else self.r_min
            return rx, ry, rz, rdir, newfound, None, r, newfound == self.all_mask
        # kind == 3: move option straight to a distant goal cell
        par = self.act_par[a]
        m = self.m
        gx = par // (m * m)
        gy = (par // m) % m
        gz = par % m
        L = abs(gx - rx) + abs(gy - ry) + abs(gz - rz)
        if L == 0:
            r = 0.0
        else:
            r = self.r_step * (1.0 - self.gamma ** L) / (1.0 - self.gamma)
        if self.obst_grid[par] == 0:
            rx, ry, rz = gx, gy, gz
        return rx, ry, rz, rdir, found, None, r, False

    # -- search ------------------------------------------------------------

    def _rollout(self, rx, ry, rz, rdir, found, depth):
        total = 0.0
        disc = 1.0
        rng = self.rng
        A = self.A
        while depth < self.max_depth:
            a = rng.next_int(A)
            rx, ry, rz, rdir, found, _, r, done = self._gen(a, rx, ry, rz, rdir, found)
            total += disc * r
            if done:
                break
            disc *= self.gamma
            depth += 1
        return total

    def _simulate(self, rx, ry, rz, rdir, found, node, depth):
        if depth >= self.max_depth:
            return 0.0
        a = self._select(node)
        nrx, nry, nrz, nrdir, nfound, obs_key, r, done = self._gen(a, rx, ry, rz, rdir, found)
        if done or depth + 1 >= self.max_depth:
            total = r
        else:
            key = (a, obs_key)
            chd = self.children[node]
            child = chd.get(key)
            if child is None:
                child = self._new_node()
                chd[key] = child
                total = r + self.gamma * self._rollout(nrx, nry, nrz, nrdir, nfound, depth + 1)
            else:
                total = r + self.gamma * self._simulate(nrx, nry, nrz, nrdir, nfound, child, depth + 1)
        self.nh[node] += 1
        nq = self.nq[node]
        q = self.q[node]
        nq[a] += 1
        q[a] += (total - q[a]) / nq[a]
        return total

    def run(self, num_sims, deadline):
        self._new_node()  # root = 0
        sims = 0
        while True:
            if num_sims is not None and sims >= num_sims:
                break
            if deadline is not None and time.perf_counter() >= deadline:
                break
            if num_sims is None and deadline is None:
                break
            self._sample_root()
            self._simulate(self.rx, self.ry, self.rz, self.rdir, self.found0, 0, 0)
            sims += 1
        nq0 = self.nq[0]
        q0 = self.q[0]
        best = -math.inf
        besta = -1
        for a in range(self.A):
            if nq0[a] > 0 and q0[a] > best:
                best = q0[a]
                besta = a
        flagged = besta < 0
        if flagged:
            besta = self.rng.next_int(self.A)
        return {
            "action": besta,
            "q": list(q0),
            "n": list(nq0),
            "sims": sims,
            "flagged": flagged,
            "impl": IMPL,
        }


def run_pouct(problem, seed: int, num_sims=None, deadline=None):
    """Run one POUCT search; stops at num_sims or at the wall-clock deadline."""
    return _Engine(problem, seed).run(num_sims, deadline)
