# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled planner kernels: the native twin of octsearch._pure.

Keep every arithmetic expression and every RNG draw in lockstep with the
pure module; a seeded search must return bit-identical results on either
implementation. All integer divisions below operate on nonnegative values,
so cdivision matches Python floor semantics.
"""

from libc.math cimport INFINITY, log, pow, sqrt
from libc.stdint cimport int64_t, uint64_t

import time

import numpy as np

IMPL = "native"

cdef int _OUT = -3
cdef int _UNKNOWN = -2
cdef int _FREE = -1

cdef int _L_NONE = 0
cdef int _L_FREE = 1
cdef int _L_HIT = 2

cdef long[6] _DX = [1, -1, 0, 0, 0, 0]
cdef long[6] _DY = [0, 0, 1, -1, 0, 0]
cdef long[6] _DZ = [0, 0, 0, 0, 1, -1]

cdef double _TWO53 = 2.0 ** -53
cdef int _BIG = 2147483647


cdef inline uint64_t _next_u64(uint64_t *state) noexcept nogil:
    state[0] = state[0] + <uint64_t>0x9E3779B97F4A7C15
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double _next_float(uint64_t *state) noexcept nogil:
    return <double>(_next_u64(state) >> 11) * _TWO53


cdef inline long _next_int(uint64_t *state, long n) noexcept nogil:
    return <long>(_next_float(state) * n)


def derive_seed(*parts):
    """Folds integers into one 64-bit seed through the splitmix permutation."""
    cdef uint64_t state = <uint64_t>0x5DEECE66D
    cdef uint64_t acc = 0
    for p in parts:
        state = state ^ <uint64_t>(p & 0xFFFFFFFFFFFFFFFF)
        acc = _next_u64(&state)
    return int(acc)


def classify(long px, long py, long pz, off, pix, dep, occ, long m, long r):
    """Label every frustum-table entry for a camera at (px, py, pz).

    Returns an int32 array aligned with the table rows: -3 out of grid,
    -2 occluded, -1 visible free space (or a visible obstacle), otherwise
    the positive id of the visible object occupying the cell. occ is the
    flat int32 occupancy grid (0 empty, >0 object, <0 obstacle).
    """
    cdef int[:, ::1] offv = np.ascontiguousarray(off, dtype=np.int32)
    cdef int[::1] pixv = np.ascontiguousarray(pix, dtype=np.int32)
    cdef int[::1] depv = np.ascontiguousarray(dep, dtype=np.int32)
    cdef int[::1] occv = np.ascontiguousarray(occ, dtype=np.int32)
    cdef Py_ssize_t K = offv.shape[0]

    codes_arr = np.full(K, _OUT, dtype=np.int32)
    cdef int[::1] codes = codes_arr
    dmin_arr = np.full(r * r, _BIG, dtype=np.int32)
    cdef int[::1] dmin = dmin_arr

    cdef Py_ssize_t k
    cdef long cx, cy, cz, flat
    cdef int o, pp
    for k in range(K):
        cx = offv[k, 0] + px
        cy = offv[k, 1] + py
        cz = offv[k, 2] + pz
        if cx < 0 or cx >= m or cy < 0 or cy >= m or cz < 0 or cz >= m:
            continue
        flat = (cx * m + cy) * m + cz
        o = occv[flat]
        if o != 0:
            pp = pixv[k]
            if depv[k] < dmin[pp]:
                dmin[pp] = depv[k]
    for k in range(K):
        cx = offv[k, 0] + px
        cy = offv[k, 1] + py
        cz = offv[k, 2] + pz
        if cx < 0 or cx >= m or cy < 0 or cy >= m or cz < 0 or cz >= m:
            continue
        if depv[k] > dmin[pixv[k]]:
            codes[k] = _UNKNOWN
        else:
            flat = (cx * m + cy) * m + cz
            o = occv[flat]
            codes[k] = o if o > 0 else _FREE
    return codes_arr


def match_particles(
    long px, long py, long pz,
    off, pix, dep,
    lut_pix, lut_dep, long far, long side,
    obstacles, particles, obj_ids,
    long m, long r, real_codes, double p_hit, seed,
):
    """Flag which particles reproduce an observed label array exactly.

    Same contract and draw order as the pure twin: one splitmix64 stream
    seeded with `seed`, consumed in (particle, table-entry) order.
    """
    cdef uint64_t state = <uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)
    cdef int[:, ::1] offv = np.ascontiguousarray(off, dtype=np.int32)
    cdef int[::1] pixv = np.ascontiguousarray(pix, dtype=np.int32)
    cdef int[::1] depv = np.ascontiguousarray(dep, dtype=np.int32)
    cdef int[::1] lpix = np.ascontiguousarray(lut_pix, dtype=np.int32)
    cdef int[::1] ldep = np.ascontiguousarray(lut_dep, dtype=np.int32)
    cdef int[:, ::1] obst = np.ascontiguousarray(
        np.asarray(obstacles, dtype=np.int32).reshape(-1, 3))
    cdef int[:, ::1] parts = np.ascontiguousarray(particles, dtype=np.int32)
    cdef int[::1] idsv = np.ascontiguousarray(obj_ids, dtype=np.int32)
    cdef int[::1] realv = np.ascontiguousarray(real_codes, dtype=np.int32)

    cdef Py_ssize_t K = offv.shape[0]
    cdef Py_ssize_t P = parts.shape[0]
    cdef Py_ssize_t n = parts.shape[1]
    cdef Py_ssize_t n_obst = obst.shape[0]

    # Obstacle pixel/depth entries are pose-fixed across particles.
    obst_pix_l = []
    obst_dep_l = []
    cdef Py_ssize_t j
    cdef long qx, qy, qz, wx, wy, wz, li
    cdef int ppix
    for j in range(n_obst):
        qx = obst[j, 0]
        qy = obst[j, 1]
        qz = obst[j, 2]
        wx = qx - px
        wy = qy - py
        wz = qz - pz
        if wx < -far or wx > far or wy < -far or wy > far or wz < -far or wz > far:
            continue
        li = ((wx + far) * side + (wy + far)) * side + (wz + far)
        ppix = lpix[li]
        if ppix >= 0:
            obst_pix_l.append(ppix)
            obst_dep_l.append(ldep[li])
    cdef int[::1] obst_pix = np.asarray(obst_pix_l, dtype=np.int32).reshape(-1)
    cdef int[::1] obst_dep = np.asarray(obst_dep_l, dtype=np.int32).reshape(-1)
    cdef Py_ssize_t n_opd = obst_pix.shape[0]

    out_arr = np.zeros(P, dtype=np.uint8)
    cdef unsigned char[::1] out = out_arr

    # Raster scratch with a stamp per particle instead of a reset.
    dmin_arr = np.zeros(r * r, dtype=np.int32)
    stamp_arr = np.zeros(r * r, dtype=np.int64)
    cdef int[::1] dmin = dmin_arr
    cdef int64_t[::1] stamp = stamp_arr
    cdef int64_t cur = 0

    cdef long[64] cellx
    cdef long[64] celly
    cdef long[64] cellz
    cdef Py_ssize_t p, k, e
    cdef long mm = m * m
    cdef long f, cx, cy, cz, kpix
    cdef int kdep, pdep, pred, dm
    cdef bint ok
    if n > 64:
        raise ValueError("particle rows support at most 64 objects")
    for p in range(P):
        cur += 1
        for e in range(n_opd):
            ppix = obst_pix[e]
            pdep = obst_dep[e]
            if stamp[ppix] != cur:
                stamp[ppix] = cur
                dmin[ppix] = pdep
            elif pdep < dmin[ppix]:
                dmin[ppix] = pdep
        for j in range(n):
            f = parts[p, j]
            cx = f // mm
            cy = (f // m) % m
            cz = f % m
            cellx[j] = cx
            celly[j] = cy
            cellz[j] = cz
            wx = cx - px
            wy = cy - py
            wz = cz - pz
            if wx < -far or wx > far or wy < -far or wy > far or wz < -far or wz > far:
                continue
            li = ((wx + far) * side + (wy + far)) * side + (wz + far)
            ppix = lpix[li]
            if ppix >= 0:
                pdep = ldep[li]
                if stamp[ppix] != cur:
                    stamp[ppix] = cur
                    dmin[ppix] = pdep
                elif pdep < dmin[ppix]:
                    dmin[ppix] = pdep
        ok = True
        for k in range(K):
            cx = offv[k, 0] + px
            cy = offv[k, 1] + py
            cz = offv[k, 2] + pz
            if cx < 0 or cx >= m or cy < 0 or cy >= m or cz < 0 or cz >= m:
                continue  # real observation is out-of-grid here too
            kpix = pixv[k]
            kdep = depv[k]
            dm = dmin[kpix] if stamp[kpix] == cur else _BIG
            if kdep > dm:
                pred = _UNKNOWN
            else:
                pred = _FREE
                for j in range(n):
                    if cellx[j] == cx and celly[j] == cy and cellz[j] == cz:
                        if _next_float(&state) < p_hit:
                            pred = idsv[j]
                        break
            if pred != realv[k]:
                ok = False
                break
        out[p] = 1 if ok else 0
    return out_arr


cdef class _Engine:
    """One UCT search over the sampled-belief generative model."""

    cdef uint64_t rng_state
    cdef long m, level, lmax, n, max_depth, k_samples, far, side, s3, A, plen
    cdef unsigned long long all_mask, found0
    cdef double gamma, ucb_c, p_hit, r_max, r_min, r_step
    cdef long rx, ry, rz, rdir
    cdef signed char[::1] act_kind
    cdef int[::1] act_par
    cdef int[::1] lut_pix
    cdef int[::1] lut_dep
    cdef int[:, ::1] obst
    cdef long n_obst
    cdef unsigned char[::1] obst_grid
    cdef double[::1] pyr
    cdef int64_t[::1] poff
    cdef int[:, ::1] particles
    cdef bint has_particles
    cdef long n_particles
    cdef long[::1] objf, objx, objy, objz
    # tree storage (grown in powers of two, memoryviews rebound)
    cdef long cap, n_nodes
    cdef int64_t[::1] nh
    cdef int64_t[:, ::1] nq
    cdef double[:, ::1] qv
    cdef list children
    cdef object _nh_arr, _nq_arr, _q_arr
    # scratch outputs of _gen, consumed into locals before any recursion
    cdef long t_rx, t_ry, t_rz, t_rdir
    cdef unsigned long long t_found
    cdef double t_r
    cdef bint t_done
    cdef object t_key

    def __init__(self, prob, seed):
        self.rng_state = <uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)
        self.m = prob.m
        self.level = prob.level
        self.lmax = prob.lmax
        self.n = prob.n_objects
        if self.n > 63:
            raise ValueError("at most 63 objects are supported")
        self.all_mask = (<unsigned long long>1 << self.n) - 1
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
        self.s3 = self.side * self.side * self.side

        self.act_kind = np.ascontiguousarray(prob.act_kind, dtype=np.int8)
        self.act_par = np.ascontiguousarray(prob.act_par, dtype=np.int32)
        self.A = self.act_kind.shape[0]
        self.lut_pix = np.ascontiguousarray(prob.lut_pix, dtype=np.int32)
        self.lut_dep = np.ascontiguousarray(prob.lut_dep, dtype=np.int32)
        self.obst = np.ascontiguousarray(
            np.asarray(prob.obstacles, dtype=np.int32).reshape(-1, 3))
        self.n_obst = self.obst.shape[0]
        self.obst_grid = np.ascontiguousarray(prob.obst_grid, dtype=np.uint8)
        self.pyr = np.ascontiguousarray(prob.pyramid, dtype=np.float64)
        self.poff = np.ascontiguousarray(prob.pyr_off, dtype=np.int64)
        self.plen = prob.plen

        self.rx, self.ry, self.rz, self.rdir = prob.robot
        self.found0 = prob.found0

        if prob.particles is not None:
            self.particles = np.ascontiguousarray(prob.particles, dtype=np.int32)
            self.has_particles = True
            self.n_particles = self.particles.shape[0]
        else:
            self.particles = np.zeros((1, 1), dtype=np.int32)
            self.has_particles = False
            self.n_particles = 0

        self.objf = np.zeros(self.n, dtype=np.int64)
        self.objx = np.zeros(self.n, dtype=np.int64)
        self.objy = np.zeros(self.n, dtype=np.int64)
        self.objz = np.zeros(self.n, dtype=np.int64)

        self.cap = 1024
        self.n_nodes = 0
        self._nh_arr = np.zeros(self.cap, dtype=np.int64)
        self._nq_arr = np.zeros((self.cap, self.A), dtype=np.int64)
        self._q_arr = np.zeros((self.cap, self.A), dtype=np.float64)
        self.nh = self._nh_arr
        self.nq = self._nq_arr
        self.qv = self._q_arr
        self.children = []

    # -- tree ------------------------------------------------------------

    cdef void _grow(self):
        cdef long cap2 = self.cap * 2
        nh2 = np.zeros(cap2, dtype=np.int64)
        nq2 = np.zeros((cap2, self.A), dtype=np.int64)
        q2 = np.zeros((cap2, self.A), dtype=np.float64)
        nh2[:self.cap] = self._nh_arr
        nq2[:self.cap] = self._nq_arr
        q2[:self.cap] = self._q_arr
        self._nh_arr = nh2
        self._nq_arr = nq2
        self._q_arr = q2
        self.nh = nh2
        self.nq = nq2
        self.qv = q2
        self.cap = cap2

    cdef long _new_node(self):
        if self.n_nodes == self.cap:
            self._grow()
        self.children.append({})
        self.n_nodes += 1
        return self.n_nodes - 1

    cdef long _select(self, long node):
        cdef long a
        for a in range(self.A):
            if self.nq[node, a] == 0:
                return a
        cdef double logn = log(<double>self.nh[node])
        cdef double c = self.ucb_c
        cdef double best = -INFINITY
        cdef long besta = 0
        cdef double val
        for a in range(self.A):
            val = self.qv[node, a] + c * sqrt(logn / <double>self.nq[node, a])
            if val > best:
                best = val
                besta = a
        return besta

    # -- belief pyramid --------------------------------------------------

    cdef long _descend(self, long base, long from_level, long flat, long to_level):
        cdef long m = self.m
        cdef long lev, sp, sc, x, y, z, rem, ci, ccx, ccy, ccz, cf
        cdef long pick, last_pos, child_base
        cdef double pv, rr, acc, v
        for lev in range(from_level, to_level, -1):
            sp = m >> lev
            sc = m >> (lev - 1)
            x = flat // (sp * sp)
            rem = flat % (sp * sp)
            y = rem // sp
            z = rem % sp
            pv = self.pyr[base + self.poff[lev] + flat]
            rr = _next_float(&self.rng_state) * pv
            acc = 0.0
            pick = -1
            last_pos = -1
            child_base = base + self.poff[lev - 1]
            for ci in range(8):
                ccx = x + x + ((ci >> 2) & 1)
                ccy = y + y + ((ci >> 1) & 1)
                ccz = z + z + (ci & 1)
                cf = (ccx * sc + ccy) * sc + ccz
                v = self.pyr[child_base + cf]
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

    cdef void _sample_root(self):
        cdef long n = self.n
        cdef long m = self.m
        cdef long i, f, row, lev, s, ss
        cdef long mm = m * m
        if self.has_particles:
            row = _next_int(&self.rng_state, self.n_particles)
            for i in range(n):
                f = self.particles[row, i]
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

    cdef bint _vis_ground_cell(self, long gx, long gy, long gz,
                               long rx, long ry, long rz, long rdir,
                               long skip_obj):
        cdef long far = self.far
        cdef long ox = gx - rx
        cdef long oy = gy - ry
        cdef long oz = gz - rz
        if ox < -far or ox > far or oy < -far or oy > far or oz < -far or oz > far:
            return False
        cdef long side = self.side
        cdef long base = rdir * self.s3
        cdef long li = ((ox + far) * side + (oy + far)) * side + (oz + far)
        cdef int pixv = self.lut_pix[base + li]
        if pixv < 0:
            return False
        cdef int depv = self.lut_dep[base + li]
        cdef long j, wx, wy, wz, lj
        if skip_obj >= 0:
            for j in range(self.n):
                if j == skip_obj:
                    continue
                wx = self.objx[j] - rx
                wy = self.objy[j] - ry
                wz = self.objz[j] - rz
                if wx < -far or wx > far or wy < -far or wy > far or wz < -far or wz > far:
                    continue
                lj = ((wx + far) * side + (wy + far)) * side + (wz + far)
                if self.lut_pix[base + lj] == pixv and self.lut_dep[base + lj] < depv:
                    return False
        for j in range(self.n_obst):
            wx = self.obst[j, 0] - rx
            wy = self.obst[j, 1] - ry
            wz = self.obst[j, 2] - rz
            if wx < -far or wx > far or wy < -far or wy > far or wz < -far or wz > far:
                continue
            lj = ((wx + far) * side + (wy + far)) * side + (wz + far)
            if self.lut_pix[base + lj] == pixv and self.lut_dep[base + lj] < depv:
                return False
        return True

    # -- generative model -------------------------------------------------

    cdef object _look_ground(self, long rx, long ry, long rz, long rdir):
        cdef long[64] labs
        cdef long i, j, key_v
        for i in range(self.n):
            if self._vis_ground_cell(self.objx[i], self.objy[i], self.objz[i],
                                     rx, ry, rz, rdir, i):
                if _next_float(&self.rng_state) < self.p_hit:
                    labs[i] = _L_HIT
                else:
                    labs[i] = _L_FREE
            else:
                labs[i] = _L_NONE
        for i in range(1, self.n):
            key_v = labs[i]
            j = i - 1
            while j >= 0 and labs[j] > key_v:
                labs[j + 1] = labs[j]
                j -= 1
            labs[j + 1] = key_v
        out = []
        for i in range(self.n):
            out.append(labs[i])
        return tuple(out)

    cdef object _look_abstract(self, long rx, long ry, long rz, long rdir):
        cdef long i, cl, g, gx, gy, gz, hits, kk
        cdef long k = self.k_samples
        cdef long lev = self.level
        cdef long m = self.m
        cdef long mm = m * m
        cdef long base
        cdef double pv
        out = []
        for i in range(self.n):
            base = i * self.plen
            cl = self.objf[i]
            pv = self.pyr[base + self.poff[lev] + cl]
            hits = 0
            if pv > 0.0:
                for kk in range(k):
                    g = self._descend(base, lev, cl, 0)
                    gx = g // mm
                    gy = (g // m) % m
                    gz = g % m
                    if self._vis_ground_cell(gx, gy, gz, rx, ry, rz, rdir, -1):
                        if _next_float(&self.rng_state) < self.p_hit:
                            hits += 1
            out.append(cl)
            out.append(_L_HIT if 2 * hits > k else _L_FREE)
        return tuple(out)

    cdef void _gen(self, long a, long rx, long ry, long rz, long rdir,
                   unsigned long long found):
        """One generative step; objects are static within a simulation."""
        cdef long kind = self.act_kind[a]
        cdef long par, m, nx, ny, nz, i, gx, gy, gz, L, g, mm, base
        cdef unsigned long long newfound
        cdef double pv, r
        self.t_key = None
        if kind == 0:  # primitive move, clamped at bounds and obstacles
            par = self.act_par[a]
            m = self.m
            nx = rx + _DX[par]
            ny = ry + _DY[par]
            nz = rz + _DZ[par]
            if (0 <= nx < m and 0 <= ny < m and 0 <= nz < m
                    and self.obst_grid[(nx * m + ny) * m + nz] == 0):
                rx = nx
                ry = ny
                rz = nz
            self.t_rx = rx
            self.t_ry = ry
            self.t_rz = rz
            self.t_rdir = rdir
            self.t_found = found
            self.t_r = self.r_step
            self.t_done = False
            return
        if kind == 1:  # look
            rdir = self.act_par[a]
            if self.level == 0:
                self.t_key = self._look_ground(rx, ry, rz, rdir)
            else:
                self.t_key = self._look_abstract(rx, ry, rz, rdir)
            self.t_rx = rx
            self.t_ry = ry
            self.t_rz = rz
            self.t_rdir = rdir
            self.t_found = found
            self.t_r = self.r_step
            self.t_done = False
            return
        if kind == 2:  # find
            newfound = found
            if self.level == 0:
                for i in range(self.n):
                    if (found >> i) & 1:
                        continue
                    if self._vis_ground_cell(self.objx[i], self.objy[i], self.objz[i],
                                             rx, ry, rz, rdir, i):
                        newfound = newfound | (<unsigned long long>1 << i)
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
                        newfound = newfound | (<unsigned long long>1 << i)
            self.t_rx = rx
            self.t_ry = ry
            self.t_rz = rz
            self.t_rdir = rdir
            self.t_found = newfound
            self.t_r = self.r_max if newfound != found else self.r_min
            self.t_done = newfound == self.all_mask
            return
        # kind == 3: move option straight to a distant goal cell
        par = self.act_par[a]
        m = self.m
        gx = par // (m * m)
        gy = (par // m) % m
        gz = par % m
        L = (gx - rx if gx >= rx else rx - gx) \
            + (gy - ry if gy >= ry else ry - gy) \
            + (gz - rz if gz >= rz else rz - gz)
        if L == 0:
            r = 0.0
        else:
            r = self.r_step * (1.0 - pow(self.gamma, <double>L)) / (1.0 - self.gamma)
        if self.obst_grid[par] == 0:
            rx = gx
            ry = gy
            rz = gz
        self.t_rx = rx
        self.t_ry = ry
        self.t_rz = rz
        self.t_rdir = rdir
        self.t_found = found
        self.t_r = r
        self.t_done = False

    # -- search ------------------------------------------------------------

    cdef double _rollout(self, long rx, long ry, long rz, long rdir,
                         unsigned long long found, long depth):
        cdef double total = 0.0
        cdef double disc = 1.0
        cdef long a
        while depth < self.max_depth:
            a = _next_int(&self.rng_state, self.A)
            self._gen(a, rx, ry, rz, rdir, found)
            rx = self.t_rx
            ry = self.t_ry
            rz = self.t_rz
            rdir = self.t_rdir
            found = self.t_found
            total += disc * self.t_r
            if self.t_done:
                break
            disc *= self.gamma
            depth += 1
        return total

    cdef double _simulate(self, long rx, long ry, long rz, long rdir,
                          unsigned long long found, long node, long depth):
        if depth >= self.max_depth:
            return 0.0
        cdef long a = self._select(node)
        self._gen(a, rx, ry, rz, rdir, found)
        cdef long nrx = self.t_rx
        cdef long nry = self.t_ry
        cdef long nrz = self.t_rz
        cdef long nrdir = self.t_rdir
        cdef unsigned long long nfound = self.t_found
        cdef double r = self.t_r
        cdef bint done = self.t_done
        obs_key = self.t_key
        cdef double total
        cdef long child
        if done or depth + 1 >= self.max_depth:
            total = r
        else:
            key = (a, obs_key)
            chd = <dict>self.children[node]
            child_o = chd.get(key)
            if child_o is None:
                child = self._new_node()
                chd[key] = child
                total = r + self.gamma * self._rollout(nrx, nry, nrz, nrdir,
                                                       nfound, depth + 1)
            else:
                total = r + self.gamma * self._simulate(nrx, nry, nrz, nrdir,
                                                        nfound, <long>child_o,
                                                        depth + 1)
        self.nh[node] += 1
        self.nq[node, a] += 1
        self.qv[node, a] += (total - self.qv[node, a]) / <double>self.nq[node, a]
        return total

    def run(self, num_sims, deadline):
        self._new_node()  # root = 0
        cdef long sims = 0
        cdef bint has_limit = num_sims is not None
        cdef long limit = num_sims if has_limit else 0
        cdef bint has_deadline = deadline is not None
        cdef double dl = deadline if has_deadline else 0.0
        cdef long a
        while True:
            if has_limit and sims >= limit:
                break
            if has_deadline and time.perf_counter() >= dl:
                break
            if not has_limit and not has_deadline:
                break
            self._sample_root()
            self._simulate(self.rx, self.ry, self.rz, self.rdir,
                           self.found0, 0, 0)
            sims += 1
        cdef double best = -INFINITY
        cdef long besta = -1
        for a in range(self.A):
            if self.nq[0, a] > 0 and self.qv[0, a] > best:
                best = self.qv[0, a]
                besta = a
        cdef bint flagged = besta < 0
        if flagged:
            besta = _next_int(&self.rng_state, self.A)
        return {
            "action": besta,
            "q": [self.qv[0, a] for a in range(self.A)],
            "n": [self.nq[0, a] for a in range(self.A)],
            "sims": sims,
            "flagged": flagged,
            "impl": IMPL,
        }


def run_pouct(problem, seed, num_sims=None, deadline=None):
    """Run one POUCT search; stops at num_sims or at the wall-clock deadline."""
    return _Engine(problem, seed).run(num_sims, deadline)
