# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: voxel ray walking and triangle rasterization.

Must stay bitwise-compatible with fallback.py: identical expression order,
no FP contraction (enforced by build flags), identical keyed RNG.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, floor, INFINITY
from libc.stdint cimport int8_t, int32_t, int64_t, uint8_t, uint32_t, uint64_t
from libcpp.vector cimport vector

cnp.import_array()

cdef double U01_SCALE = 2.0 ** -53
cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t MIX2 = 0x94D049BB133111EBULL
cdef uint64_t TRACE_PURPOSE = 6


cdef inline uint64_t _splitmix(uint64_t z) nogil:
    z = z + GOLDEN
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


cdef inline double _u01_4(uint64_t w0, uint64_t w1, uint64_t w2, uint64_t w3) nogil:
    cdef uint64_t h = 0
    h = _splitmix(h ^ w0)
    h = _splitmix(h ^ w1)
    h = _splitmix(h ^ w2)
    h = _splitmix(h ^ w3)
    return <double>(h >> 11) * U01_SCALE


def trace_rays(
    double[:, ::1] origins,
    double[:, ::1] dirs,
    int64_t[::1] pulse_index,
    double[::1] times,
    grid_origin,
    double voxel_size,
    dims,
    int32_t[:, :, ::1] cell_attr,
    double[::1] attr_opacity,
    uint32_t[::1] attr_instance,
    uint8_t[::1] attr_semantic,
    survey_seed,
    int max_returns,
    double max_range,
):
    cdef double go0 = grid_origin[0], go1 = grid_origin[1], go2 = grid_origin[2]
    cdef int64_t nx = dims[0], ny = dims[1], nz = dims[2]
    cdef uint64_t seed = <uint64_t>(int(survey_seed) & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t n = origins.shape[0]

    cdef vector[double] out_x, out_y, out_z, out_t
    cdef vector[int64_t] out_pulse
    cdef vector[int32_t] out_cell
    cdef vector[uint8_t] out_ret

    cdef Py_ssize_t r
    cdef int a, axis
    cdef double vs = voxel_size
    cdef double tlo, thi, ta, tb, t_near, t_far, lo, hi, oa, da, t, boundary, u, op
    cdef double o0, o1, o2, d0, d1, d2
    cdef double tmax0, tmax1, tmax2, td0, td1, td2
    cdef int64_t i0, i1, i2, s0, s1, s2, ordinal
    cdef int32_t cell
    cdef int ret
    cdef bint miss, opaque, emit

    with nogil:
        for r in range(n):
            o0 = origins[r, 0]; o1 = origins[r, 1]; o2 = origins[r, 2]
            d0 = dirs[r, 0]; d1 = dirs[r, 1]; d2 = dirs[r, 2]
            tlo = 0.0
            thi = max_range
            miss = False
            for a in range(3):
                if a == 0:
                    lo = go0; hi = go0 + nx * vs; oa = o0; da = d0
                elif a == 1:
                    lo = go1; hi = go1 + ny * vs; oa = o1; da = d1
                else:
                    lo = go2; hi = go2 + nz * vs; oa = o2; da = d2
                if da != 0.0:
                    ta = (lo - oa) / da
                    tb = (hi - oa) / da
                    if ta < tb:
                        t_near = ta; t_far = tb
                    else:
                        t_near = tb; t_far = ta
                else:
                    if oa >= lo and oa <= hi:
                        t_near = -INFINITY; t_far = INFINITY
                    else:
                        miss = True
                        break
                if t_near > tlo:
                    tlo = t_near
                if t_far < thi:
                    thi = t_far
            if miss or tlo > thi:
                continue

            t = tlo
            i0 = <int64_t>floor((o0 + d0 * t - go0) / vs)
            i1 = <int64_t>floor((o1 + d1 * t - go1) / vs)
            i2 = <int64_t>floor((o2 + d2 * t - go2) / vs)
            if i0 < 0: i0 = 0
            if i0 > nx - 1: i0 = nx - 1
            if i1 < 0: i1 = 0
            if i1 > ny - 1: i1 = ny - 1
            if i2 < 0: i2 = 0
            if i2 > nz - 1: i2 = nz - 1

            s0 = 1 if d0 > 0.0 else (-1 if d0 < 0.0 else 0)
            s1 = 1 if d1 > 0.0 else (-1 if d1 < 0.0 else 0)
            s2 = 1 if d2 > 0.0 else (-1 if d2 < 0.0 else 0)

            if s0 != 0:
                boundary = go0 + (i0 + 1) * vs if d0 > 0.0 else go0 + i0 * vs
                tmax0 = (boundary - o0) / d0
                td0 = vs / fabs(d0)
            else:
                tmax0 = INFINITY; td0 = INFINITY
            if s1 != 0:
                boundary = go1 + (i1 + 1) * vs if d1 > 0.0 else go1 + i1 * vs
                tmax1 = (boundary - o1) / d1
                td1 = vs / fabs(d1)
            else:
                tmax1 = INFINITY; td1 = INFINITY
            if s2 != 0:
                boundary = go2 + (i2 + 1) * vs if d2 > 0.0 else go2 + i2 * vs
                tmax2 = (boundary - o2) / d2
                td2 = vs / fabs(d2)
            else:
                tmax2 = INFINITY; td2 = INFINITY

            ordinal = 0
            ret = 0
            while True:
                cell = cell_attr[i0, i1, i2]
                if cell >= 0:
                    op = attr_opacity[cell]
                    opaque = op >= 1.0
                    if opaque:
                        emit = True
                    else:
                        u = _u01_4(seed, TRACE_PURPOSE, <uint64_t>pulse_index[r], <uint64_t>ordinal)
                        emit = u < op
                    ordinal += 1
                    if emit:
                        ret += 1
                        out_x.push_back(o0 + d0 * t)
                        out_y.push_back(o1 + d1 * t)
                        out_z.push_back(o2 + d2 * t)
                        out_t.push_back(times[r])
                        out_pulse.push_back(pulse_index[r])
                        out_cell.push_back(cell)
                        out_ret.push_back(<uint8_t>ret)
                        if opaque or ret >= max_returns:
                            break

                if tmax0 < tmax1:
                    axis = 0 if tmax0 < tmax2 else 2
                else:
                    axis = 1 if tmax1 < tmax2 else 2
                if axis == 0:
                    t = tmax0
                    i0 += s0
                    if i0 < 0 or i0 >= nx:
                        break
                    tmax0 += td0
                elif axis == 1:
                    t = tmax1
                    i1 += s1
                    if i1 < 0 or i1 >= ny:
                        break
                    tmax1 += td1
                else:
                    t = tmax2
                    i2 += s2
                    if i2 < 0 or i2 >= nz:
                        break
                    tmax2 += td2
                if t > thi:
                    break

    cdef Py_ssize_t m = out_x.size()
    pos = np.empty((m, 3), dtype=np.float64)
    cells_arr = np.empty(m, dtype=np.int32)
    rets = np.empty(m, dtype=np.uint8)
    pulses = np.empty(m, dtype=np.int64)
    tim = np.empty(m, dtype=np.float64)
    cdef double[:, ::1] pos_v = pos
    cdef int32_t[::1] cells_v = cells_arr
    cdef uint8_t[::1] rets_v = rets
    cdef int64_t[::1] pulses_v = pulses
    cdef double[::1] tim_v = tim
    cdef Py_ssize_t k
    with nogil:
        for k in range(m):
            pos_v[k, 0] = out_x[k]
            pos_v[k, 1] = out_y[k]
            pos_v[k, 2] = out_z[k]
            cells_v[k] = out_cell[k]
            rets_v[k] = out_ret[k]
            pulses_v[k] = out_pulse[k]
            tim_v[k] = out_t[k]
    instance = np.asarray(attr_instance)[cells_arr]
    semantic = np.asarray(attr_semantic)[cells_arr]
    return pos, instance, semantic, rets, pulses, tim


def voxelize_triangles(
    double[:, ::1] vertices,
    int32_t[:, ::1] triangles,
    uint8_t[::1] material,
    grid_origin,
    double voxel_size,
    dims,
):
    cdef double go0 = grid_origin[0], go1 = grid_origin[1], go2 = grid_origin[2]
    cdef int64_t nx = dims[0], ny = dims[1], nz = dims[2]
    cdef double vs = voxel_size
    cdef double h = 0.5 * vs

    cdef vector[int64_t] out_key, out_tri
    cdef vector[uint8_t] out_mat
    cdef vector[double] out_dist

    cdef Py_ssize_t ntri = triangles.shape[0]
    cdef Py_ssize_t ti
    cdef double v0x, v0y, v0z, v1x, v1y, v1z, v2x, v2y, v2z
    cdef double tminx, tminy, tminz, tmaxx, tmaxy, tmaxz
    cdef int64_t lox, loy, loz, hix, hiy, hiz, ix, iy, iz
    cdef double e0x, e0y, e0z, e1x, e1y, e1z, e2x, e2y, e2z
    cdef double ca[9]
    cdef double cb[9]
    cdef int ia[9]
    cdef int ib[9]
    cdef double qmin[9]
    cdef double qmax[9]
    cdef double rad[9]
    cdef double q0, q1, q2, mn, mx
    cdef double nxp, nyp, nzp, s_v0, kk, s, g
    cdef double c[3]
    cdef double ccx, ccy, ccz, dx, dy, dz
    cdef int e, axq, row
    cdef double ex, ey, ez
    cdef bint ok
    cdef uint8_t m_t

    with nogil:
        for ti in range(ntri):
            v0x = vertices[triangles[ti, 0], 0]; v0y = vertices[triangles[ti, 0], 1]; v0z = vertices[triangles[ti, 0], 2]
            v1x = vertices[triangles[ti, 1], 0]; v1y = vertices[triangles[ti, 1], 1]; v1z = vertices[triangles[ti, 1], 2]
            v2x = vertices[triangles[ti, 2], 0]; v2y = vertices[triangles[ti, 2], 1]; v2z = vertices[triangles[ti, 2], 2]
            m_t = material[ti]

            tminx = v0x
            if v1x < tminx: tminx = v1x
            if v2x < tminx: tminx = v2x
            tminy = v0y
            if v1y < tminy: tminy = v1y
            if v2y < tminy: tminy = v2y
            tminz = v0z
            if v1z < tminz: tminz = v1z
            if v2z < tminz: tminz = v2z
            tmaxx = v0x
            if v1x > tmaxx: tmaxx = v1x
            if v2x > tmaxx: tmaxx = v2x
            tmaxy = v0y
            if v1y > tmaxy: tmaxy = v1y
            if v2y > tmaxy: tmaxy = v2y
            tmaxz = v0z
            if v1z > tmaxz: tmaxz = v1z
            if v2z > tmaxz: tmaxz = v2z

            lox = <int64_t>floor((tminx - go0) / vs)
            loy = <int64_t>floor((tminy - go1) / vs)
            loz = <int64_t>floor((tminz - go2) / vs)
            hix = <int64_t>floor((tmaxx - go0) / vs)
            hiy = <int64_t>floor((tmaxy - go1) / vs)
            hiz = <int64_t>floor((tmaxz - go2) / vs)
            if lox < 0: lox = 0
            if loy < 0: loy = 0
            if loz < 0: loz = 0
            if hix > nx - 1: hix = nx - 1
            if hiy > ny - 1: hiy = ny - 1
            if hiz > nz - 1: hiz = nz - 1
            if lox > hix or loy > hiy or loz > hiz:
                continue

            e0x = v1x - v0x; e0y = v1y - v0y; e0z = v1z - v0z
            e1x = v2x - v1x; e1y = v2y - v1y; e1z = v2z - v1z
            e2x = v0x - v2x; e2y = v0y - v2y; e2z = v0z - v2z

            for e in range(3):
                if e == 0:
                    ex = e0x; ey = e0y; ez = e0z
                elif e == 1:
                    ex = e1x; ey = e1y; ez = e1z
                else:
                    ex = e2x; ey = e2y; ez = e2z
                for axq in range(3):
                    row = e * 3 + axq
                    if axq == 0:
                        ca[row] = -ez; cb[row] = ey; ia[row] = 1; ib[row] = 2
                    elif axq == 1:
                        ca[row] = ez; cb[row] = -ex; ia[row] = 0; ib[row] = 2
                    else:
                        ca[row] = -ey; cb[row] = ex; ia[row] = 0; ib[row] = 1
                    if ia[row] == 0:
                        q0 = ca[row] * v0x
                        q1 = ca[row] * v1x
                        q2 = ca[row] * v2x
                    else:
                        q0 = ca[row] * v0y
                        q1 = ca[row] * v1y
                        q2 = ca[row] * v2y
                    if ib[row] == 1:
                        q0 = q0 + cb[row] * v0y
                        q1 = q1 + cb[row] * v1y
                        q2 = q2 + cb[row] * v2y
                    else:
                        q0 = q0 + cb[row] * v0z
                        q1 = q1 + cb[row] * v1z
                        q2 = q2 + cb[row] * v2z
                    mn = q0
                    if q1 < mn: mn = q1
                    if q2 < mn: mn = q2
                    mx = q0
                    if q1 > mx: mx = q1
                    if q2 > mx: mx = q2
                    qmin[row] = mn
                    qmax[row] = mx
                    rad[row] = (fabs(ca[row]) + fabs(cb[row])) * h

            nxp = e0y * e1z - e0z * e1y
            nyp = e0z * e1x - e0x * e1z
            nzp = e0x * e1y - e0y * e1x
            s_v0 = nxp * v0x + nyp * v0y + nzp * v0z
            kk = (fabs(nxp) + fabs(nyp) + fabs(nzp)) * h

            ccx = (v0x + v1x + v2x) / 3.0
            ccy = (v0y + v1y + v2y) / 3.0
            ccz = (v0z + v1z + v2z) / 3.0

            for ix in range(lox, hix + 1):
                c[0] = go0 + (ix + 0.5) * vs
                if tminx - c[0] > h or tmaxx - c[0] < -h:
                    continue
                for iy in range(loy, hiy + 1):
                    c[1] = go1 + (iy + 0.5) * vs
                    if tminy - c[1] > h or tmaxy - c[1] < -h:
                        continue
                    for iz in range(loz, hiz + 1):
                        c[2] = go2 + (iz + 0.5) * vs
                        if tminz - c[2] > h or tmaxz - c[2] < -h:
                            continue
                        ok = True
                        for row in range(9):
                            s = ca[row] * c[ia[row]] + cb[row] * c[ib[row]]
                            if qmin[row] - s > rad[row] or qmax[row] - s < -rad[row]:
                                ok = False
                                break
                        if not ok:
                            continue
                        s = nxp * c[0] + nyp * c[1] + nzp * c[2]
                        g = s_v0 - s
                        if g < -kk or g > kk:
                            continue
                        dx = c[0] - ccx
                        dy = c[1] - ccy
                        dz = c[2] - ccz
                        out_key.push_back((ix << 42) | (iy << 21) | iz)
                        out_mat.push_back(m_t)
                        out_dist.push_back(dx * dx + dy * dy + dz * dz)
                        out_tri.push_back(<int64_t>ti)

    cdef Py_ssize_t m = out_key.size()
    keys = np.empty(m, dtype=np.int64)
    mats = np.empty(m, dtype=np.uint8)
    dists = np.empty(m, dtype=np.float64)
    tri_idx = np.empty(m, dtype=np.int64)
    cdef int64_t[::1] keys_v = keys
    cdef uint8_t[::1] mats_v = mats
    cdef double[::1] dists_v = dists
    cdef int64_t[::1] tri_v = tri_idx
    cdef Py_ssize_t k
    with nogil:
        for k in range(m):
            keys_v[k] = out_key[k]
            mats_v[k] = out_mat[k]
            dists_v[k] = out_dist[k]
            tri_v[k] = out_tri[k]
    return keys, mats, dists, tri_idx
