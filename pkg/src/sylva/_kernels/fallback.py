"""Pure-numpy implementations of the hot kernels.

These are the reference semantics for the compiled core: both backends must
produce bitwise-identical outputs.  Every floating-point expression here is
written in the exact factored form the compiled code uses (divisions stay
divisions, dot products accumulate left to right), and the compiled code is
built with FP contraction disabled, so elementwise results agree bit for bit.
"""

from __future__ import annotations

import numpy as np

from .. import rng

_INF = np.inf


# Ray tracing ---------------------------------------------------------------


def trace_rays(
    origins: np.ndarray,
    dirs: np.ndarray,
    pulse_index: np.ndarray,
    times: np.ndarray,
    grid_origin,
    voxel_size: float,
    dims,
    cell_attr: np.ndarray,
    attr_opacity: np.ndarray,
    attr_instance: np.ndarray,
    attr_semantic: np.ndarray,
    survey_seed: int,
    max_returns: int,
    max_range: float,
):
    """Walk every ray through the voxel grid, emitting stochastic returns.

    Returns (pos, instance, semantic, return_number, pulse, time) arrays
    ordered by input ray then return number.  A return is emitted at the
    ray's entry point into each occupied voxel whose keyed uniform draw falls
    below the voxel opacity; opacity 1.0 always returns and blocks the ray.
    """
    vs = float(voxel_size)
    go = np.asarray(grid_origin, dtype=np.float64)
    dims = np.asarray(dims, dtype=np.int64)
    ny, nz = int(dims[1]), int(dims[2])

    o = np.ascontiguousarray(origins, dtype=np.float64)
    d = np.ascontiguousarray(dirs, dtype=np.float64)
    n = len(o)

    # Slab clip against the grid box; entry clamped at t = 0, exit at range.
    tlo = np.zeros(n)
    thi = np.full(n, float(max_range))
    for a in range(3):
        lo = go[a]
        hi = go[a] + dims[a] * vs
        da = d[:, a]
        oa = o[:, a]
        nonzero = da != 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (lo - oa) / da
            tb = (hi - oa) / da
        t_near = np.where(ta < tb, ta, tb)
        t_far = np.where(ta < tb, tb, ta)
        inside = (oa >= lo) & (oa <= hi)
        t_near = np.where(nonzero, t_near, np.where(inside, -_INF, _INF))
        t_far = np.where(nonzero, t_far, np.where(inside, _INF, -_INF))
        tlo = np.where(t_near > tlo, t_near, tlo)
        thi = np.where(t_far < thi, t_far, thi)

    rows = np.nonzero(tlo <= thi)[0]
    t = tlo[rows]
    t_exit = thi[rows]
    orig_r = o[rows]
    dir_r = d[rows]

    entry = orig_r + dir_r * t[:, None]
    idx = np.floor((entry - go[None, :]) / vs).astype(np.int64)
    idx = np.clip(idx, 0, (dims - 1)[None, :])

    step = np.sign(dir_r).astype(np.int64)
    tmax = np.empty((len(rows), 3))
    tdelta = np.empty((len(rows), 3))
    for a in range(3):
        da = dir_r[:, a]
        pos = da > 0.0
        neg = da < 0.0
        boundary = np.where(pos, go[a] + (idx[:, a] + 1) * vs, go[a] + idx[:, a] * vs)
        with np.errstate(divide="ignore", invalid="ignore"):
            tm = (boundary - orig_r[:, a]) / da
            td = vs / np.abs(da)
        tmax[:, a] = np.where(pos | neg, tm, _INF)
        tdelta[:, a] = np.where(pos | neg, td, _INF)

    ordinal = np.zeros(len(rows), dtype=np.int64)
    ret = np.zeros(len(rows), dtype=np.int64)
    pulses_r = np.asarray(pulse_index, dtype=np.int64)[rows]

    out_row = []
    out_ret = []
    out_pos = []
    out_cell = []

    flat = cell_attr.reshape(-1)
    seed_u64 = np.uint64(survey_seed & rng.MASK64)
    trace_u64 = np.uint64(rng.TRACE)
    alive = t <= t_exit

    while alive.any():
        w = np.nonzero(alive)[0]
        cells = flat[(idx[w, 0] * ny + idx[w, 1]) * nz + idx[w, 2]]
        occ = cells >= 0
        wo = w[occ]
        if len(wo):
            cell_o = cells[occ]
            op = attr_opacity[cell_o]
            opaque = op >= 1.0
            u = rng.u01_vec(seed_u64, trace_u64, pulses_r[wo], ordinal[wo])
            emit = opaque | (u < op)
            ordinal[wo] += 1
            we = wo[emit]
            if len(we):
                ret[we] += 1
                out_row.append(rows[we])
                out_ret.append(ret[we].copy())
                out_pos.append(orig_r[we] + dir_r[we] * t[we, None])
                out_cell.append(cell_o[emit])
                stop = np.zeros(len(alive), dtype=bool)
                stop[we] = True
                stop[wo] &= opaque | (ret[wo] >= max_returns)
                alive &= ~stop

        # Advance every still-active ray one voxel along the smallest tmax.
        w = np.nonzero(alive)[0]
        if not len(w):
            break
        tmx, tmy, tmz = tmax[w, 0], tmax[w, 1], tmax[w, 2]
        axis = np.where(tmx < tmy, np.where(tmx < tmz, 0, 2), np.where(tmy < tmz, 1, 2))
        t[w] = tmax[w, axis]
        idx[w, axis] += step[w, axis]
        oob = (idx[w, axis] < 0) | (idx[w, axis] >= dims[axis])
        tmax[w, axis] += tdelta[w, axis]
        dead = oob | (t[w] > t_exit[w])
        alive[w[dead]] = False

    if not out_row:
        return (
            np.empty((0, 3)),
            np.empty(0, dtype=np.uint32),
            np.empty(0, dtype=np.uint8),
            np.empty(0, dtype=np.uint8),
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.float64),
        )

    row_all = np.concatenate(out_row)
    ret_all = np.concatenate(out_ret)
    pos_all = np.concatenate(out_pos, axis=0)
    cell_all = np.concatenate(out_cell)
    order = np.lexsort((ret_all, row_all))
    row_all = row_all[order]
    return (
        pos_all[order],
        attr_instance[cell_all[order]],
        attr_semantic[cell_all[order]],
        ret_all[order].astype(np.uint8),
        np.asarray(pulse_index, dtype=np.int64)[row_all],
        np.asarray(times, dtype=np.float64)[row_all],
    )


# Triangle voxelization ------------------------------------------------------

# Cross-axis table: for edge E and box axis A, the SAT axis is E x A and the
# projection of a point p is ca * p[ia] + cb * p[ib] with:
#   A=X: ca=-Ez ia=1(y)  cb=+Ey ib=2(z)
#   A=Y: ca=+Ez ia=0(x)  cb=-Ex ib=2(z)
#   A=Z: ca=-Ey ia=0(x)  cb=+Ex ib=1(y)


def _edge_tests(v0, v1, v2, edge):
    ex, ey, ez = edge
    rows = []
    for ca, cb, ia, ib in (
        (-ez, ey, 1, 2),
        (ez, -ex, 0, 2),
        (-ey, ex, 0, 1),
    ):
        q0 = ca * v0[ia] + cb * v0[ib]
        q1 = ca * v1[ia] + cb * v1[ib]
        q2 = ca * v2[ia] + cb * v2[ib]
        rows.append((ca, cb, ia, ib, min(q0, q1, q2), max(q0, q1, q2)))
    return rows


def voxelize_triangles(
    vertices: np.ndarray,
    triangles: np.ndarray,
    material: np.ndarray,
    grid_origin,
    voxel_size: float,
    dims,
):
    """Conservative rasterization of triangles into voxels (closed SAT).

    Returns (packed key, material, squared centroid distance, triangle
    ordinal) per overlap, triangles in order, candidate voxels in C order.
    Keys pack (ix, iy, iz) into 21 bits each.
    """
    v = np.asarray(vertices, dtype=np.float64)
    tris = np.asarray(triangles, dtype=np.int64)
    mat = np.asarray(material, dtype=np.uint8)
    go = np.asarray(grid_origin, dtype=np.float64)
    dims = np.asarray(dims, dtype=np.int64)
    vs = float(voxel_size)
    h = 0.5 * vs

    keys_out, mat_out, dist_out, tri_out = [], [], [], []

    for ti in range(len(tris)):
        v0, v1, v2 = v[tris[ti, 0]], v[tris[ti, 1]], v[tris[ti, 2]]
        tmin = np.minimum(np.minimum(v0, v1), v2)
        tmax = np.maximum(np.maximum(v0, v1), v2)
        lo = np.maximum(np.floor((tmin - go) / vs).astype(np.int64), 0)
        hi = np.minimum(np.floor((tmax - go) / vs).astype(np.int64), dims - 1)
        if (lo > hi).any():
            continue

        gx = np.arange(lo[0], hi[0] + 1)
        gy = np.arange(lo[1], hi[1] + 1)
        gz = np.arange(lo[2], hi[2] + 1)
        ix, iy, iz = (g.ravel() for g in np.meshgrid(gx, gy, gz, indexing="ij"))
        cx = go[0] + (ix + 0.5) * vs
        cy = go[1] + (iy + 0.5) * vs
        cz = go[2] + (iz + 0.5) * vs
        centers = (cx, cy, cz)

        ok = np.ones(len(ix), dtype=bool)
        for a in range(3):
            ok &= ~((tmin[a] - centers[a] > h) | (tmax[a] - centers[a] < -h))

        e0 = (v1[0] - v0[0], v1[1] - v0[1], v1[2] - v0[2])
        e1 = (v2[0] - v1[0], v2[1] - v1[1], v2[2] - v1[2])
        e2 = (v0[0] - v2[0], v0[1] - v2[1], v0[2] - v2[2])
        for edge in (e0, e1, e2):
            for ca, cb, ia, ib, qmin, qmax in _edge_tests(v0, v1, v2, edge):
                rad = (abs(ca) + abs(cb)) * h
                s = ca * centers[ia] + cb * centers[ib]
                ok &= ~((qmin - s > rad) | (qmax - s < -rad))

        nx_ = e0[1] * e1[2] - e0[2] * e1[1]
        ny_ = e0[2] * e1[0] - e0[0] * e1[2]
        nz_ = e0[0] * e1[1] - e0[1] * e1[0]
        s_v0 = nx_ * v0[0] + ny_ * v0[1] + nz_ * v0[2]
        kk = (abs(nx_) + abs(ny_) + abs(nz_)) * h
        s_c = nx_ * centers[0] + ny_ * centers[1] + nz_ * centers[2]
        g = s_v0 - s_c
        ok &= (g >= -kk) & (g <= kk)

        if not ok.any():
            continue
        ccx = (v0[0] + v1[0] + v2[0]) / 3.0
        ccy = (v0[1] + v1[1] + v2[1]) / 3.0
        ccz = (v0[2] + v1[2] + v2[2]) / 3.0
        dx = centers[0][ok] - ccx
        dy = centers[1][ok] - ccy
        dz = centers[2][ok] - ccz
        k = int(ok.sum())
        keys_out.append((ix[ok] << 42) | (iy[ok] << 21) | iz[ok])
        mat_out.append(np.full(k, mat[ti], dtype=np.uint8))
        dist_out.append(dx * dx + dy * dy + dz * dz)
        tri_out.append(np.full(k, ti, dtype=np.int64))

    if not keys_out:
        return (
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.uint8),
            np.empty(0, dtype=np.float64),
            np.empty(0, dtype=np.int64),
        )
    return (
        np.concatenate(keys_out),
        np.concatenate(mat_out),
        np.concatenate(dist_out),
        np.concatenate(tri_out),
    )
