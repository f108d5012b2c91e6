"""Signed-distance and raycasting kernels over packed shape arrays.

A packed shape is a flat list of convex members evaluated in order:

``kinds[i]``   0 for a circle, 1 for a convex polygon
``params[i]``  circle (cx, cy, r); unused for polygons
``vstart[i]``, ``vcount[i]``  slice of ``verts`` holding the CCW polygon

Union semantics (minimum over members, lowest index on ties) live here so the
numba and numpy paths agree bit-for-bit on member selection.
"""

from __future__ import annotations

import math

import numpy as np

from .._jit import njit

CIRCLE = 0
POLYGON = 1

_TINY = 1e-12


# ---------------------------------------------------------------------------
# loop kernels (compiled when numba is active, plain Python otherwise)
# ---------------------------------------------------------------------------


@njit
def sdf_grad_loops(points, kinds, params, vstart, vcount, verts):
    n = points.shape[0]
    nm = kinds.shape[0]
    vals = np.empty(n)
    grads = np.empty((n, 2))
    members = np.empty(n, dtype=np.int64)
    for k in range(n):
        px = points[k, 0]
        py = points[k, 1]
        best = np.inf
        bgx = 1.0
        bgy = 0.0
        bm = -1
        for i in range(nm):
            if kinds[i] == 0:
                dx = px - params[i, 0]
                dy = py - params[i, 1]
                rr = math.sqrt(dx * dx + dy * dy)
                val = rr - params[i, 2]
                if rr > 1e-15:
                    gx = dx / rr
                    gy = dy / rr
                else:
                    gx = 1.0
                    gy = 0.0
            else:
                s = vstart[i]
                c = vcount[i]
                inside = True
                dmin = np.inf
                gx = 1.0
                gy = 0.0
                cx = 0.0
                cy = 0.0
                nx = 1.0
                ny = 0.0
                for e in range(c):
                    ax = verts[s + e, 0]
                    ay = verts[s + e, 1]
                    j = e + 1
                    if j == c:
                        j = 0
                    bx = verts[s + j, 0]
                    by = verts[s + j, 1]
                    ex = bx - ax
                    ey = by - ay
                    wx = px - ax
                    wy = py - ay
                    if ex * wy - ey * wx < 0.0:
                        inside = False
                    ee = ex * ex + ey * ey
                    t = (wx * ex + wy * ey) / ee
                    if t < 0.0:
                        t = 0.0
                    elif t > 1.0:
                        t = 1.0
                    qx = ax + t * ex - px
                    qy = ay + t * ey - py
                    d = math.sqrt(qx * qx + qy * qy)
                    if d < dmin:
                        dmin = d
                        cx = ax + t * ex
                        cy = ay + t * ey
                        le = math.sqrt(ee)
                        nx = ey / le
                        ny = -ex / le
                if dmin > _TINY:
                    sg = -1.0 if inside else 1.0
                    gx = sg * (px - cx) / dmin
                    gy = sg * (py - cy) / dmin
                else:
                    gx = nx
                    gy = ny
                val = -dmin if inside else dmin
            if val < best:
                best = val
                bgx = gx
                bgy = gy
                bm = i
        vals[k] = best
        grads[k, 0] = bgx
        grads[k, 1] = bgy
        members[k] = bm
    return vals, grads, members


@njit
def raycast_loops(origin, dirs, max_range, kinds, params, vstart, vcount, verts):
    nr = dirs.shape[0]
    nm = kinds.shape[0]
    ox = origin[0]
    oy = origin[1]
    dist = np.full(nr, np.inf)
    members = np.full(nr, -1, dtype=np.int64)
    pen = np.zeros(nr, dtype=np.bool_)
    for i in range(nm):
        if kinds[i] == 0:
            fx = ox - params[i, 0]
            fy = oy - params[i, 1]
            cc = fx * fx + fy * fy - params[i, 2] * params[i, 2]
            for k in range(nr):
                if pen[k]:
                    continue
                if cc < 0.0:
                    pen[k] = True
                    dist[k] = 0.0
                    members[k] = i
                    continue
                b = dirs[k, 0] * fx + dirs[k, 1] * fy
                disc = b * b - cc
                if disc < 0.0:
                    continue
                sq = math.sqrt(disc)
                t = -b - sq
                if t <= _TINY:
                    t = -b + sq
                    if cc > 0.0 or t <= _TINY:
                        continue
                if t <= max_range and t < dist[k]:
                    dist[k] = t
                    members[k] = i
        else:
            s = vstart[i]
            c = vcount[i]
            for k in range(nr):
                if pen[k]:
                    continue
                dx = dirs[k, 0]
                dy = dirs[k, 1]
                t_in = -np.inf
                t_out = np.inf
                strict = True
                miss = False
                for e in range(c):
                    ax = verts[s + e, 0]
                    ay = verts[s + e, 1]
                    j = e + 1
                    if j == c:
                        j = 0
                    ex = verts[s + j, 0] - ax
                    ey = verts[s + j, 1] - ay
                    # outward normal of a CCW edge
                    nx = ey
                    ny = -ex
                    num = nx * (ax - ox) + ny * (ay - oy)
                    den = nx * dx + ny * dy
                    if num <= 0.0:
                        strict = False
                    if den == 0.0:
                        if num < 0.0:
                            miss = True
                            break
                    elif den < 0.0:
                        tt = num / den
                        if tt > t_in:
                            t_in = tt
                    else:
                        tt = num / den
                        if tt < t_out:
                            t_out = tt
                if strict:
                    pen[k] = True
                    dist[k] = 0.0
                    members[k] = i
                    continue
                if miss or t_in > t_out:
                    continue
                if t_in > _TINY and t_in <= max_range and t_in < dist[k]:
                    dist[k] = t_in
                    members[k] = i
    return dist, members, pen


# ---------------------------------------------------------------------------
# vectorised numpy fallbacks
# ---------------------------------------------------------------------------


def sdf_grad_numpy(points, kinds, params, vstart, vcount, verts):
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    vals = np.full(n, np.inf)
    grads = np.zeros((n, 2))
    grads[:, 0] = 1.0
    members = np.full(n, -1, dtype=np.int64)
    for i in range(kinds.shape[0]):
        if kinds[i] == CIRCLE:
            diff = points - params[i, :2]
            rr = np.hypot(diff[:, 0], diff[:, 1])
            val = rr - params[i, 2]
            g = np.zeros((n, 2))
            g[:, 0] = 1.0
            ok = rr > 1e-15
            g[ok] = diff[ok] / rr[ok, None]
        else:
            poly = verts[vstart[i] : vstart[i] + vcount[i]]
            a = poly
            e = np.roll(poly, -1, axis=0) - poly
            w = points[:, None, :] - a[None, :, :]
            cross = e[None, :, 0] * w[:, :, 1] - e[None, :, 1] * w[:, :, 0]
            inside = np.all(cross >= 0.0, axis=1)
            ee = np.einsum("ij,ij->i", e, e)
            t = np.clip(np.einsum("nij,ij->ni", w, e) / ee[None, :], 0.0, 1.0)
            closest = a[None, :, :] + t[:, :, None] * e[None, :, :]
            dvec = points[:, None, :] - closest
            d = np.hypot(dvec[:, :, 0], dvec[:, :, 1])
            j = np.argmin(d, axis=1)
            rows = np.arange(n)
            dmin = d[rows, j]
            cpt = closest[rows, j]
            sg = np.where(inside, -1.0, 1.0)
            g = np.empty((n, 2))
            far = dmin > _TINY
            g[far] = sg[far, None] * (points[far] - cpt[far]) / dmin[far, None]
            le = np.sqrt(ee)
            normals = np.stack([e[:, 1] / le, -e[:, 0] / le], axis=1)
            g[~far] = normals[j[~far]]
            val = np.where(inside, -dmin, dmin)
        better = val < vals
        vals = np.where(better, val, vals)
        grads[better] = g[better]
        members[better] = i
    return vals, grads, members


def raycast_numpy(origin, dirs, max_range, kinds, params, vstart, vcount, verts):
    origin = np.asarray(origin, dtype=float)
    dirs = np.asarray(dirs, dtype=float)
    nr = dirs.shape[0]
    dist = np.full(nr, np.inf)
    members = np.full(nr, -1, dtype=np.int64)
    pen = np.zeros(nr, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(kinds.shape[0]):
            if kinds[i] == CIRCLE:
                f = origin - params[i, :2]
                cc = f @ f - params[i, 2] ** 2
                if cc < 0.0:
                    newly = ~pen
                    dist[newly] = 0.0
                    members[newly] = i
                    pen[:] = True
                    continue
                b = dirs @ f
                disc = b * b - cc
                sq = np.sqrt(np.maximum(disc, 0.0))
                t1 = -b - sq
                t2 = -b + sq
                t = np.where(t1 > _TINY, t1, np.where((cc <= 0.0) & (t2 > _TINY), t2, np.inf))
                t = np.where(disc < 0.0, np.inf, t)
            else:
                poly = verts[vstart[i] : vstart[i] + vcount[i]]
                e = np.roll(poly, -1, axis=0) - poly
                normals = np.stack([e[:, 1], -e[:, 0]], axis=1)
                num = np.einsum("ij,ij->i", normals, poly - origin)
                if np.all(num > 0.0):
                    newly = ~pen
                    dist[newly] = 0.0
                    members[newly] = i
                    pen[:] = True
                    continue
                den = dirs @ normals.T
                ratio = num[None, :] / den
                t_in = np.max(np.where(den < 0.0, ratio, -np.inf), axis=1)
                t_out = np.min(np.where(den > 0.0, ratio, np.inf), axis=1)
                parallel_miss = np.any((den == 0.0) & (num[None, :] < 0.0), axis=1)
                ok = ~parallel_miss & (t_in <= t_out) & (t_in > _TINY)
                t = np.where(ok, t_in, np.inf)
            better = (~pen) & (t <= max_range) & (t < dist)
            dist[better] = t[better]
            members[better] = i
    return dist, members, pen
