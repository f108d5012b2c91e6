"""Grid kernels: 8-connected A*, Bresenham ray marking and line of sight.

Cells are indexed ``(ix, iy)``; arrays are stored ``[iy, ix]``.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from .._jit import njit

SQRT2 = math.sqrt(2.0)

# fixed neighbour order shared by every search implementation
_DX = np.array([1, -1, 0, 0, 1, 1, -1, -1], dtype=np.int64)
_DY = np.array([0, 0, 1, -1, 1, -1, 1, -1], dtype=np.int64)


@njit
def _heap_push(keys, ticks, vals, size, key, tick, val):
    i = size
    keys[i] = key
    ticks[i] = tick
    vals[i] = val
    while i > 0:
        p = (i - 1) // 2
        if keys[p] < keys[i] or (keys[p] == keys[i] and ticks[p] < ticks[i]):
            break
        keys[p], keys[i] = keys[i], keys[p]
        ticks[p], ticks[i] = ticks[i], ticks[p]
        vals[p], vals[i] = vals[i], vals[p]
        i = p
    return size + 1


@njit
def _heap_pop(keys, ticks, vals, size):
    key = keys[0]
    val = vals[0]
    size -= 1
    keys[0] = keys[size]
    ticks[0] = ticks[size]
    vals[0] = vals[size]
    i = 0
    while True:
        lo = 2 * i + 1
        if lo >= size:
            break
        c = lo
        r = lo + 1
        if r < size and (keys[r] < keys[lo] or (keys[r] == keys[lo] and ticks[r] < ticks[lo])):
            c = r
        if keys[i] < keys[c] or (keys[i] == keys[c] and ticks[i] < ticks[c]):
            break
        keys[c], keys[i] = keys[i], keys[c]
        ticks[c], ticks[i] = ticks[i], ticks[c]
        vals[c], vals[i] = vals[i], vals[c]
        i = c
    return key, val, size


@njit
def _passable(blocked, h, w, x, y, dx, dy):
    nx = x + dx
    ny = y + dy
    if nx < 0 or ny < 0 or nx >= w or ny >= h:
        return False
    if blocked[ny, nx]:
        return False
    if dx != 0 and dy != 0:
        # no corner cutting past blocked orthogonal neighbours
        if blocked[y, nx] or blocked[ny, x]:
            return False
    return True


@njit
def astar_loops(blocked, sx, sy, gx, gy, heuristic_weight):
    h, w = blocked.shape
    ncell = h * w
    g = np.full(ncell, np.inf)
    parent = np.full(ncell, -1, dtype=np.int64)
    closed = np.zeros(ncell, dtype=np.bool_)
    cap = 8 * ncell + 1
    keys = np.empty(cap)
    ticks = np.empty(cap, dtype=np.int64)
    vals = np.empty(cap, dtype=np.int64)
    start = sy * w + sx
    goal = gy * w + gx
    g[start] = 0.0
    hs = heuristic_weight * math.sqrt((sx - gx) ** 2 + (sy - gy) ** 2)
    size = _heap_push(keys, ticks, vals, 0, hs, 0, start)
    tick = 1
    while size > 0:
        _, cur, size = _heap_pop(keys, ticks, vals, size)
        if closed[cur]:
            continue
        closed[cur] = True
        if cur == goal:
            break
        cx = cur % w
        cy = cur // w
        for k in range(8):
            dx = _DX[k]
            dy = _DY[k]
            if not _passable(blocked, h, w, cx, cy, dx, dy):
                continue
            nxt = (cy + dy) * w + (cx + dx)
            if closed[nxt]:
                continue
            step = SQRT2 if (dx != 0 and dy != 0) else 1.0
            ng = g[cur] + step
            if ng < g[nxt]:
                g[nxt] = ng
                parent[nxt] = cur
                hh = heuristic_weight * math.sqrt((cx + dx - gx) ** 2 + (cy + dy - gy) ** 2)
                size = _heap_push(keys, ticks, vals, size, ng + hh, tick, nxt)
                tick += 1
    if not closed[goal]:
        return np.zeros((0, 2), dtype=np.int64), np.inf
    n = 1
    c = goal
    while c != start:
        c = parent[c]
        n += 1
    out = np.empty((n, 2), dtype=np.int64)
    c = goal
    for i in range(n - 1, -1, -1):
        out[i, 0] = c % w
        out[i, 1] = c // w
        c = parent[c]
    return out, g[goal]


def astar_python(blocked, sx, sy, gx, gy, heuristic_weight):
    """Same search as :func:`astar_loops` on ``heapq``; used without numba."""
    blocked = np.asarray(blocked, dtype=bool)
    h, w = blocked.shape
    g = {(sx, sy): 0.0}
    parent = {}
    closed = set()
    heap = [(heuristic_weight * math.hypot(sx - gx, sy - gy), 0, (sx, sy))]
    tick = 1
    goal = (gx, gy)
    dirs = list(zip(_DX.tolist(), _DY.tolist()))
    while heap:
        _, _, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        closed.add(cur)
        if cur == goal:
            break
        cx, cy = cur
        for dx, dy in dirs:
            nx, ny = cx + dx, cy + dy
            if nx < 0 or ny < 0 or nx >= w or ny >= h or blocked[ny, nx]:
                continue
            if dx and dy and (blocked[cy, nx] or blocked[ny, cx]):
                continue
            if (nx, ny) in closed:
                continue
            ng = g[cur] + (SQRT2 if dx and dy else 1.0)
            if ng < g.get((nx, ny), math.inf):
                g[(nx, ny)] = ng
                parent[(nx, ny)] = cur
                f = ng + heuristic_weight * math.hypot(nx - gx, ny - gy)
                heapq.heappush(heap, (f, tick, (nx, ny)))
                tick += 1
    if goal not in closed:
        return np.zeros((0, 2), dtype=np.int64), math.inf
    cells = [goal]
    while cells[-1] != (sx, sy):
        cells.append(parent[cells[-1]])
    cells.reverse()
    return np.array(cells, dtype=np.int64), g[goal]


@njit
def mark_rays_loops(cells, x0, y0, ends, hits):
    """Bresenham free-space marking from ``(x0, y0)`` to each end cell.

    Every traversed cell before the end is marked free (0). The end cell is
    marked occupied (1) for hits and free otherwise. Occupied marks are applied
    after all free marks of the same scan.
    """
    h, w = cells.shape
    for r in range(ends.shape[0]):
        x1 = ends[r, 0]
        y1 = ends[r, 1]
        dx = abs(x1 - x0)
        dy = -abs(y1 - y0)
        sx = 1 if x0 < x1 else -1
        sy = 1 if y0 < y1 else -1
        err = dx + dy
        x = x0
        y = y0
        while True:
            at_end = x == x1 and y == y1
            if at_end and hits[r]:
                break
            if x < 0 or y < 0 or x >= w or y >= h:
                # a segment that leaves the rectangle never re-enters it
                break
            cells[y, x] = 0
            if at_end:
                break
            e2 = 2 * err
            if e2 >= dy:
                err += dy
                x += sx
            if e2 <= dx:
                err += dx
                y += sy
    for r in range(ends.shape[0]):
        if hits[r]:
            x1 = ends[r, 0]
            y1 = ends[r, 1]
            if 0 <= x1 < w and 0 <= y1 < h:
                cells[y1, x1] = 1
    return cells


@njit
def line_clear_loops(blocked, x0, y0, x1, y1):
    """True when the Bresenham line between two cells avoids blocked cells."""
    h, w = blocked.shape
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x = x0
    y = y0
    while True:
        if x < 0 or y < 0 or x >= w or y >= h or blocked[y, x]:
            return False
        if x == x1 and y == y1:
            return True
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
