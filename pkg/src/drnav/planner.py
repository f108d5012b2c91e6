"""Occupancy-grid mapping at a known pose, inflated A* search and path extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt

from . import kernels
from .geometry import Pose2
from .stabilizer import Path
from .world import LidarScan

UNKNOWN = -1
FREE = 0
OCCUPIED = 1


@dataclass
class OccupancyGrid:
    """Cells stored ``[iy, ix]``; ``origin`` is the lower-left corner of cell (0, 0)."""

    resolution: float
    origin: tuple[float, float]
    width: int
    height: int
    cells: np.ndarray | None = None

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must have at least one cell")
        self.origin = (float(self.origin[0]), float(self.origin[1]))
        if self.cells is None:
            self.cells = np.full((self.height, self.width), UNKNOWN, dtype=np.int8)
        elif self.cells.shape != (self.height, self.width):
            raise ValueError("cells shape does not match width/height")

    @classmethod
    def covering(cls, bounds, resolution: float = 0.1, margin: float = 1.0) -> "OccupancyGrid":
        xmin, xmax, ymin, ymax = bounds
        w = int(math.ceil((xmax - xmin + 2 * margin) / resolution))
        h = int(math.ceil((ymax - ymin + 2 * margin) / resolution))
        return cls(resolution, (xmin - margin, ymin - margin), w, h)

    def to_cell(self, point) -> tuple[int, int]:
        return (
            int(math.floor((float(point[0]) - self.origin[0]) / self.resolution)),
            int(math.floor((float(point[1]) - self.origin[1]) / self.resolution)),
        )

    def to_cells(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return np.floor((p - self.origin) / self.resolution).astype(np.int64)

    def center(self, ix: int, iy: int) -> np.ndarray:
        return np.array([self.origin[0] + (ix + 0.5) * self.resolution, self.origin[1] + (iy + 0.5) * self.resolution])

    def centers(self, cells) -> np.ndarray:
        c = np.asarray(cells, dtype=float).reshape(-1, 2)
        return np.asarray(self.origin) + (c + 0.5) * self.resolution

    def inside(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def render(self, path_cells=None) -> str:
        chars = np.full(self.cells.shape, "?", dtype="<U1")
        chars[self.cells == FREE] = "."
        chars[self.cells == OCCUPIED] = "#"
        if path_cells is not None:
            for ix, iy in np.asarray(path_cells).reshape(-1, 2):
                chars[iy, ix] = "*"
        return "\n".join("".join(row) for row in chars[::-1])


@dataclass(frozen=True)
class PlannerConfig:
    inflation_radius: float = 0.6
    replan_rate: float = 5.0
    allow_unknown: bool = True
    smoothing: bool = True
    # a still-clear current path is kept unless the new one is this much shorter (m)
    switch_margin: float = 0.0

    def __post_init__(self):
        if self.inflation_radius < 0:
            raise ValueError("inflation_radius must be nonnegative")
        if self.switch_margin < 0:
            raise ValueError("switch_margin must be nonnegative")
        if not self.replan_rate > 0:
            raise ValueError("replan_rate must be positive")


def update_grid(grid: OccupancyGrid, pose_estimate: Pose2, scan: LidarScan) -> OccupancyGrid:
    """Mark free space along every ray and occupied return cells; latest update wins."""
    ang = pose_estimate.theta + scan.angles
    ends = np.stack([pose_estimate.x + scan.ranges * np.cos(ang), pose_estimate.y + scan.ranges * np.sin(ang)], axis=1)
    x0, y0 = grid.to_cell(pose_estimate.position)
    kernels.mark_rays(grid.cells, x0, y0, np.ascontiguousarray(grid.to_cells(ends)), np.ascontiguousarray(scan.hits))
    return grid


def blocked_mask(grid: OccupancyGrid, config: PlannerConfig) -> np.ndarray:
    """Cells within the inflation radius of an occupied cell (center to center)."""
    occ = grid.cells == OCCUPIED
    if occ.any():
        dist = distance_transform_edt(~occ, sampling=grid.resolution)
        blocked = dist <= config.inflation_radius + 1e-12
    else:
        blocked = np.zeros_like(occ)
    if not config.allow_unknown:
        blocked |= grid.cells == UNKNOWN
    return blocked


def search(grid: OccupancyGrid, blocked: np.ndarray, start, goal) -> tuple[np.ndarray, float]:
    """A* over cell indices; returns ``(cells (n, 2), cost in cell units)``."""
    sx, sy = grid.to_cell(start)
    gx, gy = grid.to_cell(goal)
    if not grid.inside(sx, sy):
        raise ValueError("start lies outside the grid")
    if not grid.inside(gx, gy) or blocked[gy, gx] or blocked[sy, sx]:
        return np.zeros((0, 2), dtype=np.int64), math.inf
    return kernels.astar(np.ascontiguousarray(blocked), sx, sy, gx, gy, 1.0)


def _carve_start(grid: OccupancyGrid, blocked: np.ndarray, start, radius: float) -> np.ndarray:
    """Unblock inflated cells near the start that are no closer to an obstacle than the start.

    The robot can then leave the inflation band, but a path may not cut
    deeper into it, e.g. across an obstacle corner.
    """
    sx, sy = grid.to_cell(start)
    r = int(math.ceil(radius / grid.resolution)) + 1
    out = blocked.copy()
    y0, y1 = max(sy - r, 0), min(sy + r + 1, grid.height)
    x0, x1 = max(sx - r, 0), min(sx + r + 1, grid.width)
    occ = grid.cells == OCCUPIED
    dist = distance_transform_edt(~occ, sampling=grid.resolution) if occ.any() else np.full(occ.shape, np.inf)
    window = dist[y0:y1, x0:x1]
    out[y0:y1, x0:x1] &= occ[y0:y1, x0:x1] | (window < dist[sy, sx] - 1e-9)
    out[sy, sx] = occ[sy, sx]
    return out


def a_star(grid: OccupancyGrid, config: PlannerConfig, start, goal) -> np.ndarray | None:
    """Cell centers of a minimal-cost 8-connected path, or None when unreachable."""
    blocked = blocked_mask(grid, config)
    sx, sy = grid.to_cell(start)
    if grid.inside(sx, sy) and blocked[sy, sx]:
        blocked = _carve_start(grid, blocked, start, config.inflation_radius)
    cells, cost = search(grid, blocked, start, goal)
    if not math.isfinite(cost):
        return None
    return grid.centers(cells)


def smooth_cells(cells: np.ndarray, blocked: np.ndarray) -> np.ndarray:
    """Greedy line-of-sight shortcutting over cell indices."""
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
    if cells.shape[0] <= 2:
        return cells
    keep = [0]
    i = 0
    n = cells.shape[0]
    while i < n - 1:
        j = n - 1
        while j > i + 1 and not kernels.line_clear(blocked, cells[i, 0], cells[i, 1], cells[j, 0], cells[j, 1]):
            j -= 1
        keep.append(j)
        i = j
    return cells[keep]


def to_path(cells, smoothing: bool = True, grid: OccupancyGrid | None = None, blocked: np.ndarray | None = None) -> Path:
    """Path through cell centers.

    ``cells`` are integer indices when ``grid`` is given, otherwise world points.
    Smoothing needs the grid and a blocked mask; without a mask it only drops
    collinear interior waypoints.
    """
    arr = np.asarray(cells).reshape(-1, 2)
    if arr.shape[0] == 0:
        raise ValueError("empty cell list")
    if grid is not None:
        idx = arr.astype(np.int64)
        if smoothing and blocked is not None:
            idx = smooth_cells(idx, blocked)
        elif smoothing:
            idx = _drop_collinear(idx)
        return Path.from_points(grid.centers(idx))
    pts = arr.astype(float)
    if smoothing:
        pts = _drop_collinear(pts)
    return Path.from_points(pts)


def _drop_collinear(pts: np.ndarray) -> np.ndarray:
    if pts.shape[0] <= 2:
        return pts
    keep = [0]
    for k in range(1, pts.shape[0] - 1):
        a, b, c = pts[keep[-1]], pts[k], pts[k + 1]
        cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(cross) > 1e-9:
            keep.append(k)
    keep.append(pts.shape[0] - 1)
    return pts[keep]


class Planner:
    """Map plus the most recent plan; the harness calls :meth:`replan` at its rate."""

    def __init__(self, grid: OccupancyGrid, config: PlannerConfig):
        self.grid = grid
        self.config = config
        self.path: Path | None = None
        self.cells: np.ndarray | None = None
        self.failures = 0

    def integrate(self, pose_estimate: Pose2, scan: LidarScan) -> None:
        update_grid(self.grid, pose_estimate, scan)

    def replan(self, start, goal) -> tuple[Path, bool]:
        """New path from ``start`` to ``goal``; the flag is False when search failed.

        On failure the previous path is kept, or a straight segment is used.
        """
        start = np.asarray(start, dtype=float)
        goal = np.asarray(goal, dtype=float)
        blocked = blocked_mask(self.grid, self.config)
        sx, sy = self.grid.to_cell(start)
        if self.grid.inside(sx, sy) and blocked[sy, sx]:
            blocked = _carve_start(self.grid, blocked, start, self.config.inflation_radius)
        cells, cost = search(self.grid, blocked, start, goal)
        if not math.isfinite(cost):
            self.failures += 1
            if self.path is None:
                self.path = Path.from_points([start, goal])
            return self.path, False
        if self.config.smoothing:
            cells = smooth_cells(cells, blocked)
        pts = self.grid.centers(cells)
        # exact endpoints instead of cell centers
        pts[0] = start
        pts[-1] = goal
        new = Path.from_points(pts)
        if self._keep_current(new, start, goal, blocked):
            return self.path, True
        self.cells = cells
        self.path = new
        return self.path, True

    def _keep_current(self, new: Path, start, goal, blocked: np.ndarray) -> bool:
        """Commit to the current path while it stays clear and is not clearly longer.

        Without this, two nearly equal routes around an obstacle can swap on
        every replan and the reference never gets ahead of the robot.
        """
        old = self.path
        if self.config.switch_margin <= 0.0 or old is None or not np.allclose(old.goal, goal):
            return False
        s, _ = old.project(start)
        remaining = (1.0 - s) * old.length + float(np.hypot(*(old.eval(s) - start)))
        if new.length < remaining - self.config.switch_margin:
            return False
        # same line-of-sight test the smoother uses, from the projection onward
        k = int(np.searchsorted(old.arclength, s * old.length, side="right"))
        pts = np.vstack([old.eval(s)[None], old.waypoints[k:]])
        cells = self.grid.to_cells(pts)
        inside = (cells[:, 0] >= 0) & (cells[:, 0] < self.grid.width) & (cells[:, 1] >= 0) & (cells[:, 1] < self.grid.height)
        if not inside.all():
            return False
        return all(
            kernels.line_clear(blocked, a[0], a[1], b[0], b[1]) for a, b in zip(cells[:-1], cells[1:])
        )
