"""2D signed-distance fields, rigid poses and ray/shape intersection.

Shapes are immutable values. Every query goes through a packed array form
(:class:`PackedShape`) so batched evaluation can use the compiled kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence, Union as TUnion

import numpy as np

from . import kernels
from .kernels.geom import CIRCLE, POLYGON


def wrap_angle(theta: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    return (theta + math.pi) % (2.0 * math.pi) - math.pi


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def rotation(self) -> np.ndarray:
        return rotation(self.theta)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    @classmethod
    def from_array(cls, a) -> "Pose2":
        return cls(a[0], a[1], a[2])

    def to_body(self, points) -> np.ndarray:
        """World points ``(..., 2)`` expressed in this pose's body frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        d = np.asarray(points, dtype=float) - (self.x, self.y)
        return np.stack([c * d[..., 0] + s * d[..., 1], -s * d[..., 0] + c * d[..., 1]], axis=-1)

    def to_world(self, points) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        p = np.asarray(points, dtype=float)
        return np.stack(
            [c * p[..., 0] - s * p[..., 1] + self.x, s * p[..., 0] + c * p[..., 1] + self.y], axis=-1
        )


# ---------------------------------------------------------------------------
# shapes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        if len(c) != 2 or not all(map(math.isfinite, c)):
            raise ValueError(f"circle center must be a finite 2-vector, got {self.center!r}")
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise ValueError(f"circle radius must be positive, got {self.radius!r}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True)
class ConvexPolygon:
    """Strictly convex polygon with counterclockwise vertices."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        v = tuple((float(p[0]), float(p[1])) for p in self.vertices)
        if len(v) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        arr = np.array(v)
        if not np.all(np.isfinite(arr)):
            raise ValueError("polygon vertices must be finite")
        e = np.roll(arr, -1, axis=0) - arr
        turn = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if not np.all(turn > 0.0):
            raise ValueError("polygon must be strictly convex and counterclockwise")
        # a strictly left-turning chain could still wind twice
        ang = np.arctan2(e[:, 1], e[:, 0])
        total = np.sum(np.mod(np.diff(np.append(ang, ang[0])), 2 * np.pi))
        if abs(total - 2 * np.pi) > 1e-9:
            raise ValueError("polygon must be simple (winding number 1)")
        object.__setattr__(self, "vertices", v)

    @classmethod
    def box(cls, half_x: float, half_y: float, center=(0.0, 0.0), angle: float = 0.0) -> "ConvexPolygon":
        local = np.array([[-half_x, -half_y], [half_x, -half_y], [half_x, half_y], [-half_x, half_y]])
        pts = Pose2(center[0], center[1], angle).to_world(local)
        return cls(tuple(map(tuple, pts)))


@dataclass(frozen=True)
class Union:
    members: tuple["Shape", ...]

    def __post_init__(self):
        m = tuple(self.members)
        if not m:
            raise ValueError("union must have at least one member")
        for s in m:
            if not isinstance(s, (Circle, ConvexPolygon, Union)):
                raise TypeError(f"not a shape: {s!r}")
        object.__setattr__(self, "members", m)


Shape = TUnion[Circle, ConvexPolygon, Union]


def flatten(shape: Shape) -> list:
    """Convex members of a shape in evaluation order."""
    if isinstance(shape, Union):
        out = []
        for m in shape.members:
            out.extend(flatten(m))
        return out
    return [shape]


@dataclass(frozen=True)
class PackedShape:
    kinds: np.ndarray
    params: np.ndarray
    vstart: np.ndarray
    vcount: np.ndarray
    verts: np.ndarray
    # per-member bookkeeping used by callers that need to map hits back
    owner: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def size(self) -> int:
        return int(self.kinds.shape[0])


def pack(shapes: Shape | Sequence[Shape]) -> PackedShape:
    """Pack one shape, or a list of shapes whose index is kept in ``owner``."""
    if isinstance(shapes, (Circle, ConvexPolygon, Union)):
        shapes = [shapes]
    kinds, params, vstart, vcount, verts, owner = [], [], [], [], [], []
    nv = 0
    for k, s in enumerate(shapes):
        for m in flatten(s):
            owner.append(k)
            if isinstance(m, Circle):
                kinds.append(CIRCLE)
                params.append((m.center[0], m.center[1], m.radius))
                vstart.append(nv)
                vcount.append(0)
            else:
                kinds.append(POLYGON)
                params.append((0.0, 0.0, 0.0))
                vstart.append(nv)
                vcount.append(len(m.vertices))
                verts.extend(m.vertices)
                nv += len(m.vertices)
    return PackedShape(
        np.array(kinds, dtype=np.int64),
        np.array(params, dtype=float).reshape(-1, 3),
        np.array(vstart, dtype=np.int64),
        np.array(vcount, dtype=np.int64),
        np.array(verts, dtype=float).reshape(-1, 2),
        np.array(owner, dtype=np.int64),
    )


_PACK_CACHE: dict[int, tuple[Shape, PackedShape]] = {}


def _packed(shape: Shape | PackedShape) -> PackedShape:
    if isinstance(shape, PackedShape):
        return shape
    hit = _PACK_CACHE.get(id(shape))
    if hit is not None and hit[0] is shape:
        return hit[1]
    p = pack(shape)
    if len(_PACK_CACHE) > 4096:
        _PACK_CACHE.clear()
    _PACK_CACHE[id(shape)] = (shape, p)
    return p


# ---------------------------------------------------------------------------
# queries
# ---------------------------------------------------------------------------


class Gradient(NamedTuple):
    vector: np.ndarray
    degenerate: bool


class RayHit(NamedTuple):
    distance: float | None
    penetrating: bool


def sdf_batch(shape: Shape | PackedShape, points) -> tuple[np.ndarray, np.ndarray]:
    """Signed distances ``(n,)`` and gradients ``(n, 2)`` at points ``(n, 2)``."""
    p = _packed(shape)
    pts = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 2))
    vals, grads, _ = kernels.sdf_grad(pts, p.kinds, p.params, p.vstart, p.vcount, p.verts)
    return vals, grads


def sdf_eval(shape: Shape | PackedShape, point) -> float:
    vals, _ = sdf_batch(shape, np.asarray(point, dtype=float).reshape(1, 2))
    return float(vals[0])


def sdf_gradient(shape: Shape | PackedShape, point) -> Gradient:
    """Gradient of the SDF; a member of the Clarke set at kinks.

    Ties between polygon faces or union members resolve to the lowest index.
    A query exactly at a circle center returns ``(1, 0)`` flagged degenerate.
    """
    p = _packed(shape)
    pts = np.asarray(point, dtype=float).reshape(1, 2)
    _, grads, members = kernels.sdf_grad(pts, p.kinds, p.params, p.vstart, p.vcount, p.verts)
    m = int(members[0])
    degenerate = False
    if p.kinds[m] == CIRCLE:
        degenerate = bool(np.hypot(*(pts[0] - p.params[m, :2])) <= 1e-15)
    return Gradient(grads[0].copy(), degenerate)


def robot_sdf(shape: Shape | PackedShape, pose: Pose2, world_point) -> float:
    """Signed distance from a world point to the body placed at ``pose``."""
    return sdf_eval(shape, pose.to_body(np.asarray(world_point, dtype=float)))


def robot_sdf_batch(shape: Shape | PackedShape, pose: Pose2, world_points) -> tuple[np.ndarray, np.ndarray]:
    """Batched robot SDF; gradients are returned in the body frame."""
    return sdf_batch(shape, pose.to_body(np.asarray(world_points, dtype=float).reshape(-1, 2)))


def ray_hit(shape: Shape | PackedShape, origin, direction, max_range: float) -> RayHit:
    d = np.asarray(direction, dtype=float)
    if abs(math.hypot(d[0], d[1]) - 1.0) > 1e-9:
        raise ValueError("ray direction must be a unit vector")
    dist, _, pen = cast_rays(shape, origin, d.reshape(1, 2), max_range)
    if pen[0]:
        return RayHit(0.0, True)
    if math.isinf(dist[0]):
        return RayHit(None, False)
    return RayHit(float(dist[0]), False)


def cast_rays(shape: Shape | PackedShape, origin, directions, max_range: float):
    """Batched rays; returns (distance or inf, member index or -1, penetrating)."""
    p = _packed(shape)
    o = np.asarray(origin, dtype=float).reshape(2)
    dirs = np.ascontiguousarray(np.asarray(directions, dtype=float).reshape(-1, 2))
    if p.size == 0:
        n = dirs.shape[0]
        return np.full(n, np.inf), np.full(n, -1, dtype=np.int64), np.zeros(n, dtype=bool)
    return kernels.raycast(o, dirs, float(max_range), p.kinds, p.params, p.vstart, p.vcount, p.verts)


def boundary_samples(shape: Shape, count: int = 64) -> np.ndarray:
    """Points spread over member boundaries proportionally to perimeter."""
    members = flatten(shape)
    perims = []
    for m in members:
        if isinstance(m, Circle):
            perims.append(2 * math.pi * m.radius)
        else:
            v = np.array(m.vertices)
            perims.append(float(np.sum(np.hypot(*(np.roll(v, -1, 0) - v).T))))
    total = sum(perims)
    counts = [max(1, int(round(count * p / total))) for p in perims]
    out = []
    for m, n in zip(members, counts):
        if isinstance(m, Circle):
            a = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
            out.append(np.stack([m.center[0] + m.radius * np.cos(a), m.center[1] + m.radius * np.sin(a)], 1))
        else:
            v = np.array(m.vertices)
            e = np.roll(v, -1, 0) - v
            lens = np.hypot(e[:, 0], e[:, 1])
            s = np.linspace(0.0, lens.sum(), n, endpoint=False)
            cum = np.concatenate([[0.0], np.cumsum(lens)])
            k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(v) - 1)
            t = (s - cum[k]) / lens[k]
            out.append(v[k] + t[:, None] * e[k])
    return np.concatenate(out, axis=0)


def feature_points(shape: Shape) -> tuple[np.ndarray, np.ndarray]:
    """Polygon vertices and circle centers with the offset to subtract.

    For convex pieces the separation from another convex set is attained at a
    vertex or is center distance minus radius, so these points make contact
    checks exact.
    """
    pts, off = [], []
    for m in flatten(shape):
        if isinstance(m, Circle):
            pts.append(m.center)
            off.append(m.radius)
        else:
            pts.extend(m.vertices)
            off.extend([0.0] * len(m.vertices))
    return np.array(pts, dtype=float).reshape(-1, 2), np.array(off, dtype=float)


def circumradius(shape: Shape) -> float:
    r = 0.0
    for m in flatten(shape):
        if isinstance(m, Circle):
            r = max(r, math.hypot(*m.center) + m.radius)
        else:
            r = max(r, float(np.max(np.hypot(*np.array(m.vertices).T))))
    return r


def transform_shape(shape: Shape, pose: Pose2) -> Shape:
    """Rigidly move a shape from its local frame to ``pose``."""
    if isinstance(shape, Circle):
        c = pose.to_world(np.array(shape.center))
        return Circle((c[0], c[1]), shape.radius)
    if isinstance(shape, ConvexPolygon):
        v = pose.to_world(np.array(shape.vertices))
        return ConvexPolygon(tuple(map(tuple, v)))
    return Union(tuple(transform_shape(m, pose) for m in shape.members))
