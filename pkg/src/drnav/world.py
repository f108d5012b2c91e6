"""Ground-truth simulation: obstacles, pedestrians, LiDAR, localization noise, contact."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .drcbf import ObstaclePoint, PointCloud
from .geometry import (
    Circle,
    PackedShape,
    Pose2,
    Shape,
    boundary_samples,
    cast_rays,
    circumradius,
    feature_points,
    pack,
    rotation,
    sdf_batch,
    transform_shape,
)

CONTACT_TOL = 1e-6


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# moving things
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MovingObstacle:
    """Rigid obstacle ping-ponging along waypoints while spinning at a fixed rate.

    ``base_shape`` is expressed in the obstacle frame, whose origin follows the
    waypoint polyline.
    """

    base_shape: Shape
    waypoints: np.ndarray
    speed: float
    angular_rate: float = 0.0
    speed_bound: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        w = np.array(self.waypoints, dtype=float).reshape(-1, 2)
        if w.shape[0] < 1:
            raise ValueError("moving obstacle needs at least one waypoint")
        object.__setattr__(self, "waypoints", w)
        if self.speed < 0.0:
            raise ValueError("speed must be nonnegative")
        worst = self.speed + abs(self.angular_rate) * circumradius(self.base_shape)
        if worst > self.speed_bound + 1e-12:
            raise ValueError(f"boundary speed {worst:.3f} exceeds bound {self.speed_bound}")

    @property
    def _cum(self) -> np.ndarray:
        seg = np.hypot(*np.diff(self.waypoints, axis=0).T) if len(self.waypoints) > 1 else np.zeros(0)
        return np.concatenate([[0.0], np.cumsum(seg)])

    def translation(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Frame origin and its velocity at time ``t``."""
        cum = self._cum
        total = cum[-1]
        if total <= 0.0 or self.speed == 0.0:
            return self.waypoints[0].copy(), np.zeros(2)
        s = (self.phase + self.speed * t) % (2.0 * total)
        sign = 1.0
        if s > total:
            s = 2.0 * total - s
            sign = -1.0
        k = min(int(np.searchsorted(cum, s, side="right")) - 1, len(cum) - 2)
        e = self.waypoints[k + 1] - self.waypoints[k]
        le = cum[k + 1] - cum[k]
        d = e / le if le > 0 else np.zeros(2)
        return self.waypoints[k] + (s - cum[k]) * d, sign * self.speed * d

    def heading(self, t: float) -> float:
        return self.angular_rate * t

    def shape_at(self, t: float) -> Shape:
        c, _ = self.translation(t)
        return transform_shape(self.base_shape, Pose2(c[0], c[1], self.heading(t)))

    def point_velocity(self, t: float, points) -> np.ndarray:
        c, v = self.translation(t)
        rel = np.asarray(points, dtype=float).reshape(-1, 2) - c
        return v + self.angular_rate * np.stack([-rel[:, 1], rel[:, 0]], axis=1)


@dataclass
class Pedestrian:
    position: np.ndarray
    velocity: np.ndarray
    goal: np.ndarray
    radius: float = 0.3
    max_speed: float = 1.0
    # seconds spent below the stall speed; a trapped walker picks a new goal
    slow_time: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).copy()
        self.velocity = np.asarray(self.velocity, dtype=float).copy()
        self.goal = np.asarray(self.goal, dtype=float).copy()
        if self.radius <= 0 or self.max_speed <= 0:
            raise ValueError("pedestrian radius and max_speed must be positive")

    @property
    def shape(self) -> Circle:
        return Circle((self.position[0], self.position[1]), self.radius)


@dataclass(frozen=True)
class PedestrianParams:
    relax_time: float = 0.5
    robot_gain: float = 0.6
    pedestrian_gain: float = 0.4
    obstacle_gain: float = 0.3
    arrive_radius: float = 0.3
    # radius of the disk pedestrians keep clear of around the robot center
    robot_radius: float = 0.35
    # a pedestrian slower than stall_speed for stall_time seconds gets a new goal
    stall_speed: float = 0.1
    stall_time: float = 2.0


@dataclass
class World:
    static: list[Shape] = field(default_factory=list)
    moving: list[MovingObstacle] = field(default_factory=list)
    pedestrians: list[Pedestrian] = field(default_factory=list)
    bounds: tuple[float, float, float, float] = (-10.0, 10.0, -10.0, 10.0)
    speed_bound: float = 1.0
    time: float = 0.0
    ped_params: PedestrianParams = field(default_factory=PedestrianParams)
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    def __post_init__(self):
        self._static_packed = pack(self.static) if self.static else None
        for p in self.pedestrians:
            if p.max_speed > self.speed_bound + 1e-12:
                raise ValueError("pedestrian max_speed exceeds the world speed bound")

    @property
    def static_packed(self) -> PackedShape | None:
        return self._static_packed

    def current_shapes(self) -> list[tuple[Shape, str, int]]:
        """Every obstacle at the current time with its (kind, index)."""
        out = [(s, "static", i) for i, s in enumerate(self.static)]
        out += [(m.shape_at(self.time), "moving", i) for i, m in enumerate(self.moving)]
        out += [(p.shape, "pedestrian", i) for i, p in enumerate(self.pedestrians)]
        return out

    def snapshot(self) -> "Snapshot":
        items = self.current_shapes()
        return Snapshot(
            pack([s for s, _, _ in items]) if items else None,
            [(k, i) for _, k, i in items],
            [s for s, _, _ in items],
        )

    def velocity_of(self, kind: str, index: int, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        if kind == "moving":
            return self.moving[index].point_velocity(self.time, pts)
        if kind == "pedestrian":
            return np.repeat(self.pedestrians[index].velocity[None], pts.shape[0], axis=0)
        return np.zeros_like(pts)

    def is_dynamic(self) -> bool:
        return bool(self.moving or self.pedestrians)


@dataclass(frozen=True)
class Snapshot:
    packed: PackedShape | None
    owners: list[tuple[str, int]]
    shapes: list[Shape]

    def features(self) -> tuple[np.ndarray, np.ndarray]:
        cached = self.__dict__.get("_features")
        if cached is None:
            parts = [feature_points(s) for s in self.shapes]
            cached = (np.vstack([p for p, _ in parts]), np.concatenate([o for _, o in parts]))
            object.__setattr__(self, "_features", cached)
        return cached


def step_world(world: World, dt: float, robot_position=None) -> World:
    """Advance obstacle motion and pedestrians by ``dt`` in place and return the world."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    pp = world.ped_params
    if world.pedestrians:
        pos = np.array([p.position for p in world.pedestrians])
        acc = []
        for i, p in enumerate(world.pedestrians):
            to_goal = p.goal - p.position
            dist = float(np.hypot(*to_goal))
            desired = to_goal / dist * p.max_speed if dist > 1e-9 else np.zeros(2)
            a = (desired - p.velocity) / pp.relax_time
            if robot_position is not None:
                a += _repel(p.position, np.asarray(robot_position, dtype=float), pp.robot_gain, p.radius + pp.robot_radius)
            for j, q in enumerate(world.pedestrians):
                if j != i:
                    a += _repel(p.position, pos[j], pp.pedestrian_gain, p.radius + q.radius)
            if world.static_packed is not None:
                d, g = sdf_batch(world.static_packed, p.position[None])
                gap = max(float(d[0]) - p.radius, 0.05)
                a += pp.obstacle_gain * g[0] / gap**2
            acc.append(a)
        for p, a in zip(world.pedestrians, acc):
            v = p.velocity + dt * a
            sp = float(np.hypot(*v))
            if sp > p.max_speed:
                v = v * (p.max_speed / sp)
            p.velocity = v
            p.position = p.position + dt * v
            p.slow_time = p.slow_time + dt if sp < pp.stall_speed else 0.0
            if np.hypot(*(p.goal - p.position)) < pp.arrive_radius or p.slow_time >= pp.stall_time:
                p.slow_time = 0.0
                xmin, xmax, ymin, ymax = world.bounds
                p.goal = np.array([world.rng.uniform(xmin + 1, xmax - 1), world.rng.uniform(ymin + 1, ymax - 1)])
    world.time += dt
    return world


def _repel(p, other, gain, contact: float) -> np.ndarray:
    """Inverse-square push away from ``other`` in the surface gap."""
    d = p - other
    r = float(np.hypot(*d))
    if r < 1e-9:
        return np.zeros(2)
    gap = max(r - contact, 0.05)
    return gain * d / (r * gap**2)


# ---------------------------------------------------------------------------
# sensing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LidarConfig:
    ray_count: int = 100
    eta_min: float = 0.1
    eta_max: float = 10.0
    noise_sigma: float = 0.0
    rate: float = 10.0
    velocity_noise_sigma: float = 0.0

    def __post_init__(self):
        if int(self.ray_count) != self.ray_count or self.ray_count < 1:
            raise ValueError("ray_count must be a positive integer")
        if not 0.0 <= self.eta_min < self.eta_max:
            raise ValueError("need 0 <= eta_min < eta_max")
        if self.noise_sigma < 0 or self.velocity_noise_sigma < 0:
            raise ValueError("noise sigmas must be nonnegative")
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    @property
    def angles(self) -> np.ndarray:
        return np.arange(self.ray_count) * (2.0 * math.pi / self.ray_count)


@dataclass(frozen=True)
class LidarScan:
    """Ranges in the sensor frame; velocities are ground truth (optionally noised)."""

    ranges: np.ndarray
    angles: np.ndarray
    hits: np.ndarray
    velocities: np.ndarray
    eta_max: float

    def points(self, pose: Pose2) -> PointCloud:
        """Hit returns placed in the world with ``pose`` (typically an estimate)."""
        a = pose.theta + self.angles[self.hits]
        r = self.ranges[self.hits]
        pos = np.stack([pose.x + r * np.cos(a), pose.y + r * np.sin(a)], axis=1)
        return PointCloud(pos, self.velocities[self.hits].copy())

    def obstacle_points(self, pose: Pose2) -> list[ObstaclePoint]:
        c = self.points(pose)
        return [ObstaclePoint(p, v) for p, v in zip(c.positions, c.velocities)]


def lidar_scan(world: World, true_pose: Pose2, config: LidarConfig, rng=None, snapshot: Snapshot | None = None):
    """Simulate one 360 degree scan; returns ``(ranges, hit_points, scan)``.

    Rays that hit nothing read exactly ``eta_max`` and carry no point.
    """
    gen = _rng(rng)
    ang = config.angles
    world_ang = true_pose.theta + ang
    dirs = np.stack([np.cos(world_ang), np.sin(world_ang)], axis=1)
    snap = snapshot if snapshot is not None else world.snapshot()
    k = config.ray_count
    truth = np.full(k, np.inf)
    members = np.full(k, -1, dtype=np.int64)
    if snap.packed is not None:
        truth, members, _ = cast_rays(snap.packed, true_pose.position, dirs, config.eta_max)
    hits = np.isfinite(truth)
    noise = gen.normal(0.0, config.noise_sigma, k) if config.noise_sigma > 0 else np.zeros(k)
    ranges = np.full(k, config.eta_max)
    ranges[hits] = np.clip(np.clip(truth[hits], config.eta_min, config.eta_max) + noise[hits], config.eta_min, config.eta_max)
    vel = np.zeros((k, 2))
    if np.any(hits) and snap.packed is not None:
        hit_pts = true_pose.position + truth[hits, None] * dirs[hits]
        owners = snap.packed.owner[members[hits]]
        hv = np.zeros((hit_pts.shape[0], 2))
        for o in np.unique(owners):
            kind, idx = snap.owners[o]
            if kind != "static":
                sel = owners == o
                hv[sel] = world.velocity_of(kind, idx, hit_pts[sel])
        vel[hits] = hv
    if config.velocity_noise_sigma > 0:
        vel[hits] += gen.normal(0.0, config.velocity_noise_sigma, (int(hits.sum()), 2))
    scan = LidarScan(ranges, ang, hits, vel, config.eta_max)
    return ranges, scan.obstacle_points(true_pose), scan


@dataclass(frozen=True)
class LocalizationModel:
    sigma_xy: float = 0.0
    sigma_theta: float = 0.0
    sample_count: int = 3

    def __post_init__(self):
        if self.sigma_xy < 0 or self.sigma_theta < 0:
            raise ValueError("localization sigmas must be nonnegative")
        if int(self.sample_count) != self.sample_count or self.sample_count < 1:
            raise ValueError("sample_count must be a positive integer")


def _perturb(pose: Pose2, model: LocalizationModel, gen: np.random.Generator, n: int) -> np.ndarray:
    noise = np.column_stack([gen.normal(0.0, 1.0, (n, 2)) * model.sigma_xy, gen.normal(0.0, 1.0, n) * model.sigma_theta])
    return pose.as_array()[None] + noise


def localize(true_pose: Pose2, model: LocalizationModel, rng=None) -> tuple[Pose2, list[Pose2]]:
    gen = _rng(rng)
    est = Pose2.from_array(_perturb(true_pose, model, gen, 1)[0])
    samples = [Pose2.from_array(a) for a in _perturb(est, model, gen, model.sample_count)]
    return est, samples


# ---------------------------------------------------------------------------
# contact
# ---------------------------------------------------------------------------


_BOUNDARY_CACHE: dict[int, tuple[Shape, np.ndarray, np.ndarray, np.ndarray]] = {}


def _robot_features(shape: Shape):
    hit = _BOUNDARY_CACHE.get(id(shape))
    if hit is not None and hit[0] is shape:
        return hit[1:]
    pts = boundary_samples(shape, 64)
    fp, off = feature_points(shape)
    _BOUNDARY_CACHE[id(shape)] = (shape, pts, fp, off)
    return pts, fp, off


def separation(world: World, shape: Shape, true_pose: Pose2, snapshot: Snapshot | None = None) -> float:
    """Approximate minimum signed gap between the body and every obstacle."""
    snap = snapshot if snapshot is not None else world.snapshot()
    if snap.packed is None:
        return math.inf
    bpts, fp, off = _robot_features(shape)
    body_world = true_pose.to_world(np.vstack([bpts, fp]))
    d_body, _ = sdf_batch(snap.packed, body_world)
    d_body[bpts.shape[0]:] -= off
    gap = float(np.min(d_body))
    # obstacle features against the body catch thin obstacles poking between samples
    ofp, ooff = snap.features()
    d, _ = sdf_batch(shape, true_pose.to_body(ofp))
    return min(gap, float(np.min(d - ooff)))


def collision_check(world: World, shape: Shape, true_pose: Pose2, snapshot: Snapshot | None = None) -> bool:
    return separation(world, shape, true_pose, snapshot) <= CONTACT_TOL
