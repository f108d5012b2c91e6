import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drnav.geometry import Circle, ConvexPolygon, Pose2, boundary_samples
from drnav.world import (
    LidarConfig,
    LocalizationModel,
    MovingObstacle,
    Pedestrian,
    World,
    collision_check,
    lidar_scan,
    localize,
    separation,
    step_world,
)

JACKAL = ConvexPolygon.box(0.254, 0.215)


def test_empty_world_scan():
    ranges, pts, scan = lidar_scan(World(), Pose2(0, 0, 0), LidarConfig(noise_sigma=0.05), 0)
    assert np.all(ranges == 10.0)
    assert pts == [] and not scan.hits.any()


def test_circle_ahead_zero_noise():
    w = World(static=[Circle((4.5, 0.0), 0.5)])
    ranges, pts, _ = lidar_scan(w, Pose2(0, 0, 0), LidarConfig(), 0)
    assert ranges[0] == pytest.approx(4.0, abs=1e-12)
    np.testing.assert_allclose(pts[0].position, [4.0, 0.0], atol=1e-12)


def test_heading_rotates_rays():
    w = World(static=[Circle((0.0, 4.5), 0.5)])
    ranges, _, _ = lidar_scan(w, Pose2(0, 0, math.pi / 2), LidarConfig(), 0)
    assert ranges[0] == pytest.approx(4.0, abs=1e-12)


def test_noise_mean_is_unbiased():
    w = World(static=[Circle((4.5, 0.0), 0.5)])
    cfg = LidarConfig(noise_sigma=0.05)
    rng = np.random.default_rng(3)
    reads = np.array([lidar_scan(w, Pose2(0, 0, 0), cfg, rng)[0][0] for _ in range(10_000)])
    assert abs(reads.mean() - 4.0) <= 3 * 0.05 / 100


def test_noise_uncorrelated_across_rays():
    # a ring wall so every ray hits at a constant range
    w = World(static=[ConvexPolygon.box(0.2, 30.0, center=(6.0, 0.0))])
    cfg = LidarConfig(ray_count=8, noise_sigma=0.05, eta_max=100.0)
    rng = np.random.default_rng(5)
    reads = np.array([lidar_scan(w, Pose2(0, 0, 0), cfg, rng)[0][:2] for _ in range(10_000)])
    assert abs(np.corrcoef(reads.T)[0, 1]) < 0.05


def test_localize_examples():
    est, samples = localize(Pose2(1, 2, 0.3), LocalizationModel(0.0, 0.0, 3), 0)
    assert est == Pose2(1, 2, 0.3)
    assert all(s == est for s in samples) and len(samples) == 3
    est, samples = localize(Pose2(0, 0, 0), LocalizationModel(0.1, 0.1, 1), 0)
    assert len(samples) == 1 and samples[0] != est


def test_localize_spread():
    model = LocalizationModel(0.05, 0.0, 1)
    rng = np.random.default_rng(11)
    xs = np.array([localize(Pose2(0, 0, 0), model, rng)[0].x for _ in range(10_000)])
    assert xs.std() == pytest.approx(0.05, rel=0.05)


def test_static_world_unchanged():
    w = World(static=[Circle((1, 1), 0.5)])
    before, _, _ = lidar_scan(w, Pose2(0, 0, 0), LidarConfig(), 0)
    step_world(w, 0.02)
    after, _, _ = lidar_scan(w, Pose2(0, 0, 0), LidarConfig(), 0)
    assert w.time == pytest.approx(0.02)
    assert w.static[0] == Circle((1, 1), 0.5)
    np.testing.assert_array_equal(before, after)


def test_linear_obstacle_advances():
    m = MovingObstacle(Circle((0, 0), 0.3), [[0, 0], [5, 0]], 1.0)
    w = World(moving=[m])
    c0, v0 = m.translation(w.time)
    step_world(w, 0.02)
    c1, _ = m.translation(w.time)
    np.testing.assert_allclose(c1 - c0, [0.02, 0.0], atol=1e-12)
    np.testing.assert_allclose(v0, [1.0, 0.0])


def test_moving_obstacle_bound_checked():
    with pytest.raises(ValueError):
        MovingObstacle(ConvexPolygon.box(1.0, 1.0), [[0, 0], [1, 0]], 0.9, angular_rate=0.5, speed_bound=1.0)


@given(st.floats(0.0, 0.6), st.floats(-0.8, 0.8), st.floats(0.0, 30.0))
def test_obstacle_boundary_speed_bounded(speed, omega, t):
    shape = ConvexPolygon.box(0.5, 0.3)
    bound = 1.0
    if speed + abs(omega) * math.hypot(0.5, 0.3) > bound:
        return
    m = MovingObstacle(shape, [[0, 0], [4, 1], [2, 3]], speed, omega, bound)
    h = 1e-6
    local = boundary_samples(shape, 16)
    def world_pts(tt):
        c, _ = m.translation(tt)
        a = m.heading(tt)
        R = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
        return local @ R.T + c
    vel = (world_pts(t + h) - world_pts(t)) / h
    # the ping-pong turnaround is a kink; one-sided differences stay bounded
    assert np.max(np.hypot(*vel.T)) <= bound + 1e-6 + 1e-4


def test_pedestrian_speed_clamped():
    rng = np.random.default_rng(2)
    peds = [Pedestrian(rng.uniform(-4, 4, 2), np.zeros(2), rng.uniform(-4, 4, 2), 0.3, 0.8) for _ in range(3)]
    w = World(static=[Circle((0, 0), 1.0)], pedestrians=peds, bounds=(-5, 5, -5, 5), rng=rng)
    top = 0.0
    for i in range(10_000):
        step_world(w, 0.02, robot_position=(math.cos(i * 0.01) * 3, 0.0))
        top = max(top, max(float(np.hypot(*p.velocity)) for p in w.pedestrians))
    assert top <= 0.8 + 1e-12


def test_collision_examples():
    w = World(static=[Circle((3, 0), 0.5), ConvexPolygon.box(0.5, 0.5, center=(-3, 0))])
    assert not collision_check(w, JACKAL, Pose2(0, 0, 0))
    assert separation(w, JACKAL, Pose2(0, 0, 0)) == pytest.approx(2.5 - 0.254, abs=1e-9)
    assert collision_check(w, JACKAL, Pose2(3, 0, 0.4))
    # front face exactly touching the circle
    assert collision_check(w, JACKAL, Pose2(3 - 0.5 - 0.254, 0, 0))
    assert not collision_check(w, JACKAL, Pose2(3 - 0.5 - 0.254 - 1e-3, 0, 0))
    # box corner touching the square face
    touching = Pose2(-2.5 + 0.254, 0.0, 0.0)
    assert separation(w, JACKAL, touching) == pytest.approx(0.0, abs=1e-9)


def test_scans_reproducible():
    w = World(static=[Circle((3, 1), 0.5), ConvexPolygon.box(0.4, 0.9, center=(-2, 2), angle=0.3)])
    cfg = LidarConfig(noise_sigma=0.1)
    a = [lidar_scan(w, Pose2(0, 0, 0.1 * i), cfg, np.random.default_rng(9))[0] for i in range(5)]
    b = [lidar_scan(w, Pose2(0, 0, 0.1 * i), cfg, np.random.default_rng(9))[0] for i in range(5)]
    for x, y in zip(a, b):
        assert x.tobytes() == y.tobytes()


def test_lidar_config_validation():
    with pytest.raises(ValueError):
        LidarConfig(ray_count=0)
    with pytest.raises(ValueError):
        LidarConfig(eta_min=5.0, eta_max=1.0)


def test_trapped_pedestrian_picks_new_goal():
    # goal straight behind a wall: the walker stalls against it and re-goals
    p = Pedestrian((0.0, 0.0), (0.0, 0.0), (3.0, 0.0), 0.3, 1.0)
    w = World(
        static=[ConvexPolygon.box(0.2, 3.0, center=(1.5, 0.0))],
        pedestrians=[p],
        bounds=(-5, 5, -5, 5),
        rng=np.random.default_rng(4),
    )
    for _ in range(int(6.0 / 0.02)):
        step_world(w, 0.02)
    assert not np.allclose(w.pedestrians[0].goal, (3.0, 0.0))
