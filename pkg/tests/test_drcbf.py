import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from drnav.drcbf import (
    AmbiguityConfig,
    ObstaclePoint,
    UncertaintySample,
    build_sample,
    candidate_matrix,
    cbc_batch,
    cbc_eval,
    cvar_empirical,
    dr_constraint_rows,
    dr_margin,
    sample_matrix,
    select_samples,
    wasserstein_radius,
)
from drnav.dynamics import Control, unicycle_model
from drnav.geometry import Circle, Pose2, robot_sdf

from strategies import convex, poses

DISK = Circle((0, 0), 0.3)
MODEL = unicycle_model()


def test_build_sample_static_point():
    s = build_sample(DISK, Pose2(0, 0, 0), ObstaclePoint((1, 0)), 1.5)
    assert s.h == pytest.approx(0.7)
    np.testing.assert_allclose(s.lie_coeffs, [0, -1, 0], atol=1e-12)
    assert s.alpha_h_of_h == pytest.approx(1.05)
    assert s.dh_dt == 0.0


def test_build_sample_moving_point():
    s = build_sample(DISK, Pose2(0, 0, 0), ObstaclePoint((1, 0), (-1, 0)), 1.5)
    assert s.dh_dt == pytest.approx(-1.0)


def test_cbc_examples():
    s = UncertaintySample(np.array([0.0, -1.0, 0.0]), 1.05, 0.0)
    assert cbc_eval(s, Control(0, 0)) == pytest.approx(1.05)
    assert cbc_eval(s, Control(1.05, 0)) == pytest.approx(0.0)
    z = UncertaintySample(np.zeros(3), 0.0, 0.0)
    assert cbc_eval(z, (3.0, -2.0)) == 0.0


def _fd_sample(shape, pose, point, vel, gain, h=1e-6):
    x = pose.as_array()
    hv = robot_sdf(shape, pose, point)
    grad = np.zeros(3)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        grad[i] = (robot_sdf(shape, Pose2(*(x + e)), point) - robot_sdf(shape, Pose2(*(x - e)), point)) / (2 * h)
    lie = grad @ MODEL.F(x)
    dq = (robot_sdf(shape, pose, point + h * vel) - robot_sdf(shape, pose, point - h * vel)) / (2 * h)
    return np.concatenate([lie, [gain * hv, dq]])


@given(convex, poses(), st.floats(-6, 6), st.floats(-6, 6), st.floats(-2, 2), st.floats(-2, 2))
def test_chain_rule_matches_finite_differences(shape, pose, px, py, vx, vy):
    point = np.array([px, py])
    xi, h = sample_matrix(shape, pose, point[None], np.array([[vx, vy]]), 1.5)
    # stay away from the medial axis where the SDF is not differentiable
    hv = robot_sdf(shape, pose, point)
    if hv < 0.05:
        return
    fd = _fd_sample(shape, pose, point, np.array([vx, vy]), 1.5)
    if not np.allclose(xi[0], fd, atol=1e-4):
        # kinks of a polygon's exterior distance lie on vertex normals; confirm by a coarser step
        fd2 = _fd_sample(shape, pose, point, np.array([vx, vy]), 1.5, h=1e-8)
        assert np.allclose(xi[0], fd2, atol=1e-3)


def test_circle_body_has_no_heading_term():
    s = build_sample(DISK, Pose2(0, 0, 0.7), ObstaclePoint((math.cos(0.7) * 2, math.sin(0.7) * 2)), 1.5)
    assert s.lie_coeffs[2] == pytest.approx(0.0, abs=1e-12)


def test_select_static_returns_closest():
    pts = [ObstaclePoint((d, 0)) for d in (3.0, 1.0, 2.0, 0.8, 5.0)]
    sel = select_samples(pts, DISK, [Pose2(0, 0, 0)], 1.5, 3)
    assert sorted(round(s.h, 6) for s in sel.samples) == [0.5, 0.7, 1.7]
    assert not sel.short


def test_select_prefers_fast_approach():
    far = ObstaclePoint((2.3, 0), (-3.5, 0))  # h = 2, dh/dt = -3.5
    near = ObstaclePoint((0.8, 0))  # h = 0.5
    sel = select_samples([near, far], DISK, [Pose2(0, 0, 0)], 1.5, 1)
    assert sel.samples[0].h == pytest.approx(2.0)


def test_select_all_candidates():
    pts = [ObstaclePoint((1 + i, i)) for i in range(4)]
    poses_ = [Pose2(0, 0, 0), Pose2(0.1, 0, 0.2)]
    sel = select_samples(pts, DISK, poses_, 1.5, 8)
    assert len(sel.samples) == 8 and not sel.short
    assert select_samples(pts, DISK, poses_, 1.5, 9).short


def test_wasserstein_examples():
    assert wasserstein_radius(4, math.exp(-1), dim_k=2) == pytest.approx(0.5)
    assert wasserstein_radius(10**9, math.exp(-1)) < 1e-1
    assert wasserstein_radius(2, math.exp(-4), rho=1) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        wasserstein_radius(4, 1.5)


def test_cvar_examples():
    assert cvar_empirical([1, 2, 3, 4], 0.5) == pytest.approx(3.5)
    assert cvar_empirical([2.5] * 7, 0.3) == pytest.approx(2.5)
    assert cvar_empirical([0, 10], 0.5) == pytest.approx(10.0)


def _cvar_brute(v, eps):
    # Rockafellar-Uryasev objective on a fine grid plus all sample points
    grid = np.concatenate([np.linspace(v.min() - 1, v.max() + 1, 4001), v])
    return min(s + np.mean(np.maximum(v - s, 0)) / eps for s in grid)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=12), st.floats(0.05, 0.95))
def test_cvar_matches_brute_force(values, eps):
    v = np.array(values)
    c = cvar_empirical(v, eps)
    assert c == pytest.approx(_cvar_brute(v, eps), abs=1e-9)
    assert c >= v.mean() - 1e-9
    assert c <= v.max() + 1e-9


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=12))
def test_cvar_tail_limit_is_max(values):
    v = np.array(values)
    assert cvar_empirical(v, 1.0 / len(v) - 1e-9) == pytest.approx(v.max(), abs=1e-6)


def test_row_count_and_layout():
    xi = np.random.default_rng(0).normal(size=(4, 5))
    rows = dr_constraint_rows(xi, AmbiguityConfig(0.05, 0.1, 4))
    assert rows.A.shape == (2 * 2 + 2 + 2 * 4, 2 + 3 + 4)
    assert rows.dim == 9 and rows.i_t == 8 and rows.i_s == 3


def _lp_feasible(rows):
    res = linprog(np.zeros(rows.dim), A_ub=rows.A, b_ub=rows.b, bounds=[(None, None)] * rows.dim, method="highs")
    return res.status == 0


@pytest.mark.parametrize("c", [0.4, 0.0, -0.3])
def test_single_sample_zero_radius_reduces_to_cbc(c):
    # sample with CBC(u) = c for u = 0, and no control authority
    xi = np.array([[0.0, 0.0, 0.0, c, 0.0]])
    rows = dr_constraint_rows(xi, AmbiguityConfig(0.0, 0.1, 1))
    assert _lp_feasible(rows) == (c >= 0)


def _z(rows, u, s, xi, eps_slack=0.0):
    c = cbc_batch(xi, u)
    z = np.zeros(rows.dim)
    z[: rows.m] = u
    z[rows.i_s] = s
    z[rows.i_beta] = np.maximum(s - c, 0.0) + eps_slack
    z[rows.i_t] = max(1.0, float(np.max(np.abs(u))))
    return z


@given(st.integers(0, 2**31), st.integers(1, 6), st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_feasible_set_nested_in_radius(seed, n, r_a, r_b):
    r1, r2 = sorted((r_a, r_b))
    rng = np.random.default_rng(seed)
    xi = rng.normal(size=(n, 5))
    xi[:, 3] = np.abs(xi[:, 3]) * 5
    hi = dr_constraint_rows(xi, AmbiguityConfig(r2, 0.1, n))
    lo = dr_constraint_rows(xi, AmbiguityConfig(r1, 0.1, n))
    for _ in range(20):
        z = _z(hi, rng.uniform(-1.5, 1.5, 2), rng.uniform(-1, 6), xi, rng.uniform(0, 0.1))
        if np.all(hi.A @ z <= hi.b + 1e-12):
            assert np.all(lo.A @ z <= lo.b + 1e-12)


@given(st.integers(0, 2**31), st.integers(1, 6), st.floats(0.0, 0.5), st.floats(0.05, 0.5))
def test_dr_rows_imply_sample_average_condition(seed, n, r, eps):
    rng = np.random.default_rng(seed)
    xi = rng.normal(size=(n, 5))
    xi[:, 3] = np.abs(xi[:, 3]) * 5
    cfg = AmbiguityConfig(r, eps, n)
    rows = dr_constraint_rows(xi, cfg)
    for _ in range(20):
        u = rng.uniform(-1.5, 1.5, 2)
        z = _z(rows, u, rng.uniform(-1, 6), xi, rng.uniform(0, 0.1))
        if np.all(rows.A @ z <= rows.b + 1e-12):
            assert dr_margin(xi, u, cfg) <= 1e-9


@given(st.integers(0, 2**31), st.integers(1, 6))
def test_sample_average_condition_is_achievable_by_rows(seed, n):
    # converse direction: the exact minimizing s with tight beta satisfies every row
    rng = np.random.default_rng(seed)
    xi = rng.normal(size=(n, 5))
    xi[:, 3] = np.abs(xi[:, 3]) * 5
    cfg = AmbiguityConfig(0.05, 0.1, n)
    rows = dr_constraint_rows(xi, cfg)
    u = rng.uniform(-1.5, 1.5, 2)
    if dr_margin(xi, u, cfg) > 0:
        return
    c = cbc_batch(xi, u)
    best = min(c, key=lambda s: np.mean(np.maximum(s - c, 0)) - s * cfg.epsilon)
    z = _z(rows, u, best, xi)
    assert np.all(rows.A @ z <= rows.b + 1e-9)


@given(st.integers(0, 2**31))
def test_cbc_identity(seed):
    rng = np.random.default_rng(seed)
    lf, lg, a, dt = rng.normal(), rng.normal(size=2), rng.normal(), rng.normal()
    u = rng.normal(size=2)
    s = UncertaintySample(np.concatenate([[lf], lg]), a, dt)
    assert cbc_eval(s, u) == pytest.approx(lf + lg @ u + a + dt, abs=1e-12)
    assert cbc_batch(s.as_vector()[None], u)[0] == pytest.approx(cbc_eval(s, u), abs=1e-12)


def test_candidate_matrix_is_pose_major():
    pts = [ObstaclePoint((2, 0)), ObstaclePoint((0, 3))]
    xi, h = candidate_matrix(pts, DISK, [Pose2(0, 0, 0), Pose2(1, 0, 0)], 1.5)
    np.testing.assert_allclose(h, [1.7, 2.7, 0.7, math.hypot(1, 3) - 0.3])


def test_config_validation():
    with pytest.raises(ValueError):
        AmbiguityConfig(-0.1)
    with pytest.raises(ValueError):
        AmbiguityConfig(epsilon=1.0)
    with pytest.raises(ValueError):
        AmbiguityConfig(sample_count_N=0)
    with pytest.raises(ValueError):
        ObstaclePoint((np.nan, 0))
