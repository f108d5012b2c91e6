"""CLF-DR-CBF and nominal CLF-CBF quadratic-program controllers."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .drcbf import (
    AmbiguityConfig,
    ObstaclePoint,
    PointCloud,
    candidate_matrix,
    cbc_batch,
    dr_constraint_rows,
    sample_matrix,
    select_rows,
)
from .dynamics import Control
from .geometry import Pose2, Shape
from .qpsolver import QuadraticProgram, solve
from .stabilizer import GOAL_TOL, ClfParams, clf_lie_terms, clf_value

STATUS_OK = "ok"
STATUS_STOP = "infeasible-stop"

# tiny weight on the auxiliary variables so their optimum is unique
AUX_REG = 1e-8


@dataclass(frozen=True)
class ControllerConfig:
    lam: float = 50.0
    clf: ClfParams = field(default_factory=ClfParams)
    ambiguity: AmbiguityConfig = field(default_factory=AmbiguityConfig)
    alpha_h_gain: float = 1.5
    v_bounds: tuple[float, float] = (-1.2, 1.2)
    omega_bounds: tuple[float, float] = (-1.0, 1.0)
    nominal_control: Control = Control(1.2, 0.0)
    qp_tol: float = 1e-7

    def __post_init__(self):
        if not self.lam > 0.0:
            raise ValueError("lambda must be positive")
        if not self.alpha_h_gain > 0.0:
            raise ValueError("alpha_h_gain must be positive")
        for name in ("v_bounds", "omega_bounds"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must be ordered (min < max)")
            object.__setattr__(self, name, (float(lo), float(hi)))


@dataclass(frozen=True)
class ControlOutput:
    control: Control
    delta: float
    status: str
    solve_time: float
    active_cbc_margin: float
    samples: np.ndarray | None = None

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


def _box_rows(config: ControllerConfig, dim: int) -> tuple[np.ndarray, np.ndarray]:
    A = np.zeros((4, dim))
    A[0, 0], A[1, 0], A[2, 1], A[3, 1] = 1.0, -1.0, 1.0, -1.0
    b = np.array([config.v_bounds[1], -config.v_bounds[0], config.omega_bounds[1], -config.omega_bounds[0]])
    return A, b


def _clc_row(config: ControllerConfig, pose: Pose2, reference, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """LgV u - delta <= -(LfV + alpha_V(V)) with linear alpha_V."""
    lfv, lgv = clf_lie_terms(config.clf, pose, reference)
    v = clf_value(config.clf, pose, reference)
    A = np.zeros((1, dim))
    A[0, :2] = lgv
    A[0, 2] = -1.0
    return A, np.array([-(lfv + config.clf.alpha_v_gain * v)])


def _objective(config: ControllerConfig, dim: int) -> tuple[np.ndarray, np.ndarray, float]:
    k = config.nominal_control.as_array()
    diag = np.full(dim, AUX_REG)
    diag[:2] = 2.0
    diag[2] = 2.0 * config.lam
    q = np.zeros(dim)
    q[:2] = -2.0 * k
    return np.diag(diag), q, float(k @ k)


def _at_goal(pose: Pose2, reference) -> bool:
    return math.hypot(float(reference[0]) - pose.x, float(reference[1]) - pose.y) <= GOAL_TOL


def _solve(config: ControllerConfig, pose: Pose2, reference, xi: np.ndarray | None, dr: bool, t0: float) -> ControlOutput:
    if xi is not None and xi.shape[0] > 0:
        if dr:
            rows = dr_constraint_rows(xi, config.ambiguity)
            dim = rows.dim
            A_s, b_s = rows.A, rows.b
        else:
            dim = 3
            A_s = np.zeros((xi.shape[0], dim))
            A_s[:, :2] = -xi[:, 1:3]
            b_s = xi[:, 0] + xi[:, 3] + xi[:, 4]
    else:
        dim = 3
        A_s, b_s = np.zeros((0, dim)), np.zeros(0)
    A_c, b_c = _clc_row(config, pose, reference, dim)
    A_b, b_b = _box_rows(config, dim)
    P, q, c = _objective(config, dim)
    qp = QuadraticProgram(P, q, np.vstack([A_c, A_s, A_b]), np.concatenate([b_c, b_s, b_b]), c)
    sol = solve(qp, tol=config.qp_tol)
    if not sol.optimal:
        return ControlOutput(Control(0.0, 0.0), math.nan, STATUS_STOP, time.perf_counter() - t0, math.nan, xi)
    u = sol.z[:2].copy()
    # strip interior-point fuzz so the command is exactly inside the box
    u[0] = min(max(u[0], config.v_bounds[0]), config.v_bounds[1])
    u[1] = min(max(u[1], config.omega_bounds[0]), config.omega_bounds[1])
    margin = float(np.min(cbc_batch(xi, u))) if xi is not None and xi.shape[0] else math.inf
    return ControlOutput(Control(float(u[0]), float(u[1])), float(sol.z[2]), STATUS_OK, time.perf_counter() - t0, margin, xi)


def clf_dr_cbf_step(
    config: ControllerConfig,
    state_estimate: Pose2,
    pose_samples: Sequence[Pose2],
    obstacle_points: Sequence[ObstaclePoint] | PointCloud,
    reference,
    shape: Shape,
) -> ControlOutput:
    """One tick of the distributionally robust controller.

    An empty point list means an empty environment: the DR rows are dropped
    and the program reduces to CLF tracking of the nominal control.
    """
    t0 = time.perf_counter()
    if _at_goal(state_estimate, reference):
        return ControlOutput(Control(0.0, 0.0), 0.0, STATUS_OK, time.perf_counter() - t0, math.inf)
    cloud = PointCloud.from_points(obstacle_points)
    xi = None
    if len(cloud):
        cand, h = candidate_matrix(cloud, shape, pose_samples or [state_estimate], config.alpha_h_gain)
        xi = cand[select_rows(cand, h, config.ambiguity.sample_count_N)]
    return _solve(config, state_estimate, reference, xi, True, t0)


def nominal_clf_cbf_step(
    config: ControllerConfig,
    state_estimate: Pose2,
    closest_point: ObstaclePoint | None,
    reference,
    shape: Shape,
) -> ControlOutput:
    """Baseline with a single barrier row from the mean pose and one point."""
    t0 = time.perf_counter()
    if _at_goal(state_estimate, reference):
        return ControlOutput(Control(0.0, 0.0), 0.0, STATUS_OK, time.perf_counter() - t0, math.inf)
    xi = None
    if closest_point is not None:
        xi, _ = sample_matrix(
            shape, state_estimate, closest_point.position[None], closest_point.velocity[None], config.alpha_h_gain
        )
    return _solve(config, state_estimate, reference, xi, False, t0)


def closest_point(points, shape: Shape, pose: Pose2) -> ObstaclePoint | None:
    """The point with the smallest barrier value at ``pose``; lowest index on ties."""
    cloud = PointCloud.from_points(points)
    if not len(cloud):
        return None
    _, h = sample_matrix(shape, pose, cloud.positions, cloud.velocities, 1.0)
    i = int(np.argmin(h))
    return ObstaclePoint(cloud.positions[i], cloud.velocities[i])
