"""Unicycle CLF, the min-norm stabilizing law and reference-governor path tracking."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import Control
from .geometry import Pose2

GOAL_TOL = 1e-12
MU_STAR = 0.1


@dataclass(frozen=True)
class ClfParams:
    k_v: float = 0.05
    k_omega: float = 0.4
    alpha_v_gain: float = 1.0
    # exponent of alpha_V(r) = gain * r**p inside min_norm_control; must be > 1
    alpha_v_exponent: float = 2.0

    def __post_init__(self):
        for name in ("k_v", "k_omega", "alpha_v_gain"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if not self.alpha_v_exponent > 1.0:
            raise ValueError("alpha_v_exponent must exceed 1 so that alpha(r)/r -> 0")


def _state(state) -> tuple[float, float, float]:
    if isinstance(state, Pose2):
        return state.x, state.y, state.theta
    x = np.asarray(state, dtype=float)
    return float(x[0]), float(x[1]), float(x[2])


def error_terms(state, reference) -> tuple[float, float, float]:
    """(distance, along-heading error, cross-heading error) to the reference."""
    x, y, th = _state(state)
    dx = float(reference[0]) - x
    dy = float(reference[1]) - y
    c, s = math.cos(th), math.sin(th)
    return math.hypot(dx, dy), c * dx + s * dy, -s * dx + c * dy


def clf_value(params: ClfParams, state, reference) -> float:
    d, ev, ep = error_terms(state, reference)
    if d <= GOAL_TOL:
        return 0.0
    phi = math.atan2(ep, ev)
    return 0.5 * (params.k_v * d * d + params.k_omega * phi * phi)


def clf_lie_terms(params: ClfParams, state, reference) -> tuple[float, np.ndarray]:
    d, ev, ep = error_terms(state, reference)
    if d <= GOAL_TOL:
        raise ValueError("CLF Lie derivative undefined at goal")
    phi = math.atan2(ep, ev)
    lgv = np.array([-params.k_v * ev + params.k_omega * phi * ep / (d * d), -params.k_omega * phi])
    return 0.0, lgv


def min_norm_control(params: ClfParams, state, reference) -> Control:
    d, _, _ = error_terms(state, reference)
    if d <= GOAL_TOL:
        return Control(0.0, 0.0)
    v = clf_value(params, state, reference)
    _, lgv = clf_lie_terms(params, state, reference)
    alpha = params.alpha_v_gain * v**params.alpha_v_exponent
    u = -alpha * lgv / float(lgv @ lgv)
    return Control(float(u[0]), float(u[1]))


# ---------------------------------------------------------------------------
# path and governor
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Path:
    """Piecewise-linear curve parametrized by normalized arc length in [0, 1]."""

    waypoints: np.ndarray
    arclength: np.ndarray

    @classmethod
    def from_points(cls, points) -> "Path":
        pts = np.array(points, dtype=float).reshape(-1, 2)
        if pts.shape[0] == 1:
            pts = np.vstack([pts, pts])
        if pts.shape[0] < 2 or not np.all(np.isfinite(pts)):
            raise ValueError("path needs at least one finite waypoint")
        seg = np.hypot(*np.diff(pts, axis=0).T)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        pts.setflags(write=False)
        cum.setflags(write=False)
        return cls(pts, cum)

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    @property
    def start(self) -> np.ndarray:
        return self.waypoints[0].copy()

    @property
    def goal(self) -> np.ndarray:
        return self.waypoints[-1].copy()

    def eval(self, s: float) -> np.ndarray:
        s = min(max(float(s), 0.0), 1.0)
        total = self.length
        if total <= 0.0:
            return self.waypoints[0].copy()
        if s >= 1.0:
            return self.waypoints[-1].copy()
        target = s * total
        k = int(np.searchsorted(self.arclength, target, side="right")) - 1
        k = min(max(k, 0), len(self.waypoints) - 2)
        seg = self.arclength[k + 1] - self.arclength[k]
        t = 0.0 if seg <= 0.0 else (target - self.arclength[k]) / seg
        return self.waypoints[k] + t * (self.waypoints[k + 1] - self.waypoints[k])

    def project(self, point) -> tuple[float, float]:
        """(parameter, distance) of the nearest point; first minimizer on ties."""
        p = np.asarray(point, dtype=float)
        a = self.waypoints[:-1]
        e = self.waypoints[1:] - a
        ee = np.einsum("ij,ij->i", e, e)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(ee > 0, np.einsum("ij,ij->i", p - a, e) / ee, 0.0)
        t = np.clip(t, 0.0, 1.0)
        c = a + t[:, None] * e
        d = np.hypot(*(c - p).T)
        k = int(np.argmin(d))
        if self.length <= 0.0:
            return 0.0, float(d[k])
        s = (self.arclength[k] + t[k] * math.sqrt(ee[k])) / self.length
        return float(min(max(s, 0.0), 1.0)), float(d[k])

    def distance(self, point) -> float:
        return self.project(point)[1]


@dataclass(frozen=True)
class GovernorState:
    g: float = 0.0
    k_gov: float = 1.0
    zeta: int = 2

    def __post_init__(self):
        if not 0.0 <= self.g <= 1.0:
            raise ValueError("governor progress g must lie in [0, 1]")
        if not self.k_gov > 0.0:
            raise ValueError("k_gov must be positive")
        if int(self.zeta) != self.zeta or self.zeta < 1:
            raise ValueError("zeta must be a positive integer")


def governor_rate(gov: GovernorState, robot_pos, path: Path) -> float:
    gap = float(np.hypot(*(np.asarray(robot_pos, dtype=float) - path.eval(gov.g))))
    return gov.k_gov * (1.0 - gov.g**gov.zeta) / (1.0 + gap)


def governor_step(gov: GovernorState, robot_pos, path: Path, dt: float) -> GovernorState:
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    g = gov.g + dt * governor_rate(gov, robot_pos, path)
    return replace(gov, g=min(max(g, 0.0), 1.0))


def governor_lyapunov(gov: GovernorState) -> float:
    return 0.5 * (1.0 - gov.g) ** 2


def rebase_governor(
    gov: GovernorState, new_path: Path, anchor, robot_pos=None, max_lead: float = math.inf
) -> GovernorState:
    """Re-seat progress on a new path at the projection of ``anchor``.

    The harness passes the previous reference point so progress carries over
    across replans. With ``robot_pos`` given, the reference is kept at most
    ``max_lead`` meters of arc length ahead of the robot's own projection.
    """
    s, _ = new_path.project(anchor)
    if robot_pos is not None and new_path.length > 0.0:
        s_robot, _ = new_path.project(robot_pos)
        s = min(s, s_robot + max_lead / new_path.length)
    return replace(gov, g=min(max(s, 0.0), 1.0))
