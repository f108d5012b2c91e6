"""Uncertainty samples of the barrier constraint and the distributionally robust rows.

A sample xi = [L_f h, L_g h (m entries), alpha_h(h), dh/dt] makes the barrier
condition linear in the control: CBC(u) = [1, u, 1, 1] . xi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .dynamics import Control, ControlAffineModel, unicycle_model
from .geometry import PackedShape, Pose2, Shape, _packed, sdf_batch

_UNICYCLE = unicycle_model()


@dataclass(frozen=True)
class UncertaintySample:
    lie_coeffs: np.ndarray
    alpha_h_of_h: float
    dh_dt: float
    h: float = math.nan

    @property
    def m(self) -> int:
        return int(self.lie_coeffs.shape[0]) - 1

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.lie_coeffs, [self.alpha_h_of_h, self.dh_dt]])

    @classmethod
    def from_vector(cls, xi, h: float = math.nan) -> "UncertaintySample":
        xi = np.asarray(xi, dtype=float)
        return cls(xi[:-2].copy(), float(xi[-2]), float(xi[-1]), h)


@dataclass(frozen=True)
class AmbiguityConfig:
    radius_r: float = 0.05
    epsilon: float = 0.1
    sample_count_N: int = 5

    def __post_init__(self):
        if not self.radius_r >= 0.0:
            raise ValueError("Wasserstein radius must be nonnegative")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if int(self.sample_count_N) != self.sample_count_N or self.sample_count_N < 1:
            raise ValueError("sample count N must be a positive integer")


@dataclass(frozen=True)
class ObstaclePoint:
    position: np.ndarray
    velocity: np.ndarray

    def __init__(self, position, velocity=(0.0, 0.0)):
        p = np.asarray(position, dtype=float).reshape(2)
        v = np.asarray(velocity, dtype=float).reshape(2)
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(v))):
            raise ValueError("obstacle point must be finite")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "velocity", v)


class PointCloud(NamedTuple):
    """Array form of a list of obstacle points: positions and velocities ``(K, 2)``."""

    positions: np.ndarray
    velocities: np.ndarray

    @classmethod
    def from_points(cls, points: Sequence[ObstaclePoint] | "PointCloud") -> "PointCloud":
        if isinstance(points, PointCloud):
            return points
        pts = list(points)
        if not pts:
            return cls(np.zeros((0, 2)), np.zeros((0, 2)))
        return cls(np.array([p.position for p in pts]), np.array([p.velocity for p in pts]))

    def __len__(self) -> int:
        return int(self.positions.shape[0])


class Selection(NamedTuple):
    samples: list[UncertaintySample]
    short: bool


@dataclass(frozen=True)
class DrConstraintRows:
    """Rows ``A z <= b`` over ``z = [u (m), delta, s, beta (N), t_inf]``."""

    A: np.ndarray
    b: np.ndarray
    m: int
    n_samples: int

    @property
    def dim(self) -> int:
        return self.m + 3 + self.n_samples

    # variable offsets
    @property
    def i_delta(self) -> int:
        return self.m

    @property
    def i_s(self) -> int:
        return self.m + 1

    @property
    def i_beta(self) -> slice:
        return slice(self.m + 2, self.m + 2 + self.n_samples)

    @property
    def i_t(self) -> int:
        return self.m + 2 + self.n_samples


# ---------------------------------------------------------------------------
# sample construction
# ---------------------------------------------------------------------------


def sample_matrix(
    shape: Shape | PackedShape,
    pose: Pose2,
    positions: np.ndarray,
    velocities: np.ndarray,
    alpha_h_gain: float,
    model: ControlAffineModel = _UNICYCLE,
) -> tuple[np.ndarray, np.ndarray]:
    """Stacked samples ``(K, m + 3)`` and barrier values ``(K,)`` for one pose."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    velocities = np.asarray(velocities, dtype=float).reshape(-1, 2)
    x = pose.as_array()
    R = model.rotation(x)
    rel = positions - model.position(x)
    body = rel @ R  # R^T (q - p) per row
    h, gb = sdf_batch(shape, body)
    grad_q = gb @ R.T  # R g_b, gradient w.r.t. the world point
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    dRt = np.array([[-s, c], [-c, -s]])
    dh_dth = np.einsum("ij,ij->i", gb, rel @ dRt.T)
    grad_x = np.zeros((h.shape[0], model.n))
    grad_x[:, 0:2] = -grad_q
    if model.angle_index is not None:
        grad_x[:, model.angle_index] = dh_dth
    lie = grad_x @ model.F(x)
    xi = np.column_stack([lie, alpha_h_gain * h, np.einsum("ij,ij->i", grad_q, velocities)])
    return xi, h


def build_sample(shape: Shape, pose_sample: Pose2, point: ObstaclePoint, alpha_h_gain: float) -> UncertaintySample:
    xi, h = sample_matrix(shape, pose_sample, point.position[None], point.velocity[None], alpha_h_gain)
    return UncertaintySample.from_vector(xi[0], float(h[0]))


def cbc_eval(sample: UncertaintySample, control) -> float:
    u = control.as_array() if isinstance(control, Control) else np.asarray(control, dtype=float)
    return float(sample.lie_coeffs[0] + sample.lie_coeffs[1:] @ u + sample.alpha_h_of_h + sample.dh_dt)


def cbc_batch(xi: np.ndarray, u) -> np.ndarray:
    """CBC of every row of a sample matrix at control ``u``."""
    u = np.asarray(u, dtype=float)
    m = u.shape[0]
    return xi[:, 0] + xi[:, 1 : 1 + m] @ u + xi[:, m + 1] + xi[:, m + 2]


def candidate_matrix(
    points, shape: Shape | PackedShape, pose_samples: Sequence[Pose2], alpha_h_gain: float
) -> tuple[np.ndarray, np.ndarray]:
    """Aggregated candidates over M poses times K points, pose-major."""
    cloud = PointCloud.from_points(points)
    packed = _packed(shape)
    xis, hs = [], []
    for pose in pose_samples:
        xi, h = sample_matrix(packed, pose, cloud.positions, cloud.velocities, alpha_h_gain)
        xis.append(xi)
        hs.append(h)
    if not xis or len(cloud) == 0:
        return np.zeros((0, 5)), np.zeros(0)
    return np.concatenate(xis), np.concatenate(hs)


def select_rows(xi: np.ndarray, h: np.ndarray, n: int) -> np.ndarray:
    """Indices of the ``n`` lowest ``dh_dt + alpha_h(h)`` rows.

    Ties go to lower h, then to the lower candidate index.
    """
    score = xi[:, -1] + xi[:, -2]
    order = np.lexsort((np.arange(h.shape[0]), h, score))
    return order[:n]


def select_samples(points, shape: Shape, pose_samples: Sequence[Pose2], alpha_h_gain: float, N: int) -> Selection:
    if len(pose_samples) < 1:
        raise ValueError("need at least one pose sample")
    xi, h = candidate_matrix(points, shape, pose_samples, alpha_h_gain)
    idx = select_rows(xi, h, N)
    samples = [UncertaintySample.from_vector(xi[i], float(h[i])) for i in idx]
    return Selection(samples, len(samples) < N)


# ---------------------------------------------------------------------------
# ambiguity radius and CVaR
# ---------------------------------------------------------------------------


def wasserstein_radius(N: int, epsilon_bar: float, c1: float = 1.0, c2: float = 1.0, dim_k: int = 5, rho: float = 2.0) -> float:
    if not 0.0 < epsilon_bar < 1.0:
        raise ValueError("epsilon_bar must lie in (0, 1)")
    if min(N, c1, c2, dim_k, rho) <= 0:
        raise ValueError("N, c1, c2, dim_k and rho must be positive")
    logterm = math.log(c1 / epsilon_bar)
    base = max(logterm, 0.0) / (c2 * N)
    if N >= logterm / c2:
        return base ** (1.0 / max(dim_k, 2))
    return base ** (1.0 / rho)


def cvar_empirical(values, epsilon: float) -> float:
    """Empirical CVaR at level 1 - epsilon of a loss sample (upper tail)."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("need at least one value")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    s = -v
    obj = np.mean(np.maximum(v[None, :] + s[:, None], 0.0), axis=1) / epsilon - s
    return float(np.min(obj))


def dr_margin(samples: Sequence[UncertaintySample] | np.ndarray, u, config: AmbiguityConfig) -> float:
    """Left side of the sample-average DR condition; safe when <= 0.

    r * max(1, |u|_inf) + inf_s [ mean((s - CBC_i)_+) - s * eps ]
    """
    xi = _as_matrix(samples)
    u = np.asarray(u, dtype=float)
    c = cbc_batch(xi, u)
    # piecewise linear and convex in s with kinks at CBC_i
    inner = np.mean(np.maximum(c[:, None] - c[None, :], 0.0), axis=1)
    val = np.min(inner - c * config.epsilon)
    return float(config.radius_r * max(1.0, float(np.max(np.abs(u)))) + val)


def _as_matrix(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        return np.atleast_2d(samples)
    return np.array([s.as_vector() for s in samples])


# ---------------------------------------------------------------------------
# constraint rows
# ---------------------------------------------------------------------------


def dr_constraint_rows(samples: Sequence[UncertaintySample] | np.ndarray, config: AmbiguityConfig) -> DrConstraintRows:
    xi = _as_matrix(samples)
    n = xi.shape[0] if xi.size else 0
    if n == 0:
        raise ValueError("no safety samples")
    m = xi.shape[1] - 3
    dim = m + 3 + n
    i_s, i_b, i_t = m + 1, m + 2, m + 2 + n
    rows = 2 * m + 2 + 2 * n
    A = np.zeros((rows, dim))
    b = np.zeros(rows)
    r = 0
    # t >= 1, t >= u_j, t >= -u_j
    A[r, i_t] = -1.0
    b[r] = -1.0
    r += 1
    for j in range(m):
        A[r, j] = 1.0
        A[r, i_t] = -1.0
        A[r + 1, j] = -1.0
        A[r + 1, i_t] = -1.0
        r += 2
    # r t - s eps + mean(beta) <= 0
    A[r, i_t] = config.radius_r
    A[r, i_s] = -config.epsilon
    A[r, i_b : i_b + n] = 1.0 / n
    r += 1
    # s - CBC_i(u) - beta_i <= 0
    for i in range(n):
        A[r, :m] = -xi[i, 1 : 1 + m]
        A[r, i_s] = 1.0
        A[r, i_b + i] = -1.0
        b[r] = xi[i, 0] + xi[i, m + 1] + xi[i, m + 2]
        r += 1
    for i in range(n):
        A[r, i_b + i] = -1.0
        r += 1
    return DrConstraintRows(A, b, m, n)
