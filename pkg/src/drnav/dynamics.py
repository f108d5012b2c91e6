"""Control-affine models and fixed-step integration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import Pose2, rotation, wrap_angle

DEFAULT_DT = 0.02


@dataclass(frozen=True)
class Control:
    v: float
    omega: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.omega])


@dataclass(frozen=True)
class ControlAffineModel:
    """xdot = f(x) + g(x) u, plus the maps used to place the body in the plane."""

    n: int
    m: int
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    position: Callable[[np.ndarray], np.ndarray]
    rotation: Callable[[np.ndarray], np.ndarray]
    angle_index: int | None = None

    def F(self, x) -> np.ndarray:
        """Stacked [f(x) g(x)], shape (n, m + 1)."""
        x = np.asarray(x, dtype=float)
        return np.column_stack([self.f(x), self.g(x)])

    def xdot(self, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.f(x) + self.g(x) @ np.asarray(u, dtype=float)


def _unicycle_f(x):
    return np.zeros(3)


def _unicycle_g(x):
    c, s = np.cos(x[2]), np.sin(x[2])
    return np.array([[c, 0.0], [s, 0.0], [0.0, 1.0]])


def unicycle_model() -> ControlAffineModel:
    return ControlAffineModel(
        n=3,
        m=2,
        f=_unicycle_f,
        g=_unicycle_g,
        position=lambda x: np.asarray(x[:2], dtype=float),
        rotation=lambda x: rotation(float(x[2])),
        angle_index=2,
    )


def step_rk4(model: ControlAffineModel, state, control, dt: float = DEFAULT_DT):
    """One RK4 step with ``control`` held constant.

    ``state`` may be an array or a :class:`Pose2`; the return type matches.
    """
    if not (0.0 < dt <= 0.1):
        raise ValueError(f"dt must lie in (0, 0.1], got {dt}")
    as_pose = isinstance(state, Pose2)
    x = state.as_array() if as_pose else np.asarray(state, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite state")
    u = control.as_array() if isinstance(control, Control) else np.asarray(control, dtype=float)
    k1 = model.xdot(x, u)
    k2 = model.xdot(x + 0.5 * dt * k1, u)
    k3 = model.xdot(x + 0.5 * dt * k2, u)
    k4 = model.xdot(x + dt * k3, u)
    out = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if model.angle_index is not None:
        out[model.angle_index] = wrap_angle(out[model.angle_index])
    if as_pose:
        return Pose2.from_array(out)
    return out


def unicycle_arc(state, control, t: float) -> np.ndarray:
    """Closed-form pose after driving a constant twist for ``t`` seconds."""
    x, y, th = np.asarray(state, dtype=float)
    v, w = (control.v, control.omega) if isinstance(control, Control) else control
    if abs(w) < 1e-12:
        return np.array([x + v * t * np.cos(th), y + v * t * np.sin(th), wrap_angle(th)])
    th1 = th + w * t
    return np.array(
        [x + v / w * (np.sin(th1) - np.sin(th)), y - v / w * (np.cos(th1) - np.cos(th)), wrap_angle(th1)]
    )
