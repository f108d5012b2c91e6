"""Dense convex QP solver: min 0.5 z'Pz + q'z subject to Az <= b."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .kernels.qp import INFEASIBLE, MAX_ITER, OPTIMAL


class QpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITERATIONS = "max-iterations"


_STATUS = {OPTIMAL: QpStatus.OPTIMAL, INFEASIBLE: QpStatus.INFEASIBLE, MAX_ITER: QpStatus.MAX_ITERATIONS}


@dataclass(frozen=True)
class QuadraticProgram:
    P: np.ndarray
    q: np.ndarray
    A: np.ndarray
    b: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        P = np.ascontiguousarray(np.asarray(self.P, dtype=float))
        q = np.ascontiguousarray(np.asarray(self.q, dtype=float).ravel())
        d = q.shape[0]
        A = np.ascontiguousarray(np.asarray(self.A, dtype=float).reshape(-1, d))
        b = np.ascontiguousarray(np.asarray(self.b, dtype=float).ravel())
        if P.shape != (d, d):
            raise ValueError(f"P must be {d}x{d}, got {P.shape}")
        if A.shape[0] != b.shape[0]:
            raise ValueError("A and b row counts differ")
        if not np.allclose(P, P.T, rtol=0.0, atol=1e-12):
            raise ValueError("P must be symmetric")
        for name, arr in (("P", P), ("q", q), ("A", A), ("b", b)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return int(self.q.shape[0])

    @property
    def rows(self) -> int:
        return int(self.b.shape[0])

    def objective(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(0.5 * z @ self.P @ z + self.q @ z + self.constant)


@dataclass(frozen=True)
class QpSolution:
    z: np.ndarray
    objective_value: float
    status: QpStatus
    kkt_residuals: tuple[float, float, float]
    multipliers: np.ndarray
    iterations: int

    @property
    def optimal(self) -> bool:
        return self.status is QpStatus.OPTIMAL


def _polish(qp: QuadraticProgram, z, y, tol: float, rounds: int = 12):
    """Re-solve the equality system on the guessed active set.

    Interior-point iterates stop slightly inside the feasible set; solving the
    KKT system of the active rows removes that offset. The guess is repaired
    one row at a time: drop the most negative multiplier, else add the most
    violated row.
    Returns None unless the polished point passes every KKT check at ``tol``.
    """
    d = qp.dim
    slack = qp.b - qp.A @ z
    active = y > np.maximum(slack, 0.0)
    for _ in range(rounds):
        idx = np.flatnonzero(active)
        k = idx.size
        K = np.zeros((d + k, d + k))
        K[:d, :d] = qp.P
        K[:d, d:] = qp.A[idx].T
        K[d:, :d] = qp.A[idx]
        sol = np.linalg.lstsq(K, np.concatenate([-qp.q, qp.b[idx]]), rcond=None)[0]
        if not np.all(np.isfinite(sol)):
            return None
        zp = sol[:d]
        yp = np.zeros(qp.rows)
        yp[idx] = sol[d:]
        excess = qp.A @ zp - qp.b
        if yp.min(initial=0.0) < -tol:
            active[int(np.argmin(yp))] = False
        elif excess.max(initial=0.0) > tol:
            active[int(np.argmax(excess))] = True
        else:
            yp = np.maximum(yp, 0.0)
            res = kernels.kkt_residuals(qp.P, qp.q, qp.A, qp.b, zp, yp)
            return (zp, yp, res) if max(res) <= tol else None
    return None


def solve(qp: QuadraticProgram, tol: float = 1e-7, max_iter: int = 2000) -> QpSolution:
    """Interior-point solve; ``status`` reports optimal, infeasible or the iteration cap."""
    # row scaling keeps the KKT system balanced without changing the feasible set
    norms = np.sqrt(np.einsum("ij,ij->i", qp.A, qp.A))
    scale = np.where(norms > 0.0, 1.0 / np.maximum(norms, 1e-300), 1.0)
    A = qp.A * scale[:, None]
    b = qp.b * scale
    zero_rows = norms == 0.0
    if np.any(zero_rows & (qp.b < 0.0)):
        z = np.zeros(qp.dim)
        return QpSolution(z, qp.objective(z), QpStatus.INFEASIBLE, (float(-qp.b.min()), np.inf, np.inf), np.zeros(qp.rows), 0)
    keep = ~zero_rows
    z, y, code, it = kernels.ipm_solve(qp.P, qp.q, np.ascontiguousarray(A[keep]), np.ascontiguousarray(b[keep]), tol, max_iter)
    mult = np.zeros(qp.rows)
    mult[keep] = y * scale[keep]
    res = kernels.kkt_residuals(qp.P, qp.q, qp.A, qp.b, z, mult)
    status = _STATUS[int(code)]
    if status is not QpStatus.INFEASIBLE:
        polished = _polish(qp, z, mult, tol)
        if polished is not None:
            z, mult, res = polished
            status = QpStatus.OPTIMAL
    if status is QpStatus.OPTIMAL and max(res) > tol:
        status = QpStatus.MAX_ITERATIONS
    return QpSolution(z, qp.objective(z), status, tuple(float(r) for r in res), mult, int(it))
