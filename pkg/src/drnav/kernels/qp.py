"""Dense primal-dual interior-point kernel for small convex QPs.

Solves ``min 0.5 z'Pz + q'z  s.t.  Az <= b`` with Mehrotra predictor-corrector
steps on the slack form ``Az + w = b, w >= 0``. The same source runs compiled
under numba or as plain numpy.

Status codes: 0 optimal, 1 primal infeasible, 2 iteration cap.
"""

from __future__ import annotations

import numpy as np

from .._jit import njit

OPTIMAL = 0
INFEASIBLE = 1
MAX_ITER = 2

_REG = 1e-11
_CERT_TOL = 1e-9


@njit
def _max_step(v, dv):
    a = 1.0
    for i in range(v.shape[0]):
        if dv[i] < 0.0:
            r = -v[i] / dv[i]
            if r < a:
                a = r
    return a


@njit
def kkt_residuals(P, q, A, b, z, y):
    """(primal violation, stationarity, complementarity) at ``(z, y)``."""
    slack = b - A @ z
    pres = 0.0
    comp = 0.0
    for i in range(slack.shape[0]):
        if -slack[i] > pres:
            pres = -slack[i]
        c = abs(y[i] * slack[i])
        if c > comp:
            comp = c
    rd = P @ z + q + A.T @ y
    dres = 0.0
    for j in range(rd.shape[0]):
        if abs(rd[j]) > dres:
            dres = abs(rd[j])
    return pres, dres, comp


@njit
def ipm_solve(P, q, A, b, tol, max_iter):
    n = q.shape[0]
    m = b.shape[0]
    eye = np.eye(n)
    z = np.zeros(n)
    if m == 0:
        z = np.linalg.solve(P + _REG * eye, -q)
        return z, np.zeros(0), OPTIMAL, 0
    w = np.maximum(b - A @ z, 1.0)
    y = np.ones(m)
    # best iterate seen, returned if the iteration stalls in floating point
    best_z = z.copy()
    best_y = y.copy()
    best = np.inf
    for it in range(max_iter):
        rd = P @ z + q + A.T @ y
        rp = A @ z + w - b
        mu = np.dot(w, y) / m

        pres, dres, comp = kkt_residuals(P, q, A, b, z, y)
        rpn = np.max(np.abs(rp))
        merit = max(max(pres, dres), max(comp, rpn))
        if merit < best:
            best = merit
            best_z[:] = z
            best_y[:] = y
        if merit <= tol:
            return z, y, OPTIMAL, it
        if mu < 1e-30 or np.min(w) < 1e-200:
            break

        # Farkas direction: y >= 0, A'y ~ 0, b'y < 0 certifies Az <= b is empty
        ymax = np.max(y)
        if ymax > 1e3:
            yh = y / ymax
            aty = np.max(np.abs(A.T @ yh))
            if aty <= _CERT_TOL * ymax ** 0.5 and np.dot(b, yh) < -1e3 * aty - 1e-12:
                return z, y, INFEASIBLE, it
            if ymax > 1e14:
                return z, y, INFEASIBLE, it

        d = y / w
        H = P + A.T @ (A * d.reshape(-1, 1)) + _REG * eye

        # predictor
        rc = w * y
        rhs = -rd - A.T @ ((-rc + y * rp) / w)
        dz = np.linalg.solve(H, rhs)
        dw = -rp - A @ dz
        dy = (-rc - y * dw) / w
        a_p = _max_step(w, dw)
        a_d = _max_step(y, dy)
        mu_aff = np.dot(w + a_p * dw, y + a_d * dy) / m
        sigma = (mu_aff / mu) ** 3
        if sigma > 1.0:
            sigma = 1.0

        # corrector
        rc = w * y + dw * dy - sigma * mu
        rhs = -rd - A.T @ ((-rc + y * rp) / w)
        dz = np.linalg.solve(H, rhs)
        dw = -rp - A @ dz
        dy = (-rc - y * dw) / w
        a = min(1.0, 0.995 * min(_max_step(w, dw), _max_step(y, dy)))
        z = z + a * dz
        w = w + a * dw
        y = y + a * dy
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(y)) and np.all(np.isfinite(w))):
            break
    if best <= tol:
        return best_z, best_y, OPTIMAL, it
    return best_z, best_y, MAX_ITER, it
