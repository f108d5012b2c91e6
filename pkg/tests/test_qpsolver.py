import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drnav.qpsolver import QpStatus, QuadraticProgram, solve


def test_clamped_scalar():
    # (z - 1)^2 = 0.5 * 2 z^2 - 2 z + 1
    sol = solve(QuadraticProgram([[2.0]], [-2.0], [[1.0]], [0.0], constant=1.0))
    assert sol.optimal
    assert sol.z[0] == pytest.approx(0.0, abs=1e-7)
    assert sol.objective_value == pytest.approx(1.0, abs=1e-6)


def test_unconstrained():
    sol = solve(QuadraticProgram(np.eye(3), np.zeros(3), np.zeros((0, 3)), np.zeros(0)))
    assert sol.optimal
    np.testing.assert_allclose(sol.z, 0.0, atol=1e-9)


def test_infeasible_detected():
    sol = solve(QuadraticProgram([[2.0]], [0.0], [[1.0], [-1.0]], [-1.0, -1.0]))
    assert sol.status is QpStatus.INFEASIBLE
    zero_row = solve(QuadraticProgram([[2.0]], [0.0], [[0.0]], [-1.0]))
    assert zero_row.status is QpStatus.INFEASIBLE


def test_single_sample_cbc_against_grid():
    # CBC(u) = 0.5 - 1.0 u1 + 0.2 u2 is violated at the nominal (1.2, 0)
    lam = 50.0
    P = np.diag([2.0, 2.0, 2 * lam])
    q = np.array([-2.4, 0.0, 0.0])
    A = np.array([[1.0, -0.2, 0.0]])
    b = np.array([0.5])
    sol = solve(QuadraticProgram(P, q, A, b))
    lo, hi, step = np.array([-2.0, -2.0]), np.array([2.0, 2.0]), 1e-2
    best = None
    for _ in range(3):
        g1 = np.arange(lo[0], hi[0] + step / 2, step)
        g2 = np.arange(lo[1], hi[1] + step / 2, step)
        U1, U2 = np.meshgrid(g1, g2, indexing="ij")
        f = (U1 - 1.2) ** 2 + U2**2
        f[U1 - 0.2 * U2 > 0.5] = np.inf
        i, j = np.unravel_index(np.argmin(f), f.shape)
        best = np.array([U1[i, j], U2[i, j]])
        lo, hi, step = best - 10 * step, best + 10 * step, step / 10
    assert np.max(np.abs(sol.z[:2] - best)) <= 2e-3


def test_validation():
    with pytest.raises(ValueError):
        QuadraticProgram(np.eye(2), np.zeros(3), np.zeros((0, 3)), np.zeros(0))
    with pytest.raises(ValueError):
        QuadraticProgram([[1.0, 1.0], [0.0, 1.0]], np.zeros(2), np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError):
        QuadraticProgram(np.eye(1), [np.nan], np.zeros((0, 1)), np.zeros(0))
    with pytest.raises(ValueError):
        QuadraticProgram(np.eye(1), [0.0], [[1.0]], [0.0, 1.0])


def _random_qp(rng):
    d = int(rng.integers(1, 7))
    r = int(rng.integers(1, 13))
    M = rng.normal(size=(d, d))
    P = M @ M.T + 0.1 * np.eye(d)
    q = rng.normal(size=d) * 3
    A = rng.normal(size=(r, d))
    z0 = rng.normal(size=d)
    b = A @ z0 + rng.uniform(0.0, 1.0, r)
    return QuadraticProgram(P, q, A, b)


def _active_set_oracle(qp):
    d = qp.dim
    best = np.inf
    for k in range(0, min(d, qp.rows) + 1):
        for S in itertools.combinations(range(qp.rows), k):
            S = list(S)
            K = np.zeros((d + k, d + k))
            K[:d, :d] = qp.P
            K[:d, d:] = qp.A[S].T
            K[d:, :d] = qp.A[S]
            rhs = np.concatenate([-qp.q, qp.b[S]])
            try:
                z = np.linalg.solve(K, rhs)[:d]
            except np.linalg.LinAlgError:
                continue
            if np.all(qp.A @ z <= qp.b + 1e-9):
                best = min(best, qp.objective(z))
    return best


def test_matches_active_set_enumeration():
    rng = np.random.default_rng(7)
    for _ in range(200):
        qp = _random_qp(rng)
        sol = solve(qp)
        assert sol.optimal
        assert sol.objective_value == pytest.approx(_active_set_oracle(qp), abs=1e-6)


def _kkt_ok(qp, sol, tol=1e-6):
    z, y = sol.z, sol.multipliers
    stat = qp.P @ z + qp.q + qp.A.T @ y
    slack = qp.b - qp.A @ z
    return (
        np.max(np.abs(stat), initial=0.0) <= tol
        and np.min(slack, initial=0.0) >= -tol
        and np.min(y, initial=0.0) >= -tol
        and np.max(np.abs(y * slack), initial=0.0) <= tol
    )


@given(st.integers(0, 2**31))
def test_kkt_holds_on_optimal_return(seed):
    qp = _random_qp(np.random.default_rng(seed))
    sol = solve(qp)
    assert sol.optimal
    assert max(sol.kkt_residuals) <= 1e-7
    assert _kkt_ok(qp, sol)


@given(st.integers(0, 2**31), st.floats(0.01, 100.0), st.floats(0.01, 100.0))
def test_argmin_invariant_to_scaling(seed, c_obj, c_rows):
    qp = _random_qp(np.random.default_rng(seed))
    base = solve(qp)
    scaled = solve(QuadraticProgram(c_obj * qp.P, c_obj * qp.q, c_rows * qp.A, c_rows * qp.b))
    assert scaled.optimal
    np.testing.assert_allclose(scaled.z, base.z, atol=1e-5)
