"""Jerk-minimizing polynomial spline through planned viewpoints.

Each segment is a degree-K polynomial in local time ``tau - t_{i-1}``. The
cost is integrated squared jerk plus a soft penalty pulling the spline through
every knot's viewpoint; the initial state is fixed and position, velocity and
acceleration are continuous across interior knots. With only equality
constraints the QP reduces to one KKT linear solve shared by the three axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray


class SingularSystemError(np.linalg.LinAlgError):
    pass


def _deriv_basis(K: int, tau: float, order: int) -> NDArray[np.float64]:
    """Row ``b`` with ``b @ coeffs`` = d^order/dtau^order of sum_k c_k tau^k."""
    b = np.zeros(K + 1)
    for k in range(order, K + 1):
        b[k] = math.perm(k, order) * tau ** (k - order)
    return b


def jerk_gram(K: int, T: float) -> NDArray[np.float64]:
    """``Q`` with ``c @ Q @ c`` = integral over [0, T] of (third derivative)^2."""
    Q = np.zeros((K + 1, K + 1))
    for j in range(3, K + 1):
        for k in range(3, K + 1):
            p = j + k - 5
            Q[j, k] = math.perm(j, 3) * math.perm(k, 3) * T**p / p
    return Q


@dataclass(frozen=True)
class QpProblem:
    """Equality-constrained QP ``min 1/2 c'Pc + q'c + r  s.t.  A c = b``.

    One column of ``q``, ``r`` and ``b`` per axis; ``P`` and ``A`` are shared.
    Unknowns are stacked segment-major: ``c[i*(K+1) + k]``.
    """

    P: NDArray[np.float64]
    q: NDArray[np.float64]  # (n, 3)
    r: NDArray[np.float64]  # (3,)
    A: NDArray[np.float64]
    b: NDArray[np.float64]  # (m, 3)
    times: NDArray[np.float64]
    K: int
    rho: float
    waypoints: NDArray[np.float64]

    @property
    def n_segments(self) -> int:
        return len(self.times) - 1

    def objective(self, c: ArrayLike, axis: Optional[int] = None) -> float:
        """Objective value; ``c`` is (n,) for one axis or (n, 3) summed over axes."""
        c = np.asarray(c, dtype=np.float64)
        if c.ndim == 1:
            a = 0 if axis is None else axis
            return float(0.5 * c @ self.P @ c + self.q[:, a] @ c + self.r[a])
        return float(sum(0.5 * c[:, a] @ self.P @ c[:, a] + self.q[:, a] @ c[:, a] + self.r[a] for a in range(3)))

    def gradient(self, c: ArrayLike) -> NDArray[np.float64]:
        c = np.asarray(c, dtype=np.float64)
        return self.P @ c + (self.q if c.ndim == 2 else self.q[:, 0])


def build_qp(waypoints: ArrayLike, times: ArrayLike, init: Sequence[ArrayLike], K: int = 5,
             rho: float = 100.0) -> QpProblem:
    """Assemble the spline QP.

    ``waypoints`` holds the N viewpoints for knots ``t_1..t_N``; ``init`` is
    ``(position, velocity, acceleration)`` at ``t_0``.
    """
    wp = np.asarray(waypoints, dtype=np.float64).reshape(-1, 3)
    t = np.asarray(times, dtype=np.float64).reshape(-1)
    N = len(t) - 1
    if N < 1 or len(wp) != N:
        raise ValueError(f"need N+1 times for N waypoints, got {len(t)} times and {len(wp)} waypoints")
    if np.any(np.diff(t) <= 0):
        raise ValueError("knot times must be strictly increasing")
    if K < 5:
        raise ValueError("polynomial order K must be >= 5")
    if not rho > 0:
        raise ValueError("rho must be positive")
    m = K + 1
    n = N * m
    dt = np.diff(t)

    P = np.zeros((n, n))
    q = np.zeros((n, 3))
    r = np.zeros(3)
    for i in range(N):
        s = slice(i * m, (i + 1) * m)
        P[s, s] += 2.0 * jerk_gram(K, dt[i])
        e = _deriv_basis(K, dt[i], 0)
        P[s, s] += 2.0 * rho * np.outer(e, e)
        q[s, :] += -2.0 * rho * np.outer(e, wp[i])
        r += rho * wp[i] ** 2
    P = 0.5 * (P + P.T)

    rows = []
    rhs = []
    init = [np.asarray(x, dtype=np.float64).reshape(3) for x in init]
    for d in range(3):
        row = np.zeros(n)
        row[:m] = _deriv_basis(K, 0.0, d)
        rows.append(row)
        rhs.append(init[d])
    for i in range(N - 1):
        for d in range(3):
            row = np.zeros(n)
            row[i * m:(i + 1) * m] = _deriv_basis(K, dt[i], d)
            row[(i + 1) * m:(i + 2) * m] = -_deriv_basis(K, 0.0, d)
            rows.append(row)
            rhs.append(np.zeros(3))
    return QpProblem(P, q, r, np.array(rows), np.array(rhs), t, K, float(rho), wp)


@dataclass(frozen=True)
class SplineTrajectory:
    times: NDArray[np.float64]  # (N+1,)
    coeffs: NDArray[np.float64]  # (N, K+1, 3), local time per segment

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def K(self) -> int:
        return self.coeffs.shape[1] - 1

    def segment(self, t: float) -> int:
        if not (self.times[0] - 1e-12 <= t <= self.times[-1] + 1e-12):
            raise ValueError(f"t={t} outside [{self.times[0]}, {self.times[-1]}]")
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(max(i, 0), len(self.coeffs) - 1)

    def eval_segment(self, i: int, tau: float, order: int = 0) -> NDArray[np.float64]:
        return _deriv_basis(self.K, tau, order) @ self.coeffs[i]

    def __call__(self, t: float, order: int = 0) -> NDArray[np.float64]:
        return eval_spline(self, t, order)

    def flat_coeffs(self) -> NDArray[np.float64]:
        return self.coeffs.reshape(-1, 3)


def eval_spline(traj: SplineTrajectory, t: float, order: int = 0) -> NDArray[np.float64]:
    """Position (order 0) or its derivative up to order 3 at global time ``t``."""
    if order not in (0, 1, 2, 3):
        raise ValueError("order must be 0..3")
    i = traj.segment(t)
    return traj.eval_segment(i, float(t) - float(traj.times[i]), order)


def solve_kkt(problem: QpProblem, joint: bool = False, rtol: float = 1e-8) -> NDArray[np.float64]:
    """Stacked coefficients (n, 3) from the first-order optimality system.

    ``joint`` solves one block system over all three axes instead of three
    right-hand sides of the shared per-axis system.
    """
    P, A = problem.P, problem.A
    n, m = P.shape[0], A.shape[0]
    if joint:
        I3 = np.eye(3)
        PP, AA = np.kron(I3, P), np.kron(I3, A)
        KKT = np.block([[PP, AA.T], [AA, np.zeros((3 * m, 3 * m))]])
        rhs = np.concatenate([-problem.q.T.reshape(-1), problem.b.T.reshape(-1)])
    else:
        KKT = np.block([[P, A.T], [A, np.zeros((m, m))]])
        rhs = np.vstack([-problem.q, problem.b])
    cond = np.linalg.cond(KKT)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularSystemError(f"optimality system is singular (cond={cond:.3g})")
    sol = np.linalg.solve(KKT, rhs)
    resid = np.linalg.norm(KKT @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if resid > rtol and np.linalg.norm(rhs) > 0:
        raise SingularSystemError(f"optimality system residual {resid:.3g} exceeds {rtol}")
    if joint:
        return sol[:3 * n].reshape(3, n).T
    return sol[:n]


def solve_spline(problem: QpProblem, joint: bool = False) -> SplineTrajectory:
    c = solve_kkt(problem, joint=joint)
    N, m = problem.n_segments, problem.K + 1
    return SplineTrajectory(problem.times.copy(), c.reshape(N, m, 3))


def plan_spline(waypoints, times, init, K: int = 5, rho: float = 100.0) -> tuple[SplineTrajectory, float]:
    """Build and solve; returns the trajectory and its objective value."""
    qp = build_qp(waypoints, times, init, K, rho)
    traj = solve_spline(qp)
    return traj, qp.objective(traj.flat_coeffs())


def waypoint_error(traj: SplineTrajectory, waypoints: ArrayLike) -> float:
    """Sum of squared misses between the spline at knots t_1..t_N and the waypoints."""
    wp = np.asarray(waypoints, dtype=np.float64).reshape(-1, 3)
    return float(sum(np.sum((eval_spline(traj, t) - w) ** 2) for t, w in zip(traj.times[1:], wp)))


def yaw_profile(position: ArrayLike, target_center: ArrayLike, previous: Optional[float] = None) -> float:
    """Heading that points the camera at the target in the horizontal plane.

    Directly overhead (horizontal distance <= 1e-6) the previous yaw is held,
    or 0 if there is none.
    """
    d = np.asarray(target_center, dtype=np.float64)[:2] - np.asarray(position, dtype=np.float64)[:2]
    if math.hypot(d[0], d[1]) <= 1e-6:
        return 0.0 if previous is None else float(previous)
    return math.atan2(d[1], d[0])


def unwrapped_yaws(positions: ArrayLike, targets: ArrayLike, previous: Optional[float] = None) -> NDArray[np.float64]:
    """Yaw sequence along sampled positions, unwrapped to avoid 2*pi jumps."""
    out = []
    prev = previous
    for p, tg in zip(np.asarray(positions), np.asarray(targets)):
        y = yaw_profile(p, tg, prev)
        if prev is not None:
            y = prev + (y - prev + math.pi) % (2 * math.pi) - math.pi
        out.append(y)
        prev = y
    return np.asarray(out)
