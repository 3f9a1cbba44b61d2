"""
Smoothing viewpoints into a flyable trajectory
==============================================

Degree-5 segments minimize integrated squared jerk plus a waypoint penalty,
starting from the drone's current position, velocity and acceleration.
"""

import numpy as np

from chasecam.traj import build_qp, eval_spline, solve_spline, unwrapped_yaws, waypoint_error

waypoints = np.array([[0.0, 4.0, 2.5], [2.0, 5.0, 2.5], [4.0, 4.0, 2.7], [6.0, 3.0, 2.5]])
times = np.arange(5.0)
init = (np.array([-1.0, 3.0, 2.5]), np.array([1.0, 0.5, 0.0]), np.zeros(3))

for rho in (1.0, 100.0, 1e4):
    qp = build_qp(waypoints, times, init, K=5, rho=rho)
    traj = solve_spline(qp)
    print(f"rho={rho:8.0f}  objective={qp.objective(traj.flat_coeffs()):10.3f}  "
          f"waypoint error={waypoint_error(traj, waypoints):.4f} m")

# sample the last solution and point the camera at an actor walking along x
ts = np.linspace(0, 4, 9)
pos = np.array([eval_spline(traj, t) for t in ts])
actor = np.column_stack([ts, np.zeros_like(ts), np.full_like(ts, 0.85)])
for t, p, yaw in zip(ts, pos, unwrapped_yaws(pos, actor)):
    print(f"t={t:4.1f}  pos=({p[0]:5.2f}, {p[1]:5.2f}, {p[2]:4.2f})  yaw={np.degrees(yaw):7.1f} deg")
