"""
A full chase around the desk scene
==================================

The bundled scene has a white actor walking between a brick wall on one side
and a snow bank on the other. We fly it twice: once caring only about distance
and once weighting detectability. Takes about half a minute.
"""

from chasecam import desk_scenario_path, load_scenario, run_mission

for lam in (0.0, 20.0):
    scenario = load_scenario(desk_scenario_path(), {"lam": lam})
    log = run_mission(scenario)
    s = log.summary()
    reasons = [r.reason for r in log.replans]
    print(f"lambda={lam:4.1f}  travel={s['travel_distance_m']:6.1f} m  mean R={s['mean_R']:.3f}  "
          f"replans={len(reasons)} ({reasons.count('error')} from prediction error)")

# with lambda = 20 the drone detours to keep the brick wall behind the actor
