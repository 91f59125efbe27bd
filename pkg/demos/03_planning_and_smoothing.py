"""Plan base paths with the three samplers, smooth them with the
acceleration-bounded shortcutter, and compute layout-only waypoints.

Run:  python demos/03_planning_and_smoothing.py
"""

import numpy as np

from roomsim import prefab
from roomsim.physics import World
from roomsim.planning import (
    PlannerParams,
    base_plan_space,
    geodesic_waypoints,
    plan,
    shortcut,
)

scene = prefab.furniture_scene(n_objects=12, seed=8)
world = World(scene)
space = base_plan_space(world)

rng = np.random.default_rng(1)
pts = []
while len(pts) < 2:
    p = rng.uniform(0.7, 9.3, size=2)
    if space.is_free(p) and all(np.linalg.norm(p - q) > 5.0 for q in pts):
        pts.append(p)
start, goal = pts

for algo in ("RRT", "BiRRT", "LazyPRM"):
    path = plan(space, start, goal, algo, PlannerParams(seed=4))
    smooth = shortcut(path, accel_limit=1.0, vel_limit=1.0, space=space,
                      rounds=120, rng=np.random.default_rng(4))
    print(f"{algo:8s} raw {path.length:6.2f} m in {path.iterations_used:4d} "
          f"iterations -> shortcut {smooth.length:6.2f} m, "
          f"{smooth.duration:5.2f} s trajectory")

wps = geodesic_waypoints(scene.walls, start, goal)
print("\nnext 10 layout waypoints (0.2 m apart) toward the goal:")
for w in wps:
    print(f"  ({w[0]:5.2f}, {w[1]:5.2f})")
