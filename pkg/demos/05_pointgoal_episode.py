"""Drive a full PointGoal episode with the scripted waypoint follower and
report the resulting metrics.

Run:  python demos/05_pointgoal_episode.py
"""

from roomsim import prefab
from roomsim.env import EnvConfig, Environment, compute_spl, waypoint_follower

cfg = EnvConfig(
    scene=prefab.empty_room_scene(8.0, 8.0),
    sensors=("depth", "goal_relative", "waypoints", "base_velocity"),
    task_kind="PointGoal",
    task_params={"min_geodesic": 2.0, "max_geodesic": 8.0},
    max_steps=500,
    doc={})

records = []
for seed in range(5):
    env = Environment(cfg)
    obs = env.reset(seed)
    print(f"episode {seed}: goal at {obs['goal_relative'].round(2)} "
          f"(robot frame), geodesic {env._record['l']:.2f} m")
    done, steps, total = False, 0, 0.0
    while not done:
        obs, reward, done, info = env.step(waypoint_follower(obs))
        total += reward
        steps += 1
    rec = env.episode_record()
    records.append(rec)
    print(f"  -> {info['reason']} after {steps} steps "
          f"(p={rec.agent_path_length:.2f} m, return={total:.2f})")

print(f"\nsuccess rate: {sum(r.success for r in records) / len(records):.0%}, "
      f"SPL: {compute_spl(records):.3f}")
