"""Record a short teleoperation demonstration through the session API, save
it, and replay it into a fresh environment -- divergence must be zero.

Run:  python demos/07_teleop_record_replay.py

(For live browser teleoperation run `roomsim serve --config <cfg>` and open
frontend/index.html; this demo drives the same session machinery headlessly.)
"""

import pathlib
import tempfile

from roomsim import prefab
from roomsim.env import EnvConfig, Environment
from roomsim.teleop import DemoLog, TeleopSession, replay


def fresh_env():
    return Environment(EnvConfig(
        scene=prefab.furniture_scene(8, seed=5),
        sensors=("depth",),
        task_kind="PointGoal",
        task_params={"min_geodesic": 1.0, "max_geodesic": 8.0},
        doc={"demo": "07"}))


session = TeleopSession(fresh_env(), seed=12)
session.submit({"type": "record_start"})
session.tick_once()

script = {5: {"type": "cmd_drive", "forward": 1.0, "turn": 0.0},
          30: {"type": "cmd_drive", "forward": 0.6, "turn": 0.9},
          60: {"type": "cmd_drive", "forward": 0.0, "turn": 0.0},
          70: {"type": "cmd_gripper", "open": False}}
for tick in range(80):
    if tick in script:
        session.submit(script[tick])
    session.tick_once()

log = session.finalize_demo()
path = pathlib.Path(tempfile.mkdtemp(prefix="roomsim_demo_")) / "drive.jsonl"
log.save(path)
print(f"recorded {len(log.records)} ticks at 20 Hz -> {path}")

report = replay(DemoLog.load(path), fresh_env())
print(f"replay: {report['ticks']} ticks, "
      f"{report['mismatched_ticks']} mismatches, "
      f"divergence {report['divergence']}")
assert report["divergence"] == 0.0
print("bit-exact reproduction confirmed")
