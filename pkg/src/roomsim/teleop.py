"""Teleoperation session server: streams frames over a websocket, folds
client commands into a fixed 20 Hz control loop, records demonstrations and
replays them deterministically.

One tick advances simulated time by exactly 0.05 s (six 1/120 s physics
substeps), so the tick-to-sim-time ratio is exact regardless of wall-clock
pacing, which is best effort.
"""

from __future__ import annotations

import base64
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .env import Environment
from .physics import ControlCommands, Unreachable, inverse_kinematics
from .randomize import apply_randomization, spec_from_config
from .render import render

TICK_RATE_HZ = 20
SUBSTEPS_PER_TICK = 6  # 6 * (1/120 s) = 0.05 s

CLIENT_TYPES = {"cmd_drive", "cmd_click", "cmd_gripper", "cmd_mode",
                "record_start", "record_stop", "reset", "randomize"}
CLICK_MODES = {"push", "pull", "pick", "place"}


class ConfigMismatch(Exception):
    pass


class CorruptLog(Exception):
    pass


@dataclass
class DemoLog:
    header: dict
    records: list = field(default_factory=list)

    def to_text(self) -> str:
        lines = [json.dumps(self.header, sort_keys=True)]
        lines += [json.dumps(r, sort_keys=True) for r in self.records]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DemoLog":
        lines = [l for l in text.splitlines() if l.strip()]
        if not lines:
            raise CorruptLog("empty log")
        try:
            header = json.loads(lines[0])
            records = [json.loads(l) for l in lines[1:]]
        except json.JSONDecodeError as e:
            raise CorruptLog(f"bad json: {e}") from e
        for key in ("config_hash", "scene_hash", "seed", "tick_rate_hz"):
            if key not in header:
                raise CorruptLog(f"header missing {key!r}")
        if header["tick_rate_hz"] != TICK_RATE_HZ:
            raise CorruptLog(f"tick_rate_hz must be {TICK_RATE_HZ}")
        last = -1
        for r in records:
            if "tick" not in r or r["tick"] <= last:
                raise CorruptLog("ticks must be strictly increasing")
            last = r["tick"]
        return cls(header=header, records=records)

    def save(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_text())

    @classmethod
    def load(cls, path) -> "DemoLog":
        with open(path) as f:
            return cls.from_text(f.read())


class TeleopSession:
    """Synchronous session core; the network layer feeds raw messages in and
    sends the returned payloads out."""

    def __init__(self, env: Environment, seed: int = 0):
        self.env = env
        self.seed = int(seed)
        env.reset(self.seed)
        self.tick = 0
        self.drive = [0.0, 0.0]  # forward, turn in [-1, 1]
        self.mode = "push"
        self._queue = []
        self.recording = None
        self.completed_demos = []
        self._rand_counter = 0

    # -- protocol ---------------------------------------------------------

    def hello(self) -> dict:
        return {"type": "hello",
                "config_hash": f"{self.env.config.hash():016x}",
                "scene_hash": f"{self.env.scene.hash():016x}",
                "seed": self.seed,
                "tick_rate_hz": TICK_RATE_HZ,
                "width": self.env.preset.resolution,
                "height": self.env.preset.resolution}

    def submit(self, raw) -> dict | None:
        """Queue one raw client message; returns an immediate error payload
        for malformed input (its single response), else None."""
        if isinstance(raw, (bytes, str)):
            try:
                msg = json.loads(raw)
            except json.JSONDecodeError:
                return {"type": "error", "code": "bad_json",
                        "detail": "message is not valid JSON"}
        else:
            msg = raw
        if not isinstance(msg, dict) or msg.get("type") not in CLIENT_TYPES:
            return {"type": "error", "code": "bad_type",
                    "detail": f"unknown message type {msg.get('type') if isinstance(msg, dict) else None!r}"}
        err = self._validate(msg)
        if err:
            return {"type": "error", "code": "bad_fields", "detail": err}
        self._queue.append(msg)
        return None

    @staticmethod
    def _validate(msg) -> str | None:
        t = msg["type"]
        if t == "cmd_drive":
            if not all(isinstance(msg.get(k), (int, float)) for k in ("forward",
                                                                      "turn")):
                return "cmd_drive requires numeric forward and turn"
        elif t == "cmd_click":
            if not all(isinstance(msg.get(k), int) for k in ("u", "v")):
                return "cmd_click requires integer u and v"
            if msg.get("mode") not in CLICK_MODES:
                return f"cmd_click mode must be one of {sorted(CLICK_MODES)}"
        elif t == "cmd_gripper":
            if not isinstance(msg.get("open"), bool):
                return "cmd_gripper requires boolean open"
        elif t == "cmd_mode":
            if msg.get("mode") not in CLICK_MODES:
                return f"cmd_mode mode must be one of {sorted(CLICK_MODES)}"
        elif t == "reset":
            if "seed" in msg and not isinstance(msg["seed"], int):
                return "reset seed must be an integer"
        elif t == "randomize":
            axes = msg.get("axes", [])
            if not isinstance(axes, list) or not all(
                    a in ("materials", "objects", "dynamics") for a in axes):
                return "randomize axes must be a list of material/object/dynamics"
        return None

    # -- ticking -----------------------------------------------------------

    def tick_once(self) -> list:
        """Drain queued commands, fold them into this tick's action, advance
        0.05 s of simulation and emit acks plus one frame message."""
        replies = []
        action = {"drive": None, "gripper": None, "clicks": [], "events": []}
        for msg in self._queue:
            reply = self._fold(msg, action)
            replies.append(reply)
        self._queue.clear()
        self._advance(action)
        if self.recording is not None:
            self.recording["records"].append(
                {"tick": self.tick, "action": action, "state": self._state_summary()})
        replies.append(self.frame_message())
        return replies

    def _fold(self, msg, action) -> dict:
        t = msg["type"]
        # the command takes effect in the tick being produced now
        ack = {"type": "ack", "tick": self.tick + 1, "cmd": t}
        if t == "cmd_drive":
            self.drive = [max(-1.0, min(1.0, float(msg["forward"]))),
                          max(-1.0, min(1.0, float(msg["turn"])))]
            action["drive"] = list(self.drive)
        elif t == "cmd_mode":
            self.mode = msg["mode"]
            ack["mode"] = self.mode
        elif t == "cmd_gripper":
            action["gripper"] = bool(msg["open"])
        elif t == "cmd_click":
            click = {"u": int(msg["u"]), "v": int(msg["v"]),
                     "mode": msg.get("mode", self.mode)}
            result = self._resolve_click(click)
            if "error" in result:
                return {"type": "error", "code": result["error"],
                        "detail": result.get("detail", "")}
            action["clicks"].append(click)
            ack.update(result)
        elif t == "record_start":
            if self.recording is None:
                # anchor the demo: replay rebuilds from (config, seed), so
                # recording must start from exactly that state
                self.env.reset(self.seed)
                self.recording = {"seed": self.seed, "records": []}
            ack["recording"] = True
        elif t == "record_stop":
            ack["recording"] = False
            ack["ticks_recorded"] = len(self.recording["records"]) \
                if self.recording else 0
            self.finalize_demo()
        elif t == "reset":
            seed = int(msg.get("seed", self.seed))
            action["events"].append({"kind": "reset", "seed": seed})
            ack["seed"] = seed
        elif t == "randomize":
            axes = list(msg.get("axes", []))
            sub = self._rand_counter
            self._rand_counter += 1
            action["events"].append({"kind": "randomize", "axes": axes,
                                     "sub_seed": sub})
            ack["axes"] = axes
        return ack

    def _resolve_click(self, click) -> dict:
        """Execute a click against the current frame; returns ack fields or
        an error marker."""
        frame = self.env._render_frame()
        res = self.env.preset.resolution
        u, v = click["u"], click["v"]
        if not (0 <= u < res and 0 <= v < res):
            return {"error": "out_of_view", "detail": "pixel outside the frame"}
        if frame.depth[v, u] <= 0.0:
            return {"error": "out_of_view", "detail": "no depth under the pixel"}
        outcome = self._execute_click(click)
        return outcome

    def _execute_click(self, click) -> dict:
        from .physics import InvalidContact

        env = self.env
        world = env.world
        frame = env._render_frame()
        res = env.preset.resolution
        u, v = click["u"], click["v"]
        cam = env.robot_camera()
        dirs = cam.pixel_dirs().reshape(res, res, 3)
        point = np.asarray(cam.position) + frame.depth[v, u] * dirs[v, u]
        normal = frame.normals[v, u]
        mode = click["mode"]
        if mode in ("push", "pull"):
            direction = -normal if mode == "push" else normal
            try:
                out = world.apply_push(point, direction)
            except InvalidContact:
                return {"error": "out_of_view",
                        "detail": "unprojected point missed every surface"}
            env._frame = None  # geometry may have moved
            return {"mode": mode, "moved": out.moved,
                    "displacement": round(float(out.displacement), 6),
                    "applied": round(float(out.applied), 6)}
        s = world.state
        rel = point - np.array([s.base_x, s.base_y, 0.0])
        c, si = math.cos(-s.base_yaw), math.sin(-s.base_yaw)
        local = np.array([c * rel[0] - si * rel[1], si * rel[0] + c * rel[1],
                          rel[2]])
        if mode == "pick":
            try:
                q = inverse_kinematics(local, world.robot.arm, s.arm_q)
            except Unreachable:
                return {"mode": mode, "reached": False, "grasped": False}
            world.state.arm_q = q
            world._geom_version += 1
            world.grasp()
            env._frame = None
            return {"mode": mode, "reached": True,
                    "grasped": world.state.attached is not None,
                    "attached": world.state.attached}
        # place: reach toward the point if possible, then release
        try:
            q = inverse_kinematics(local, world.robot.arm, s.arm_q)
            world.state.arm_q = q
            world._geom_version += 1
            reached = True
        except Unreachable:
            reached = False
        world.release()
        env._frame = None
        return {"mode": mode, "reached": reached, "released": True}

    def _advance(self, action):
        env = self.env
        for ev in action["events"]:
            if ev["kind"] == "reset":
                self.seed = ev["seed"]
                env.reset(self.seed)
            else:
                spec = spec_from_config(
                    {"axes": ev["axes"]},
                    seed=int(np.random.SeedSequence(
                        (self.seed, 0xA5, ev["sub_seed"])).generate_state(1)[0]))
                scene, _ = apply_randomization(env.scene, spec)
                state = env.world.get_state()
                from .physics import World

                env.scene = scene
                env.world = World(scene, robot=env.config.robot)
                env.world.set_state(state)
        if action["drive"] is not None:
            self.drive = list(action["drive"])
        cfg = env.world.config
        commands = ControlCommands(
            linear=self.drive[0] * cfg.max_linear,
            angular=self.drive[1] * cfg.max_angular,
            gripper=action["gripper"])
        # clicks were already executed at fold time, before stepping
        env.world.step_substeps(commands, SUBSTEPS_PER_TICK)
        self.tick += 1
        env._frame = None

    def _state_summary(self) -> dict:
        s = self.env.world.state
        return {"x": repr(float(s.base_x)), "y": repr(float(s.base_y)),
                "yaw": repr(float(s.base_yaw)),
                "hash": f"{self.env.world.state_hash():016x}"}

    def frame_message(self, with_rgb: bool = True) -> dict:
        env = self.env
        s = env.world.state
        msg = {"type": "frame", "tick": self.tick,
               "sim_time": round(self.tick / TICK_RATE_HZ, 6),
               "state": {"x": round(float(s.base_x), 6),
                         "y": round(float(s.base_y), 6),
                         "yaw": round(float(s.base_yaw), 6),
                         "gripper_open": bool(s.gripper_open),
                         "attached": s.attached,
                         "recording": self.recording is not None}}
        if with_rgb:
            snap = env.world.snapshot()
            cam = env.robot_camera()
            shot = render(snap, cam, env.preset, tick=self.tick, want_rgb=True)
            msg["rgb"] = _png_b64(shot.rgb)
        return msg

    # -- demonstrations -----------------------------------------------------

    def finalize_demo(self) -> DemoLog | None:
        """Close the active recording; the log is returned and kept in
        completed_demos for the transport layer to persist."""
        if self.recording is None:
            return None
        log = DemoLog(header={"config_hash": f"{self.env.config.hash():016x}",
                              "scene_hash": f"{self.env.config.scene.hash():016x}",
                              "seed": self.recording["seed"],
                              "tick_rate_hz": TICK_RATE_HZ},
                      records=list(self.recording["records"]))
        self.recording = None
        if log.records:
            self.completed_demos.append(log)
        return log


def replay(log: DemoLog, env: Environment) -> dict:
    """Rebuild from the header seed, re-apply recorded actions and compare
    per-tick state hashes. Divergence 0 means bit-exact reproduction."""
    if f"{env.config.hash():016x}" != log.header["config_hash"]:
        raise ConfigMismatch("environment config hash differs from the log")
    session = TeleopSession(env, seed=log.header["seed"])
    mismatches = 0
    first = None
    max_err = 0.0
    for rec in log.records:
        action = rec["action"]
        for ev in action.get("events", []):
            if ev["kind"] == "reset":
                session._queue.append({"type": "reset", "seed": ev["seed"]})
            else:
                session._queue.append({"type": "randomize", "axes": ev["axes"]})
        if action.get("drive") is not None:
            session._queue.append({"type": "cmd_drive",
                                   "forward": action["drive"][0],
                                   "turn": action["drive"][1]})
        if action.get("gripper") is not None:
            session._queue.append({"type": "cmd_gripper",
                                   "open": action["gripper"]})
        for click in action.get("clicks", []):
            session._queue.append({"type": "cmd_click", **click})
        session.tick_once()
        got = session._state_summary()
        want = rec["state"]
        if got["hash"] != want["hash"]:
            mismatches += 1
            if first is None:
                first = rec["tick"]
        for k in ("x", "y", "yaw"):
            max_err = max(max_err, abs(float(got[k]) - float(want[k])))
    return {"ticks": len(log.records), "mismatched_ticks": mismatches,
            "first_mismatch": first, "divergence": max_err if mismatches else 0.0}


def _png_b64(rgb) -> str:
    from PIL import Image

    arr = np.clip(np.asarray(rgb) * 255.0 + 0.5, 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    # low compression: frames are small and latency matters more than bytes
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG", compress_level=1)
    return base64.b64encode(buf.getvalue()).decode()


# ---------------------------------------------------------------------------
# Websocket transport
# ---------------------------------------------------------------------------

async def serve_async(env: Environment, host="127.0.0.1", port=8765, seed=0,
                      realtime=True, max_ticks=None, demo_dir=None,
                      ready_event=None, stop_event=None):
    """Accept one client per environment; run the 20 Hz loop while the
    client is connected. Additional clients are rejected with an error."""
    import asyncio

    import websockets.asyncio.server as ws_server

    busy = {"session": None}

    async def handler(ws):
        if busy["session"] is not None:
            await ws.send(json.dumps({"type": "error", "code": "session_busy",
                                      "detail": "another client is connected"}))
            await ws.close()
            return
        session = TeleopSession(env, seed=seed)
        busy["session"] = session
        try:
            await ws.send(json.dumps(session.hello()))

            async def receiver():
                async for raw in ws:
                    err = session.submit(raw)
                    if err is not None:
                        outbox.append(err)

            outbox = []
            recv_task = asyncio.ensure_future(receiver())
            loop = asyncio.get_event_loop()
            period = 1.0 / TICK_RATE_HZ
            next_t = loop.time()
            while not recv_task.done():
                if max_ticks is not None and session.tick >= max_ticks:
                    break
                if stop_event is not None and stop_event.is_set():
                    break
                replies = list(outbox)
                outbox.clear()
                replies += session.tick_once()
                for m in replies:
                    await ws.send(json.dumps(m))
                if realtime:
                    next_t += period
                    await asyncio.sleep(max(0.0, next_t - loop.time()))
                else:
                    await asyncio.sleep(0)
            recv_task.cancel()
        except Exception:
            pass
        finally:
            session.finalize_demo()
            if demo_dir is not None:
                import os

                for i, log in enumerate(session.completed_demos):
                    path = os.path.join(
                        demo_dir, f"demo_{port}_{session.tick}_{i}.jsonl")
                    log.save(path)
            busy["session"] = None
            try:
                await ws.close()
            except Exception:
                pass

    async with ws_server.serve(handler, host, port) as server:
        if ready_event is not None:
            ready_event.set()
        if stop_event is not None:
            await stop_event.wait()
        else:
            await asyncio.Future()


def serve(env: Environment, host="127.0.0.1", port=8765, **kw):
    import asyncio

    asyncio.run(serve_async(env, host=host, port=port, **kw))
