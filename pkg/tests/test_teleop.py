import asyncio
import base64
import json
import math
import threading

import numpy as np
import pytest

from roomsim import prefab
from roomsim.env import EnvConfig, Environment
from roomsim.physics import SUBSTEP_DT
from roomsim.teleop import (
    SUBSTEPS_PER_TICK,
    TICK_RATE_HZ,
    ConfigMismatch,
    CorruptLog,
    DemoLog,
    TeleopSession,
    replay,
    serve_async,
)


def make_env(scene=None, sensors=("depth",)):
    scene = scene or prefab.furniture_scene(6, seed=4, with_mug=True)
    cfg = EnvConfig(scene=scene, sensors=tuple(sensors), task_kind="PointGoal",
                    task_params={"min_geodesic": 1.0, "max_geodesic": 9.0},
                    doc={"sensors": list(sensors)})
    return Environment(cfg)


class TestSessionCore:
    def test_tick_to_sim_time_exact(self):
        session = TeleopSession(make_env(), seed=0)
        for _ in range(20):
            session.tick_once()
        world = session.env.world
        assert world.state.substeps == 20 * SUBSTEPS_PER_TICK
        assert world.state.substeps * SUBSTEP_DT == pytest.approx(1.0, abs=1e-12)
        assert session.tick == 20

    def test_every_message_gets_one_reply(self):
        session = TeleopSession(make_env(), seed=0)
        assert session.submit(json.dumps({"type": "cmd_drive", "forward": 1,
                                          "turn": 0})) is None
        assert session.submit({"type": "cmd_gripper", "open": False}) is None
        msgs = session.tick_once()
        acks = [m for m in msgs if m["type"] == "ack"]
        frames = [m for m in msgs if m["type"] == "frame"]
        assert len(acks) == 2 and len(frames) == 1

    def test_malformed_gets_immediate_error(self):
        session = TeleopSession(make_env(), seed=0)
        err = session.submit("{broken")
        assert err["type"] == "error" and err["code"] == "bad_json"
        err = session.submit({"type": "no_such"})
        assert err["code"] == "bad_type"
        err = session.submit({"type": "cmd_drive", "forward": "fast", "turn": 0})
        assert err["code"] == "bad_fields"
        # session still alive
        msgs = session.tick_once()
        assert msgs[-1]["type"] == "frame"

    def test_drive_fold_last_writer_wins(self):
        session = TeleopSession(make_env(), seed=0)
        session.submit({"type": "cmd_drive", "forward": -1, "turn": 0})
        session.submit({"type": "cmd_drive", "forward": 1, "turn": 0})
        x0 = session.env.world.state.base_x
        yaw = session.env.world.state.base_yaw
        session.tick_once()
        moved = math.hypot(session.env.world.state.base_x - x0,
                           session.env.world.state.base_y -
                           session.env.world.state.base_y)
        # forward at +1: displacement along heading is positive
        dx = session.env.world.state.base_x - x0
        assert dx * math.cos(yaw) >= 0

    def test_drive_mapping_to_max_velocity(self):
        env = make_env(scene=prefab.empty_room_scene(20.0, 20.0))
        session = TeleopSession(env, seed=1)
        env.world.place_robot(10.0, 10.0, 0.0)
        session.submit({"type": "cmd_drive", "forward": 1, "turn": 0})
        session.tick_once()
        expect = env.world.config.max_linear * SUBSTEPS_PER_TICK * SUBSTEP_DT
        assert env.world.state.base_x - 10.0 == pytest.approx(expect, abs=1e-9)

    def test_click_background_out_of_view(self):
        env = make_env(scene=prefab.empty_room_scene(6.0, 6.0))
        session = TeleopSession(env, seed=0)
        # remove walls beyond far plane? center of an empty room: the wall is
        # in view, so click the sky: top row looks above the walls
        env.world.place_robot(3.0, 3.0, 0.0)
        err_or_none = session.submit({"type": "cmd_click", "u": 5, "v": 5,
                                      "mode": "push"})
        assert err_or_none is None
        msgs = session.tick_once()
        kinds = {m["type"] for m in msgs}
        assert "frame" in kinds
        # the reply for the click is either an ack (hit a wall/ceiling) or an
        # out_of_view error; force a guaranteed miss with a tiny far plane
        replies = [m for m in msgs if m["type"] in ("ack", "error")]
        assert len(replies) == 1

    def test_click_push_embeds_outcome(self):
        scene = prefab.door_scene(joint_friction=5.0)
        cfg = EnvConfig(scene=scene, sensors=("depth",), task_kind="PointGoal",
                        doc={})
        env = Environment(cfg)
        session = TeleopSession(env, seed=0)
        env.world.place_robot(2.0, 0.7, math.pi / 2)  # facing the door
        env._frame = None
        frame = env._render_frame()
        door_pixels = np.argwhere(frame.instance == 1)
        assert len(door_pixels)
        # pick the door pixel nearest the free edge (largest x in world:
        # instance near image left/right depends on pose; just use torque
        # outcome from any pixel that moves)
        moved_any = False
        for v, u in door_pixels[:: max(1, len(door_pixels) // 60)]:
            s2 = TeleopSession(Environment(cfg), seed=0)
            s2.env.world.place_robot(2.0, 0.7, math.pi / 2)
            s2.env._frame = None
            assert s2.submit({"type": "cmd_click", "u": int(u), "v": int(v),
                              "mode": "push"}) is None
            msgs = s2.tick_once()
            acks = [m for m in msgs if m["type"] == "ack"]
            if acks and acks[0].get("moved"):
                moved_any = True
                assert acks[0]["displacement"] > 0.10
                # oracle: direct push at the same unprojected point
                break
        assert moved_any

    def test_pick_and_place_round_trip(self):
        scene = prefab.furniture_scene(4, seed=4, with_mug=True,
                                       with_cabinet=False)
        cfg = EnvConfig(scene=scene, sensors=("depth",), task_kind="PointGoal",
                        doc={})
        env = Environment(cfg)
        session = TeleopSession(env, seed=0)
        mug = next(o for o in scene.objects if o.class_label == "mug")
        c = mug.bbox.center
        # stand 0.55 m from the mug: in view and within arm reach
        env.world.place_robot(c[0] - 0.55, c[1], 0.0)
        env._frame = None
        frame = env._render_frame()
        pix = np.argwhere(frame.instance == mug.id)
        assert len(pix) > 0, "mug must be visible from the canned pose"
        v, u = pix[len(pix) // 2]
        session.submit({"type": "cmd_click", "u": int(u), "v": int(v),
                        "mode": "pick"})
        msgs = session.tick_once()
        ack = [m for m in msgs if m["type"] == "ack"][0]
        assert ack["reached"] is True
        assert ack["grasped"] is True and ack["attached"] == mug.id


class TestRecordReplay:
    def drive_script(self, session, n=50):
        session.submit({"type": "record_start"})
        session.tick_once()
        session.submit({"type": "cmd_drive", "forward": 0.8, "turn": 0.3})
        for k in range(n):
            if k == 20:
                session.submit({"type": "cmd_drive", "forward": -0.5,
                                "turn": -1.0})
            if k == 35:
                session.submit({"type": "cmd_gripper", "open": False})
            session.tick_once()
        session.submit({"type": "record_stop"})
        session.tick_once()
        return session.completed_demos[-1]

    def test_replay_divergence_zero(self):
        env = make_env()
        session = TeleopSession(env, seed=3)
        log = self.drive_script(session, n=100)
        assert log is not None and len(log.records) >= 100
        report = replay(log, make_env())
        assert report["mismatched_ticks"] == 0
        assert report["divergence"] == 0.0

    def test_replay_round_trip_through_file(self, tmp_path):
        env = make_env()
        session = TeleopSession(env, seed=3)
        log = self.drive_script(session, n=30)
        p = tmp_path / "demo.jsonl"
        log.save(p)
        loaded = DemoLog.load(p)
        report = replay(loaded, make_env())
        assert report["divergence"] == 0.0

    def test_config_mismatch(self):
        env = make_env()
        session = TeleopSession(env, seed=3)
        log = self.drive_script(session, n=10)
        other = make_env(scene=prefab.furniture_scene(5, seed=9))
        with pytest.raises(ConfigMismatch):
            replay(log, other)

    def test_corrupt_log(self):
        with pytest.raises(CorruptLog):
            DemoLog.from_text("")
        with pytest.raises(CorruptLog):
            DemoLog.from_text('{"config_hash": "x", "scene_hash": "y", '
                              '"seed": 0, "tick_rate_hz": 30}\n')
        good = ('{"config_hash": "x", "scene_hash": "y", "seed": 0, '
                '"tick_rate_hz": 20}\n')
        with pytest.raises(CorruptLog):
            DemoLog.from_text(good + '{"tick": 2}\n{"tick": 1}\n')

    def test_randomize_event_replays(self):
        env = make_env()
        session = TeleopSession(env, seed=5)
        session.submit({"type": "record_start"})
        session.tick_once()
        session.submit({"type": "randomize", "axes": ["materials"]})
        session.tick_once()
        session.submit({"type": "cmd_drive", "forward": 1.0, "turn": 0.0})
        for _ in range(10):
            session.tick_once()
        log = session.finalize_demo()
        report = replay(log, make_env())
        assert report["divergence"] == 0.0


class TestWebsocket:
    def run_server_and_client(self, client_coro, max_ticks=25, n_envs=1):
        async def main():
            env = make_env(scene=prefab.empty_room_scene(8.0, 8.0))
            ready = asyncio.Event()
            stop = asyncio.Event()
            server = asyncio.ensure_future(serve_async(
                env, host="127.0.0.1", port=8931, seed=0, realtime=False,
                max_ticks=max_ticks, ready_event=ready, stop_event=stop))
            await asyncio.wait_for(ready.wait(), 10)
            try:
                result = await asyncio.wait_for(client_coro(), 60)
            finally:
                stop.set()
                try:
                    await asyncio.wait_for(server, 5)
                except Exception:
                    server.cancel()
            return result

        return asyncio.run(main())

    def test_idle_client_receives_frames(self):
        async def client():
            import websockets

            async with websockets.connect("ws://127.0.0.1:8931") as ws:
                hello = json.loads(await ws.recv())
                assert hello["type"] == "hello"
                assert hello["tick_rate_hz"] == TICK_RATE_HZ
                ticks = []
                while len(ticks) < 20:
                    msg = json.loads(await ws.recv())
                    if msg["type"] == "frame":
                        ticks.append(msg["tick"])
                        if len(ticks) == 1:
                            raw = base64.b64decode(msg["rgb"])
                            assert raw[:8] == b"\x89PNG\r\n\x1a\n"
                return ticks

        ticks = self.run_server_and_client(client)
        assert ticks == list(range(1, 21))  # monotonic, no gaps

    def test_second_client_rejected(self):
        async def client():
            import websockets

            async with websockets.connect("ws://127.0.0.1:8931") as ws:
                await ws.recv()  # hello
                async with websockets.connect("ws://127.0.0.1:8931") as ws2:
                    msg = json.loads(await ws2.recv())
                    assert msg["type"] == "error"
                    assert msg["code"] == "session_busy"
                return True

        assert self.run_server_and_client(client)

    def test_malformed_message_keeps_session_alive(self):
        async def client():
            import websockets

            async with websockets.connect("ws://127.0.0.1:8931") as ws:
                await ws.recv()
                await ws.send("this is not json")
                saw_error = False
                frames = 0
                for _ in range(50):
                    msg = json.loads(await ws.recv())
                    if msg["type"] == "error":
                        saw_error = True
                    if msg["type"] == "frame":
                        frames += 1
                    if saw_error and frames >= 3:
                        return True
                return False

        assert self.run_server_and_client(client)

    def test_drive_command_moves_robot(self):
        async def client():
            import websockets

            async with websockets.connect("ws://127.0.0.1:8931") as ws:
                await ws.recv()
                await ws.send(json.dumps({"type": "cmd_drive", "forward": 1.0,
                                          "turn": 0.0}))
                x0 = None
                for _ in range(60):
                    msg = json.loads(await ws.recv())
                    if msg["type"] == "frame":
                        if x0 is None:
                            x0 = msg["state"]["x"]
                        elif msg["state"]["x"] != x0:
                            return True
                return False

        assert self.run_server_and_client(client)
