import json

import numpy as np
import pytest

from roomsim import prefab
from roomsim.cli import main
from roomsim.scene import save_scene


@pytest.fixture()
def scene_file(tmp_path):
    p = tmp_path / "scene.json"
    save_scene(prefab.furniture_scene(6, seed=2), p)
    return p


@pytest.fixture()
def config_file(tmp_path):
    sp = tmp_path / "nav_scene.json"
    save_scene(prefab.empty_room_scene(8.0, 8.0), sp)
    doc = {"scene": str(sp),
           "sensors": ["goal_relative", "waypoints", "base_velocity"],
           "task": {"kind": "PointGoal",
                    "params": {"min_geodesic": 1.5, "max_geodesic": 7.0}},
           "max_steps": 400}
    p = tmp_path / "config.json"
    p.write_text(json.dumps(doc))
    return p


class TestSceneTools:
    def test_validate_ok(self, scene_file, capsys):
        assert main(["scene", "validate", "--scene", str(scene_file)]) == 0
        assert "OK" in capsys.readouterr().out

    def test_validate_bad_scene(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text('{"name": "x", "materials": {}, "walls": '
                     '[{"a": [0, 0], "b": [1, 0], "height": -1}]}')
        assert main(["scene", "validate", "--scene", str(p)]) == 1

    def test_missing_file_is_io_error(self):
        assert main(["scene", "validate", "--scene", "/nope/missing.json"]) == 2

    def test_stats(self, tmp_path, capsys):
        p = tmp_path / "s.json"
        scene = prefab.furniture_scene(6, seed=1)
        from dataclasses import replace
        r2 = replace(scene.rooms[0], id=1)
        save_scene(replace(scene, rooms=(scene.rooms[0], r2)), p)
        assert main(["scene", "stats", "--scene", str(p)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["objects_per_room"] == 3.0

    def test_randomize_deterministic(self, scene_file, tmp_path, capsys):
        o1 = tmp_path / "r1.json"
        o2 = tmp_path / "r2.json"
        assert main(["scene", "randomize", "--scene", str(scene_file),
                     "--seed", "7", "--axes", "materials", "--out", str(o1)]) == 0
        assert main(["scene", "randomize", "--scene", str(scene_file),
                     "--seed", "7", "--axes", "materials", "--out", str(o2)]) == 0
        assert o1.read_bytes() == o2.read_bytes()

    def test_import(self, tmp_path, capsys):
        layout = {"name": "plan",
                  "rooms": [{"id": 0, "polygon": [[0, 0], [5, 0], [5, 5], [0, 5]]}],
                  "walls": [{"a": [0, 0], "b": [5, 0], "height": 2.5},
                            {"a": [5, 0], "b": [5, 5], "height": 2.5},
                            {"a": [5, 5], "b": [0, 5], "height": 2.5},
                            {"a": [0, 5], "b": [0, 0], "height": 2.5}],
                  "objects": [{"class": "table",
                               "bbox": {"center": [2, 2, 0.375], "yaw": 0.0,
                                        "half_extents": [0.5, 0.4, 0.375]}},
                              {"class": "unknown_custom",
                               "bbox": {"center": [3, 3, 0.2], "yaw": 0.0,
                                        "half_extents": [0.2, 0.2, 0.2]}}]}
        lp = tmp_path / "layout.json"
        lp.write_text(json.dumps(layout))
        out = tmp_path / "imported.json"
        assert main(["scene", "import", "--layout", str(lp),
                     "--out", str(out)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["placed"] == 1
        assert report["skipped"][0]["class"] == "unknown_custom"
        assert main(["scene", "validate", "--scene", str(out)]) == 0


class TestRun:
    def test_empty_run_header_only(self, config_file, tmp_path):
        out = tmp_path / "results.jsonl"
        assert main(["run", "--config", str(config_file), "-n", "0",
                     "--out", str(out)]) == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 1
        assert json.loads(lines[0])["type"] == "header"

    def test_waypoint_follower_succeeds(self, config_file, tmp_path, capsys):
        out = tmp_path / "results.jsonl"
        assert main(["run", "--config", str(config_file), "-n", "3",
                     "--seed", "5", "--out", str(out)]) == 0
        lines = [json.loads(l) for l in out.read_text().strip().splitlines()]
        summary = lines[-1]
        assert summary["type"] == "summary"
        assert summary["success_rate"] == 1.0
        assert summary["spl"] > 0.9

    def test_run_deterministic(self, config_file, tmp_path):
        o1 = tmp_path / "a.jsonl"
        o2 = tmp_path / "b.jsonl"
        for o in (o1, o2):
            assert main(["run", "--config", str(config_file), "-n", "2",
                         "--seed", "3", "--out", str(o)]) == 0
        assert o1.read_bytes() == o2.read_bytes()

    def test_parallel_matches_serial(self, config_file, tmp_path):
        serial = tmp_path / "serial.jsonl"
        par = tmp_path / "parallel.jsonl"
        assert main(["run", "--config", str(config_file), "-n", "2",
                     "--seed", "1", "--out", str(serial)]) == 0
        assert main(["run", "--config", str(config_file), "-n", "2",
                     "--seed", "1", "--parallel", "2", "--out", str(par)]) == 0
        assert serial.read_bytes() == par.read_bytes()


class TestBench:
    def test_bench_rows_and_ordering(self, tmp_path, capsys):
        sp = tmp_path / "bench_scene.json"
        save_scene(prefab.furniture_scene(10, seed=3), sp)
        out = tmp_path / "bench.json"
        assert main(["bench", "--scene", str(sp), "--preset", "visualrl",
                     "--steps", "5", "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        rows = {r["name"]: r for r in report["rows"]}
        for r in report["rows"]:
            assert r["min"] <= r["mean"] <= r["max"]
        assert rows["physics_step"]["mean"] >= rows["full_step"]["mean"]


class TestPushesAndReplay:
    def test_pushes_count(self, scene_file, tmp_path, capsys):
        out = tmp_path / "pushes.jsonl"
        assert main(["pushes", "--scene", str(scene_file), "--locations", "3",
                     "--per-location", "2", "--seed", "1",
                     "--out", str(out)]) == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 6

    def test_replay_roundtrip(self, tmp_path):
        from roomsim.env import EnvConfig, Environment
        from roomsim.teleop import TeleopSession

        sp = tmp_path / "s.json"
        save_scene(prefab.empty_room_scene(8.0, 8.0), sp)
        doc = {"scene": str(sp), "sensors": ["depth"],
               "task": {"kind": "PointGoal",
                        "params": {"min_geodesic": 1.0, "max_geodesic": 8.0}}}
        cp = tmp_path / "cfg.json"
        cp.write_text(json.dumps(doc))
        env = Environment(EnvConfig.from_file(cp))
        session = TeleopSession(env, seed=2)
        session.submit({"type": "record_start"})
        session.tick_once()
        session.submit({"type": "cmd_drive", "forward": 0.7, "turn": 0.2})
        for _ in range(30):
            session.tick_once()
        log = session.finalize_demo()
        dp = tmp_path / "demo.jsonl"
        log.save(dp)
        assert main(["replay", "--demo", str(dp), "--config", str(cp)]) == 0
