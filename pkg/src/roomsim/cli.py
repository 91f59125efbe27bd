"""Command-line entry points: headless episode running, benchmarking, scene
tooling, push-dataset generation, demo replay and the teleop server.

Exit codes: 0 success, 1 validation/verification failure, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help()
        return 0
    from .scene import ParseError, ValidationError, ImportError_
    from .env import ConfigError, SamplingFailure
    from .teleop import ConfigMismatch, CorruptLog

    try:
        return args.func(args)
    except (FileNotFoundError, PermissionError, IsADirectoryError, OSError) as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 2
    except (ParseError, ValidationError, ImportError_, ConfigError,
            SamplingFailure, ConfigMismatch, CorruptLog, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def build_parser():
    p = argparse.ArgumentParser(prog="roomsim",
                                description="deterministic indoor robot "
                                            "simulation kernel")
    sub = p.add_subparsers(dest="command")

    run = sub.add_parser("run", help="run scripted episodes headlessly")
    run.add_argument("--config", required=True)
    run.add_argument("-n", "--episodes", type=int, default=10)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", default=None)
    run.add_argument("--parallel", type=int, default=1)
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser("bench", help="render/physics throughput benchmark")
    bench.add_argument("--scene", required=True)
    bench.add_argument("--preset", default="visualrl",
                       choices=["visualrl", "highfidelity"])
    bench.add_argument("--steps", type=int, default=30)
    bench.add_argument("--out", default=None)
    bench.set_defaults(func=cmd_bench)

    scene = sub.add_parser("scene", help="scene tooling")
    ssub = scene.add_subparsers(dest="scene_command", required=True)
    v = ssub.add_parser("validate")
    v.add_argument("--scene", required=True)
    v.set_defaults(func=cmd_scene_validate)
    imp = ssub.add_parser("import")
    imp.add_argument("--layout", required=True)
    imp.add_argument("--out", required=True)
    imp.set_defaults(func=cmd_scene_import)
    rnd = ssub.add_parser("randomize")
    rnd.add_argument("--scene", required=True)
    rnd.add_argument("--seed", type=int, default=0)
    rnd.add_argument("--axes", default="materials",
                     help="comma list: materials,objects,dynamics")
    rnd.add_argument("--out", required=True)
    rnd.set_defaults(func=cmd_scene_randomize)
    st = ssub.add_parser("stats")
    st.add_argument("--scene", required=True)
    st.set_defaults(func=cmd_scene_stats)

    pushes = sub.add_parser("pushes", help="generate a push-interaction dataset")
    pushes.add_argument("--scene", required=True)
    pushes.add_argument("--locations", type=int, default=100)
    pushes.add_argument("--per-location", type=int, default=10)
    pushes.add_argument("--seed", type=int, default=0)
    pushes.add_argument("--out", default=None)
    pushes.set_defaults(func=cmd_pushes)

    rp = sub.add_parser("replay", help="replay a recorded demonstration")
    rp.add_argument("--demo", required=True)
    rp.add_argument("--config", required=True)
    rp.set_defaults(func=cmd_replay)

    srv = sub.add_parser("serve", help="teleoperation websocket server")
    srv.add_argument("--config", required=True)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8765)
    srv.add_argument("--seed", type=int, default=0)
    srv.add_argument("--demo-dir", default=None)
    srv.set_defaults(func=cmd_serve)
    return p


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _episode_worker(config_path: str, seed: int) -> str:
    from .env import EnvConfig, Environment, waypoint_follower

    env = Environment(EnvConfig.from_file(config_path))
    obs = env.reset(seed)
    done = False
    while not done:
        obs, _, done, _ = env.step(waypoint_follower(obs))
    return env.episode_record().to_json()


def cmd_run(args) -> int:
    from .env import EnvConfig, compute_spl, EpisodeRecord

    cfg = EnvConfig.from_file(args.config)  # fail fast on bad config
    seeds = list(range(args.seed, args.seed + args.episodes))
    lines = [json.dumps({"type": "header", "config": args.config,
                         "config_hash": f"{cfg.hash():016x}",
                         "episodes": args.episodes, "seed": args.seed},
                        sort_keys=True)]
    records = []
    if args.parallel > 1 and len(seeds) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            results = list(pool.map(_episode_worker, [args.config] * len(seeds),
                                    seeds))
    else:
        results = [_episode_worker(args.config, s) for s in seeds]
    for line in results:  # seed order is the submission order
        lines.append(line)
        d = json.loads(line)
        records.append(EpisodeRecord(d["seed"], d["success"], d["p"], d["l"],
                                     d["steps"], d["reason"]))
    if records:
        spl = compute_spl(records)
        rate = sum(r.success for r in records) / len(records)
        lines.append(json.dumps({"type": "summary", "spl": round(spl, 6),
                                 "success_rate": round(rate, 6)},
                                sort_keys=True))
        print(f"episodes={len(records)} success_rate={rate:.3f} spl={spl:.3f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

@dataclass
class BenchRow:
    name: str
    mean: float
    mx: float
    mn: float

    def check(self):
        assert self.mn <= self.mean <= self.mx
        return self


def _rates(dts):
    rates = [1.0 / dt for dt in dts if dt > 0]
    return (sum(rates) / len(rates), max(rates), min(rates))


def run_bench(scene, preset_name: str, steps: int) -> dict:
    """Per-modality render rates plus physics and full-step rates."""
    import numpy as np

    from .env import EnvConfig, Environment
    from .render import RenderPreset, compute_flow, render
    from .physics import ControlCommands

    cfg = EnvConfig(scene=scene, sensors=("rgb",), task_kind="PointGoal",
                    preset=preset_name, doc={})
    env = Environment(cfg)
    env.reset(0)
    preset = RenderPreset.by_name(preset_name)
    world = env.world
    cam = env.robot_camera()
    snap = world.snapshot()
    rows = []

    def timed(fn, n):
        dts = []
        fn()  # warm (jit, caches)
        for _ in range(n):
            t0 = time.perf_counter()
            fn()
            dts.append(time.perf_counter() - t0)
        return _rates(dts)

    geom = {
        "rgb": lambda: render(snap, cam, preset, want_rgb=True),
        "depth": lambda: render(snap, cam, preset, want_rgb=False),
        "normals": lambda: render(snap, cam, preset, want_rgb=False),
        "semantic": lambda: render(snap, cam, preset, want_rgb=False),
        "instance": lambda: render(snap, cam, preset, want_rgb=False),
        "optical_flow": lambda: compute_flow(snap, cam, snap, cam),
        "scene_flow": lambda: compute_flow(snap, cam, snap, cam),
    }
    render_rows = []
    for name, fn in geom.items():
        mean, mx, mn = timed(fn, steps)
        render_rows.append(BenchRow(name, mean, mx, mn).check())

    def physics_step():
        world.step(ControlCommands(linear=0.3, angular=0.4))

    mean, mx, mn = timed(physics_step, steps)
    physics_row = BenchRow("physics_step", mean, mx, mn).check()

    def full_step():
        world.step(ControlCommands(linear=0.3, angular=0.4))
        render(world.snapshot(), env.robot_camera(), preset, want_rgb=True)

    mean, mx, mn = timed(full_step, steps)
    full_row = BenchRow("full_step", mean, mx, mn).check()

    return {"preset": preset_name, "render": render_rows,
            "physics": physics_row, "full": full_row,
            "realtime_factor": full_row.mean / 30.0}


def format_bench(report) -> str:
    out = [f"preset: {report['preset']}",
           f"{'modality':<14}{'mean':>10}{'max':>10}{'min':>10}  [fps]"]
    for row in report["render"]:
        out.append(f"{row.name:<14}{row.mean:>10.1f}{row.mx:>10.1f}{row.mn:>10.1f}")
    for row in (report["physics"], report["full"]):
        out.append(f"{row.name:<14}{row.mean:>10.1f}{row.mx:>10.1f}{row.mn:>10.1f}")
    out.append(f"realtime_factor: {report['realtime_factor']:.2f}x")
    return "\n".join(out)


def cmd_bench(args) -> int:
    from .scene import load_scene

    scene = load_scene(args.scene)
    report = run_bench(scene, args.preset, args.steps)
    text = format_bench(report)
    print(text)
    if args.out:
        payload = {"preset": report["preset"],
                   "rows": [{"name": r.name, "mean": r.mean, "max": r.mx,
                             "min": r.mn}
                            for r in report["render"] + [report["physics"],
                                                         report["full"]]],
                   "realtime_factor": report["realtime_factor"]}
        with open(args.out, "w") as f:
            json.dump(payload, f, indent=1, sort_keys=True)
    return 0


# ---------------------------------------------------------------------------
# scene tools
# ---------------------------------------------------------------------------

def cmd_scene_validate(args) -> int:
    from .scene import load_scene

    load_scene(args.scene)
    print("OK")
    return 0


def cmd_scene_import(args) -> int:
    from . import prefab
    from .scene import import_floorplan, save_scene

    with open(args.layout) as f:
        layout = json.load(f)
    scene, report = import_floorplan(layout, prefab.DEFAULT_ASSET_POOL)
    save_scene(scene, args.out)
    print(json.dumps({"placed": report["placed"],
                      "skipped": report["skipped"]}, sort_keys=True))
    return 0


def cmd_scene_randomize(args) -> int:
    from .randomize import RandomizationSpec, apply_randomization
    from .scene import load_scene, save_scene
    from . import prefab

    scene = load_scene(args.scene)
    axes = [a.strip() for a in args.axes.split(",") if a.strip()]
    for a in axes:
        if a not in ("materials", "objects", "dynamics"):
            raise ValueError(f"unknown randomization axis {a!r}")
    spec = RandomizationSpec(
        seed=args.seed,
        randomize_materials="materials" in axes,
        randomize_objects="objects" in axes,
        randomize_dynamics="dynamics" in axes,
        asset_pool=dict(prefab.DEFAULT_ASSET_POOL))
    out, _ = apply_randomization(scene, spec)
    save_scene(out, args.out)
    print(f"seed={args.seed} axes={','.join(axes)} hash={out.hash():016x}")
    return 0


def cmd_scene_stats(args) -> int:
    from .scene import load_scene, scene_stats

    stats = scene_stats(load_scene(args.scene))
    print(json.dumps(stats, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# pushes / replay / serve
# ---------------------------------------------------------------------------

def cmd_pushes(args) -> int:
    import numpy as np

    from .env import sample_pushes
    from .scene import load_scene

    scene = load_scene(args.scene)
    rng = np.random.default_rng(args.seed)
    records = sample_pushes(scene, n_locations=args.locations,
                            pushes_per_location=args.per_location, rng=rng)
    lines = [json.dumps(r, sort_keys=True) for r in records]
    rate = sum(r["success"] for r in records) / max(len(records), 1)
    print(f"pushes={len(records)} success_rate={rate:.3f}")
    if args.out:
        with open(args.out, "w") as f:
            f.write("\n".join(lines) + "\n")
    return 0


def cmd_replay(args) -> int:
    from .env import EnvConfig, Environment
    from .teleop import DemoLog, replay

    log = DemoLog.load(args.demo)
    env = Environment(EnvConfig.from_file(args.config))
    report = replay(log, env)
    print(json.dumps(report, sort_keys=True))
    return 0 if report["mismatched_ticks"] == 0 else 1


def cmd_serve(args) -> int:
    from .env import EnvConfig, Environment
    from .teleop import serve

    env = Environment(EnvConfig.from_file(args.config))
    print(f"serving on ws://{args.host}:{args.port}")
    serve(env, host=args.host, port=args.port, seed=args.seed,
          demo_dir=args.demo_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
