"""Config-driven environment: scene + robot + sensors + task, with a
step/reset loop, task success predicates, shaped rewards, episode metrics
and push-interaction dataset generation.

An episode is fully determined by (config, episode seed, action sequence).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import fnv1a64, yaw_apply, wrap_angle
from .physics import ControlCommands, RobotSpec, World, inverse_kinematics
from .planning import DistanceField, Unreachable, WallGrid
from .randomize import apply_randomization, spec_from_config
from .render import Camera, RenderPreset, render
from .scene import Scene, load_scene
from .sensors import GridConfig, LidarConfig, lidar_scan, scan_to_occupancy
from .snapshot import build_snapshot

FRAME_CHANNELS = ("rgb", "depth", "normals", "semantic", "instance",
                  "optical_flow", "scene_flow")
VECTOR_CHANNELS = ("base_velocity", "goal_relative", "waypoints")
ALL_CHANNELS = FRAME_CHANNELS + ("lidar", "occupancy") + VECTOR_CHANNELS

TASK_KINDS = ("PointGoal", "ObjectNav", "PushJoint")


class SteppingDoneEnv(Exception):
    pass


class SamplingFailure(Exception):
    pass


class EmptyInput(Exception):
    pass


class ConfigError(Exception):
    pass


@dataclass
class EnvConfig:
    scene: Scene
    robot: RobotSpec = field(default_factory=RobotSpec)
    sensors: tuple = ("depth", "base_velocity", "goal_relative", "waypoints")
    task_kind: str = "PointGoal"
    task_params: dict = field(default_factory=dict)
    randomization: dict = field(default_factory=dict)
    max_steps: int = 500
    preset: str = "visualrl"
    reward: dict = field(default_factory=lambda: {"success": 10.0, "progress": 1.0,
                                                  "step": -0.01})
    lidar: LidarConfig = field(default_factory=LidarConfig)
    doc: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.task_kind not in TASK_KINDS:
            raise ConfigError(f"unknown task kind {self.task_kind!r}")
        for ch in self.sensors:
            if ch not in ALL_CHANNELS:
                raise ConfigError(f"unknown sensor channel {ch!r}")

    @classmethod
    def from_dict(cls, doc: dict, scene: Scene | None = None) -> "EnvConfig":
        if scene is None:
            scene = load_scene(doc["scene"])
        robot_doc = doc.get("robot", {})
        robot = RobotSpec(**{k: (tuple(v) if isinstance(v, list) else v)
                             for k, v in robot_doc.items()}) if robot_doc else RobotSpec()
        task = doc.get("task", {"kind": "PointGoal"})
        lidar_doc = dict(doc.get("lidar", {}))
        if "vertical_angles" in lidar_doc:
            lidar_doc["vertical_angles"] = tuple(lidar_doc["vertical_angles"])
        if "mount" in lidar_doc:
            lidar_doc["mount"] = tuple(lidar_doc["mount"])
        return cls(
            scene=scene,
            robot=robot,
            sensors=tuple(doc.get("sensors",
                                  ("depth", "base_velocity", "goal_relative",
                                   "waypoints"))),
            task_kind=task.get("kind", "PointGoal"),
            task_params=dict(task.get("params", {})),
            randomization=dict(doc.get("randomization", {})),
            max_steps=int(doc.get("max_steps", 500)),
            preset=str(doc.get("preset", "visualrl")),
            reward=dict(doc.get("reward", {"success": 10.0, "progress": 1.0,
                                           "step": -0.01})),
            lidar=LidarConfig(**lidar_doc) if lidar_doc else LidarConfig(),
            doc=dict(doc),
        )

    @classmethod
    def from_file(cls, path) -> "EnvConfig":
        with open(path) as f:
            doc = json.load(f)
        import os

        if "scene" in doc and not os.path.isabs(doc["scene"]):
            doc = dict(doc)
            doc["scene"] = os.path.join(os.path.dirname(os.path.abspath(path)),
                                        doc["scene"])
        return cls.from_dict(doc)

    def hash(self) -> int:
        body = dict(self.doc)
        body.pop("scene", None)
        text = json.dumps(body, sort_keys=True) + f"|scene:{self.scene.hash():x}"
        return fnv1a64(text.encode())


@dataclass
class EpisodeRecord:
    seed: int
    success: bool
    agent_path_length: float  # p
    shortest_path_length: float  # l
    steps: int
    reason: str

    def to_json(self) -> str:
        return json.dumps({"seed": self.seed, "success": self.success,
                           "p": round(self.agent_path_length, 6),
                           "l": round(self.shortest_path_length, 6),
                           "steps": self.steps, "reason": self.reason},
                          sort_keys=True)


def objectnav_success(frame, target_instance: int, threshold: float = 0.05) -> bool:
    """True when the target occupies at least `threshold` of the image."""
    inst = frame.instance
    return bool((inst == target_instance).sum() / inst.size >= threshold)


def compute_spl(records) -> float:
    """Mean of S * l / max(p, l) over episodes."""
    records = list(records)
    if not records:
        raise EmptyInput("no episodes")
    total = 0.0
    for r in records:
        if r.shortest_path_length <= 0:
            raise ValueError("shortest path length must be positive")
        total += (1.0 if r.success else 0.0) * r.shortest_path_length / max(
            r.agent_path_length, r.shortest_path_length)
    return total / len(records)


class Environment:
    """One stepping loop owns one Environment; instances share nothing."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self.preset = RenderPreset.by_name(config.preset)
        self.world: World | None = None
        self.scene: Scene | None = None
        self._done = True
        self._tick = 0
        self.episode_seed = None
        self._frame = None
        self._prev_render = None
        self._grid = None
        self._field = None
        self._goal = None
        self._target_id = None
        self._target_joint = None
        self._record = None
        self._needs_frame = bool(set(config.sensors) & set(FRAME_CHANNELS)) or \
            config.task_kind in ("ObjectNav", "PushJoint")
        self._needs_flow = bool({"optical_flow", "scene_flow"} &
                                set(config.sensors))

    # -- lifecycle ---------------------------------------------------------

    def reset(self, episode_seed: int):
        self.episode_seed = int(episode_seed)
        scene = self.config.scene
        if self.config.randomization.get("axes"):
            spec = spec_from_config(self.config.randomization, seed=episode_seed)
            scene, _ = apply_randomization(scene, spec)
        self.scene = scene
        self.world = World(scene, robot=self.config.robot)
        self._grid = WallGrid(scene.walls)
        rng = np.random.default_rng(np.random.SeedSequence((self.episode_seed,
                                                            0x5EED)))
        kind = self.config.task_kind
        if kind == "PointGoal":
            self._reset_pointgoal(rng)
        elif kind == "ObjectNav":
            self._reset_objectnav(rng)
        else:
            self._reset_pushjoint(rng)
        self._done = False
        self._tick = 0
        self._prev_render = None
        self._frame = None
        sx, sy = self.world.state.base_x, self.world.state.base_y
        shortest = self._field.distance((sx, sy)) if self._field else 1.0
        self._record = {"p": 0.0, "l": max(shortest, 1e-6), "prev": (sx, sy)}
        self._prev_progress_metric = self._progress_metric()
        return self._observe()

    def _free_bounds(self):
        lo = self._grid.origin + 0.3
        hi = self._grid.origin + np.array([self._grid.nx, self._grid.ny]) \
            * self._grid.resolution - 0.3
        return lo, hi

    def _sample_free_pose(self, rng, attempts=1000):
        lo, hi = self._free_bounds()
        for _ in range(attempts):
            x, y = rng.uniform(lo, hi)
            yaw = float(rng.uniform(-math.pi, math.pi))
            if self.world.base_free(float(x), float(y)):
                return float(x), float(y), yaw
        raise SamplingFailure("no free robot pose found")

    def _reset_pointgoal(self, rng):
        p = self.config.task_params
        dmin = float(p.get("min_geodesic", 1.0))
        dmax = float(p.get("max_geodesic", 10.0))
        lo, hi = self._free_bounds()
        for _ in range(1000):
            sx, sy, syaw = self._sample_free_pose(rng, attempts=50)
            gx, gy = rng.uniform(lo, hi)
            if not self.world.base_free(float(gx), float(gy)):
                continue
            try:
                field = DistanceField(self._grid, (float(gx), float(gy)))
            except Unreachable:
                continue
            d = field.distance((sx, sy))
            if dmin <= d <= dmax:
                self.world.place_robot(sx, sy, syaw)
                self._goal = np.array([float(gx), float(gy)])
                self._field = field
                return
        raise SamplingFailure("no PointGoal episode found in 1000 attempts")

    def _reset_objectnav(self, rng):
        p = self.config.task_params
        label = p.get("target_class", "table")
        candidates = [o for o in self.scene.objects if o.class_label == label]
        if not candidates:
            raise SamplingFailure(f"no instance of class {label!r} in scene")
        target = candidates[int(rng.integers(len(candidates)))]
        self._target_id = target.id
        self._goal = np.asarray(target.bbox.center[:2], dtype=float)
        try:
            self._field = DistanceField(self._grid, tuple(self._goal))
        except Unreachable:
            raise SamplingFailure("target is outside the layout free space")
        sx, sy, syaw = self._sample_free_pose(rng)
        self.world.place_robot(sx, sy, syaw)

    def _reset_pushjoint(self, rng):
        p = self.config.task_params
        jointed = [o for o in self.scene.objects if o.model.joints]
        label = p.get("target_class")
        if label:
            jointed = [o for o in jointed if o.class_label == label]
        if not jointed:
            raise SamplingFailure("no articulated object for PushJoint")
        target = jointed[int(rng.integers(len(jointed)))]
        ji = int(p.get("joint_index", 0))
        joint = target.model.joints[ji]
        lo_l, hi_l = joint.limits
        q0 = float(rng.uniform(lo_l + 0.5 * (hi_l - lo_l), hi_l))
        self._target_id = target.id
        self._target_joint = (target.id, ji)
        self.world.state.joint_q[self._target_joint] = q0
        self.world._geom_version += 1
        self._field = None
        self._goal = np.asarray(target.bbox.center[:2], dtype=float)
        # place the robot facing the target so pixel pushes can hit it
        for _ in range(1000):
            sx, sy, _ = self._sample_free_pose(rng, attempts=50)
            d = np.hypot(sx - self._goal[0], sy - self._goal[1])
            if not (0.8 <= d <= 2.5):
                continue
            yaw = math.atan2(self._goal[1] - sy, self._goal[0] - sx)
            self.world.place_robot(sx, sy, yaw)
            frame = self._render_frame()
            if (frame.instance == target.id).any():
                return
        raise SamplingFailure("no pose with the PushJoint target visible")

    # -- stepping ------------------------------------------------------------

    def step(self, action):
        if self._done:
            raise SteppingDoneEnv("episode is done; call reset")
        info = {}
        kind = self.config.task_kind
        if kind == "PushJoint":
            push_info = self._apply_pixel_push(action)
            info.update(push_info)
            step_info = self.world.step(ControlCommands())
        else:
            v, w = float(action[0]), float(action[1])
            step_info = self.world.step(ControlCommands(linear=v, angular=w))
        info.update(step_info)
        self._tick += 1
        s = self.world.state
        px, py = self._record["prev"]
        self._record["p"] += math.hypot(s.base_x - px, s.base_y - py)
        self._record["prev"] = (s.base_x, s.base_y)
        self._frame = None  # refreshed lazily by _observe/_render_frame

        success = self._success()
        metric = self._progress_metric()
        progress = self._prev_progress_metric - metric
        self._prev_progress_metric = metric
        rw = self.config.reward
        reward = float(rw.get("progress", 1.0) * progress +
                       rw.get("step", -0.01) +
                       (rw.get("success", 10.0) if success else 0.0))
        reason = ""
        if success:
            self._done = True
            reason = "success"
        elif self._tick >= self.config.max_steps:
            self._done = True
            reason = "timeout"
        if self._done:
            self._reason = reason
            self._succeeded = success
        info.update({"tick": self._tick, "reason": reason, "distance": metric})
        obs = self._observe()
        return obs, reward, self._done, info

    def episode_record(self) -> EpisodeRecord:
        assert self._done, "episode still running"
        return EpisodeRecord(seed=self.episode_seed, success=self._succeeded,
                             agent_path_length=self._record["p"],
                             shortest_path_length=self._record["l"],
                             steps=self._tick, reason=self._reason)

    def _success(self) -> bool:
        kind = self.config.task_kind
        if kind == "PointGoal":
            tol = float(self.config.task_params.get("tolerance", 0.36))
            s = self.world.state
            return self._field.distance((s.base_x, s.base_y)) <= tol
        if kind == "ObjectNav":
            frame = self._render_frame()
            thr = float(self.config.task_params.get("threshold", 0.05))
            return objectnav_success(frame, self._target_id, thr)
        q = self.world.state.joint_q[self._target_joint]
        obj = self.scene.object_by_id(self._target_joint[0])
        lo, hi = obj.model.joints[self._target_joint[1]].limits
        frac = float(self.config.task_params.get("closed_fraction", 0.05))
        return q <= lo + frac * (hi - lo)

    def _progress_metric(self) -> float:
        kind = self.config.task_kind
        if kind in ("PointGoal", "ObjectNav"):
            s = self.world.state
            d = self._field.distance((s.base_x, s.base_y))
            return d if math.isfinite(d) else 1e3
        q = self.world.state.joint_q[self._target_joint]
        obj = self.scene.object_by_id(self._target_joint[0])
        lo, hi = obj.model.joints[self._target_joint[1]].limits
        return (q - lo) / (hi - lo)

    # -- sensing ----------------------------------------------------------------

    def robot_camera(self) -> Camera:
        s = self.world.state
        spec = self.config.robot
        off = yaw_apply(s.base_yaw, np.asarray(spec.camera_offset, dtype=float))
        eye = np.array([s.base_x + off[0], s.base_y + off[1], spec.camera_offset[2]])
        p = spec.camera_pitch
        fwd = np.array([math.cos(p) * math.cos(s.base_yaw),
                        math.cos(p) * math.sin(s.base_yaw), -math.sin(p)])
        return Camera.look_at(eye, eye + fwd, width=self.preset.resolution,
                              height=self.preset.resolution)

    def _render_frame(self):
        if self._frame is not None and self._frame.tick == self._tick:
            return self._frame
        snap = self.world.snapshot()
        cam = self.robot_camera()
        prev = self._prev_render if self._needs_flow else None
        self._frame = render(snap, cam, self.preset, prev=prev, tick=self._tick,
                             want_rgb="rgb" in self.config.sensors)
        if self._needs_flow:
            self._prev_render = (snap, cam)
        return self._frame

    def _observe(self) -> dict:
        obs = {}
        cfg = self.config
        s = self.world.state
        frame = self._render_frame() if self._needs_frame else None
        for ch in cfg.sensors:
            if ch in FRAME_CHANNELS:
                obs[ch] = getattr(frame, ch)
            elif ch == "lidar":
                rng = np.random.default_rng(np.random.SeedSequence(
                    (self.episode_seed, self._tick, 0xD0)))
                obs[ch] = lidar_scan(self.world.snapshot(), cfg.lidar, rng=rng,
                                     tick=self._tick)
            elif ch == "occupancy":
                rng = np.random.default_rng(np.random.SeedSequence(
                    (self.episode_seed, self._tick, 0xD1)))
                one_beam = cfg.lidar if cfg.lidar.n_beams == 1 else \
                    LidarConfig.single_beam(n_rays=cfg.lidar.n_rays,
                                            max_range=cfg.lidar.max_range,
                                            dropout_p=cfg.lidar.dropout_p)
                scan = lidar_scan(self.world.snapshot(), one_beam, rng=rng,
                                  tick=self._tick)
                grid_cfg = GridConfig.centered((s.base_x, s.base_y),
                                               resolution=0.1, width=100,
                                               height=100)
                obs[ch] = scan_to_occupancy(scan, grid_cfg)
            elif ch == "base_velocity":
                obs[ch] = np.array([s.base_v, s.base_w])
            elif ch == "goal_relative":
                obs[ch] = self._to_robot_frame(self._goal) if self._goal is not None \
                    else np.zeros(2)
            elif ch == "waypoints":
                obs[ch] = self._waypoints_obs()
        return obs

    def _to_robot_frame(self, xy):
        s = self.world.state
        rel = np.asarray(xy, dtype=float) - np.array([s.base_x, s.base_y])
        c, si = math.cos(-s.base_yaw), math.sin(-s.base_yaw)
        return np.array([c * rel[0] - si * rel[1], si * rel[0] + c * rel[1]])

    def _waypoints_obs(self):
        if self._field is None:
            return np.zeros((10, 2))
        s = self.world.state
        try:
            wps = self._field.waypoints_from((s.base_x, s.base_y))
        except Unreachable:
            return np.zeros((10, 2))
        return np.stack([self._to_robot_frame(w) for w in wps])

    # -- pixel pushes ----------------------------------------------------------

    def _apply_pixel_push(self, action) -> dict:
        from .physics import InvalidContact

        frame = self._render_frame()
        H = W = self.preset.resolution
        u = int(np.clip(float(action[0]), 0.0, 1.0) * (W - 1))
        v = int(np.clip(float(action[1]), 0.0, 1.0) * (H - 1))
        depth = frame.depth[v, u]
        if depth <= 0:
            return {"push": {"hit": False}}
        cam = self.robot_camera()
        dirs = cam.pixel_dirs().reshape(H, W, 3)
        point = np.asarray(cam.position) + depth * dirs[v, u]
        normal = frame.normals[v, u]
        try:
            out = self.world.apply_push(point, -normal)
        except InvalidContact:
            return {"push": {"hit": False}}
        return {"push": {"hit": True, "moved": out.moved,
                         "displacement": out.displacement,
                         "applied": out.applied}}


# ---------------------------------------------------------------------------
# Scripted waypoint-following policy (pure pursuit on the layout geodesic)
# ---------------------------------------------------------------------------

def waypoint_follower(obs, max_linear=1.0, max_angular=math.pi,
                      lookahead=0.4):
    goal = obs["goal_relative"]
    wps = obs.get("waypoints")
    target = goal
    if wps is not None and len(wps):
        dist_goal = float(np.linalg.norm(goal))
        for w in wps:
            if float(np.linalg.norm(w)) >= min(lookahead, dist_goal):
                target = w
                break
    alpha = math.atan2(target[1], target[0])
    angular = max(-max_angular, min(max_angular, 2.5 * alpha))
    dist = float(np.linalg.norm(goal))
    linear = max_linear * max(0.0, math.cos(alpha)) * min(1.0, dist / 0.5 + 0.2)
    return np.array([linear, angular])


# ---------------------------------------------------------------------------
# Push-interaction dataset
# ---------------------------------------------------------------------------

def sample_pushes(scene: Scene, camera_poses=None, n_locations: int = 10,
                  pushes_per_location: int = 10, rng=None,
                  resolution: int = 128, max_force: float = 60.0,
                  target_displacement: float = 0.30,
                  robot: RobotSpec | None = None):
    """Render depth/normals from sampled viewpoints and push random visible
    pixels along the negative surface normal; records carry the 10 cm
    success rule. Pushes never accumulate: the world state is restored
    after each record."""
    rng = rng or np.random.default_rng(0)
    world = World(scene, robot=robot or RobotSpec())
    preset = RenderPreset("pushes", resolution, False, False)
    if camera_poses is None:
        camera_poses = _sample_camera_poses(world, scene, n_locations, rng)
    records = []
    baseline = world.get_state()
    for loc, cam in enumerate(camera_poses):
        snap = world.snapshot()
        frame = render(snap, cam, preset, want_rgb=False)
        dirs = cam.pixel_dirs().reshape(resolution, resolution, 3)
        hits = np.argwhere(frame.depth > 0)
        if len(hits) == 0:
            continue
        picks = hits[rng.integers(len(hits), size=pushes_per_location)]
        for v, u in picks:
            from .physics import InvalidContact

            depth = frame.depth[v, u]
            point = np.asarray(cam.position) + depth * dirs[v, u]
            normal = frame.normals[v, u]
            rec = {"location": int(loc), "pixel": [int(u), int(v)],
                   "point": [round(float(x), 6) for x in point],
                   "normal": [round(float(x), 6) for x in normal],
                   "moved": False, "displacement": 0.0, "applied": 0.0,
                   "success": False}
            try:
                out = world.apply_push(point, -normal, max_force=max_force,
                                       target_displacement=target_displacement)
                rec.update({"moved": bool(out.moved),
                            "displacement": round(float(out.displacement), 6),
                            "applied": round(float(out.applied), 6),
                            "success": bool(out.moved)})
            except InvalidContact:
                pass  # grazing unprojection missed the surface; a failed push
            records.append(rec)
            world.set_state(baseline)
    return records


def _sample_camera_poses(world, scene, n_locations, rng, height=1.2):
    poses = []
    if scene.objects:
        centers = [np.asarray(o.bbox.center, dtype=float) for o in scene.objects]
    else:
        centers = [np.zeros(3)]
    grid = WallGrid(scene.walls) if scene.walls else None
    lo = grid.origin + 0.4 if grid else np.zeros(2)
    hi = (grid.origin + np.array([grid.nx, grid.ny]) * grid.resolution - 0.4) \
        if grid else np.ones(2)
    attempts = 0
    while len(poses) < n_locations and attempts < 200 * n_locations:
        attempts += 1
        x, y = rng.uniform(lo, hi)
        if not world.base_free(float(x), float(y)):
            continue
        target = centers[int(rng.integers(len(centers)))]
        eye = (float(x), float(y), height)
        if np.hypot(target[0] - x, target[1] - y) < 0.3:
            continue
        look = (float(target[0]), float(target[1]),
                float(min(target[2] + 0.2, height)))
        poses.append(Camera.look_at(eye, look, width=128, height=128))
    if len(poses) < n_locations:
        raise SamplingFailure("could not sample enough camera poses")
    return poses
