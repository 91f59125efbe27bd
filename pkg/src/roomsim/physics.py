"""Fixed-timestep kinematic / quasi-static world stepping.

One environment step advances exactly four substeps of 1/120 s. The base
follows exact unicycle kinematics and stops at contact (no sliding); arm
joints track targets under per-joint velocity limits; object interaction is
resolved by force/torque balances instead of integrated contact dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import (
    point_box_distance,
    point_box_surface_distance,
    points_obb_distance_2d,
    points_segment_distance_2d,
    segment_box_distance,
    yaw_apply,
    fnv1a64,
    wrap_angle,
)
from .scene import GRAVITY, Scene
from .snapshot import build_snapshot, pose_instance_links

SUBSTEP_DT = 1.0 / 120.0
SUBSTEPS_PER_STEP = 4


class DimensionMismatch(Exception):
    pass


class Unreachable(Exception):
    """No arm configuration reaches the target within tolerance."""


class InvalidContact(Exception):
    """Push point does not lie on any surface."""


@dataclass(frozen=True)
class ArmSpec:
    """Serial arm as joint axis letters ('z' yaw / 'y' pitch) with a link
    translation along local +x after each joint."""

    axes: tuple = ("z", "y", "y", "y")
    lengths: tuple = (0.0, 0.3, 0.25, 0.2)
    limits: tuple = ((-math.pi, math.pi), (-2.2, 2.2), (-2.4, 2.4), (-2.4, 2.4))
    velocity_limits: tuple = (1.0, 1.0, 1.0, 1.0)
    mount: tuple = (0.1, 0.0, 0.5)
    # stowed straight up, inside the base footprint, so driving never leads
    # with the arm
    rest_config: tuple = (0.0, -math.pi / 2, 0.0, 0.0)

    @property
    def dof(self) -> int:
        return len(self.axes)

    @property
    def reach(self) -> float:
        return float(sum(self.lengths))


@dataclass(frozen=True)
class RobotSpec:
    footprint_radius: float = 0.18
    base_height: float = 0.4
    arm: ArmSpec = field(default_factory=ArmSpec)
    capsule_radius: float = 0.045
    camera_offset: tuple = (0.05, 0.0, 1.2)  # in the base frame
    # steep enough that tabletop/floor objects inside arm reach are in view
    camera_pitch: float = 0.7  # downward tilt, radians


@dataclass(frozen=True)
class PhysicsConfig:
    max_linear: float = 1.0  # m/s
    max_angular: float = math.pi  # rad/s
    grasp_range: float = 0.05  # m
    gravity: float = GRAVITY


@dataclass
class ControlCommands:
    linear: float = 0.0
    angular: float = 0.0
    arm_targets: np.ndarray | None = None
    gripper: bool | None = None  # True = open, False = close/grasp


@dataclass
class PushOutcome:
    moved: bool
    displacement: float
    contact_point: tuple
    applied: float  # generalized force: N for free/prismatic, N*m for revolute

    def __post_init__(self):
        assert self.moved == (self.displacement > 0.10)


@dataclass
class WorldState:
    base_x: float
    base_y: float
    base_yaw: float
    base_v: float
    base_w: float
    arm_q: np.ndarray
    gripper_open: bool
    attached: int | None
    grasp_local: tuple | None
    grasp_yaw: float | None
    joint_q: dict  # (instance id, joint index) -> position
    joint_v: dict
    free_poses: dict  # instance id -> (x, y, z, yaw)
    tick: int
    substeps: int

    def copy(self) -> "WorldState":
        return WorldState(
            self.base_x, self.base_y, self.base_yaw, self.base_v, self.base_w,
            self.arm_q.copy(), self.gripper_open, self.attached,
            self.grasp_local, self.grasp_yaw, dict(self.joint_q),
            dict(self.joint_v), dict(self.free_poses), self.tick, self.substeps)


def integrate_unicycle(x, y, yaw, v, w, dt):
    """Exact constant-twist integration over dt."""
    if abs(w) < 1e-12:
        return x + v * math.cos(yaw) * dt, y + v * math.sin(yaw) * dt, yaw
    nx = x + (v / w) * (math.sin(yaw + w * dt) - math.sin(yaw))
    ny = y + (v / w) * (-math.cos(yaw + w * dt) + math.cos(yaw))
    return nx, ny, yaw + w * dt


# ---------------------------------------------------------------------------
# Arm kinematics
# ---------------------------------------------------------------------------

def _axis_rot(axis: str, q: float) -> np.ndarray:
    c, s = math.cos(q), math.sin(q)
    if axis == "z":
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    if axis == "y":
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    raise ValueError(f"unsupported joint axis {axis!r}")


def forward_kinematics(arm: ArmSpec, q) -> tuple:
    """End-effector (position, rotation) in the base frame, plus no side
    effects: returns (pos (3,), R (3,3))."""
    q = np.asarray(q, dtype=float)
    if q.shape != (arm.dof,):
        raise DimensionMismatch(f"expected {arm.dof} joints, got {q.shape}")
    p = np.asarray(arm.mount, dtype=float)
    R = np.eye(3)
    for axis, length, qi in zip(arm.axes, arm.lengths, q):
        R = R @ _axis_rot(axis, qi)
        p = p + R @ np.array([length, 0.0, 0.0])
    return p, R


def arm_joint_points(arm: ArmSpec, q) -> np.ndarray:
    """Chain of frame origins (mount, after each link) for capsule geometry."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(arm.mount, dtype=float)
    R = np.eye(3)
    pts = [p]
    for axis, length, qi in zip(arm.axes, arm.lengths, q):
        R = R @ _axis_rot(axis, qi)
        p = p + R @ np.array([length, 0.0, 0.0])
        pts.append(p)
    return np.asarray(pts)


IK_DAMPING = 0.05
IK_MAX_ITERS = 200
IK_TOLERANCE = 1e-3
IK_FD_STEP = 1e-5


def inverse_kinematics(target, arm: ArmSpec, seed_config=None) -> np.ndarray:
    """Damped-least-squares position IK in the base frame.

    Iterates dq = J^T (J J^T + lambda^2 I)^-1 e with a finite-difference
    Jacobian, clamping joints to limits each iteration.
    """
    target = np.asarray(target, dtype=float)
    if not np.all(np.isfinite(target)):
        raise ValueError("target must be finite")
    if np.linalg.norm(target - np.asarray(arm.mount)) > arm.reach + 1e-9:
        raise Unreachable("target beyond total arm reach")
    lo = np.array([l[0] for l in arm.limits])
    hi = np.array([l[1] for l in arm.limits])
    lam2 = IK_DAMPING ** 2
    # the 200-iteration budget is split over deterministic restarts so a
    # start pinned at a joint limit or a local minimum cannot burn the whole
    # budget; aimed starts point the first yaw joint at the target azimuth
    first = (np.zeros(arm.dof) if seed_config is None
             else np.asarray(seed_config, dtype=float))
    aimed = np.zeros(arm.dof)
    d_xy = target[:2] - np.asarray(arm.mount)[:2]
    az = math.atan2(d_xy[1], d_xy[0]) if np.linalg.norm(d_xy) > 1e-9 else 0.0
    bend = 0.7
    for i, axis in enumerate(arm.axes):
        if axis == "z":
            aimed[i] = az
        else:
            aimed[i] = bend
            bend = -bend
    starts = [first, aimed, aimed * np.where(np.asarray(arm.axes) == "z", 1, -1),
              np.zeros(arm.dof)]
    budget = IK_MAX_ITERS
    per_start = IK_MAX_ITERS // len(starts)
    for si, start in enumerate(starts):
        q = np.clip(np.asarray(start, dtype=float).copy(), lo, hi)
        iters = per_start if si < len(starts) - 1 else budget
        budget -= iters
        for _ in range(iters):
            pos, _ = forward_kinematics(arm, q)
            err = target - pos
            if float(np.linalg.norm(err)) <= IK_TOLERANCE:
                return q
            J = np.empty((3, arm.dof))
            for i in range(arm.dof):
                dq = q.copy()
                dq[i] += IK_FD_STEP
                J[:, i] = (forward_kinematics(arm, dq)[0] - pos) / IK_FD_STEP
            step = J.T @ np.linalg.solve(J @ J.T + lam2 * np.eye(3), err)
            q = np.clip(q + step, lo, hi)
        pos, _ = forward_kinematics(arm, q)
        if float(np.linalg.norm(target - pos)) <= IK_TOLERANCE:
            return q
    raise Unreachable(
        f"no configuration within {IK_TOLERANCE} m after {IK_MAX_ITERS} iterations")


# ---------------------------------------------------------------------------
# World
# ---------------------------------------------------------------------------

class World:
    """Owns the mutable simulation state for one scene + one robot."""

    def __init__(self, scene: Scene, robot: RobotSpec | None = None,
                 config: PhysicsConfig | None = None):
        self.scene = scene
        self.robot = robot or RobotSpec()
        self.config = config or PhysicsConfig()
        self._objects = {o.id: o for o in scene.objects}
        arm = self.robot.arm
        self.state = WorldState(
            base_x=0.0, base_y=0.0, base_yaw=0.0, base_v=0.0, base_w=0.0,
            arm_q=np.asarray(arm.rest_config, dtype=float), gripper_open=True,
            attached=None,
            grasp_local=None, grasp_yaw=None,
            joint_q={(o.id, ji): o.model.joint_default(j)
                     for o in scene.objects for ji, j in enumerate(o.model.joints)},
            joint_v={}, free_poses={}, tick=0, substeps=0)
        self._posed_cache = {}
        self._geom_version = 0
        self._cache_version = -1
        self._flat = None

    # -- state management ---------------------------------------------------

    def get_state(self) -> WorldState:
        return self.state.copy()

    def set_state(self, state: WorldState) -> None:
        self.state = state.copy()
        self._geom_version += 1

    def place_robot(self, x, y, yaw) -> None:
        self.state.base_x, self.state.base_y, self.state.base_yaw = x, y, yaw

    def state_hash(self) -> int:
        s = self.state
        parts = [repr(int(s.tick)), repr(int(s.substeps)),
                 repr(float(s.base_x)), repr(float(s.base_y)), repr(float(s.base_yaw)),
                 repr(float(s.base_v)), repr(float(s.base_w)),
                 ",".join(repr(float(v)) for v in s.arm_q),
                 repr(bool(s.gripper_open)), repr(s.attached),
                 repr(s.grasp_local), repr(s.grasp_yaw)]
        for key in sorted(s.joint_q):
            parts.append(
                f"{key}={float(s.joint_q[key])!r}/{float(s.joint_v.get(key, 0.0))!r}")
        for oid in sorted(s.free_poses):
            pose = s.free_poses[oid]
            parts.append(f"{oid}@" + ",".join(repr(float(x)) for x in pose))
        return fnv1a64("|".join(parts).encode())

    def snapshot(self):
        return build_snapshot(self.scene, self.state.joint_q, self.state.free_poses,
                              robot_pose=(self.state.base_x, self.state.base_y,
                                          self.state.base_yaw))

    # -- posed geometry cache -------------------------------------------------

    def _posed_links(self, oid):
        obj = self._objects[oid]
        cached = self._posed_cache.get(oid)
        if cached is not None and cached[0] == self._geom_version:
            return cached[1]
        q = [self.state.joint_q.get((oid, ji), obj.model.joint_default(j))
             for ji, j in enumerate(obj.model.joints)]
        posed = pose_instance_links(obj, q, self.state.free_poses.get(oid))
        self._posed_cache[oid] = (self._geom_version, posed)
        return posed

    def _flat_boxes(self):
        """Cached arrays over walls + all posed object links.

        Order: walls first (half[1] == 0 marks them), then object links.
        Returns a dict with centers/yaws/cos/sin/halves/ids/corners plus
        derived bounds used for broad-phase rejection.
        """
        if self._flat is None or self._cache_version != self._geom_version:
            centers, yaws, halves, ids = [], [], [], []
            for wall in self.scene.walls:
                a = np.asarray(wall.a)
                b = np.asarray(wall.b)
                mid = (a + b) / 2.0
                centers.append([mid[0], mid[1], wall.height / 2.0])
                yaws.append(math.atan2(b[1] - a[1], b[0] - a[0]))
                halves.append([float(np.linalg.norm(b - a)) / 2.0, 0.0, wall.height / 2.0])
                ids.append(0)
            for oid in self._objects:
                for c, yaw, half in self._posed_links(oid):
                    centers.append(c)
                    yaws.append(yaw)
                    halves.append(half)
                    ids.append(oid)
            M = len(centers)
            c = np.asarray(centers, dtype=float).reshape(M, 3)
            y = np.asarray(yaws, dtype=float)
            h = np.asarray(halves, dtype=float).reshape(M, 3)
            cosv, sinv = np.cos(y), np.sin(y)
            local = np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]], dtype=float)
            corners = np.empty((M, 4, 2))
            lx = local[None, :, 0] * h[:, None, 0]
            ly = local[None, :, 1] * h[:, None, 1]
            corners[..., 0] = cosv[:, None] * lx - sinv[:, None] * ly + c[:, None, 0]
            corners[..., 1] = sinv[:, None] * lx + cosv[:, None] * ly + c[:, None, 1]
            self._flat = {
                "c": c, "yaw": y, "cos": cosv, "sin": sinv, "h": h,
                "ids": np.asarray(ids, dtype=np.int64), "corners": corners,
                "zlo": c[:, 2] - h[:, 2], "zhi": c[:, 2] + h[:, 2],
                "rad": np.hypot(h[:, 0], h[:, 1]),
            }
            self._cache_version = self._geom_version
        return self._flat

    # -- collision ------------------------------------------------------------

    def _box_mask(self, exclude_instance=None):
        f = self._flat_boxes()
        mask = np.ones(len(f["yaw"]), dtype=bool)
        if exclude_instance is not None:
            mask &= f["ids"] != exclude_instance
        if self.state.attached is not None:
            mask &= f["ids"] != self.state.attached
        return f, mask

    def base_free(self, x, y, exclude_instance=None) -> bool:
        return not self._base_contacts((x, y), exclude_instance, first_only=True)

    def base_free_batch(self, pts) -> np.ndarray:
        """Vectorized footprint check for (N, 2) positions."""
        pts = np.asarray(pts, dtype=float)
        f, mask = self._box_mask()
        mask = mask & (f["zlo"] <= self.robot.base_height) & (f["zhi"] >= 0.0)
        if not np.any(mask):
            return np.ones(len(pts), dtype=bool)
        from .geometry import points_boxes_distance_2d

        d = points_boxes_distance_2d(pts, f["c"][mask, :2], f["cos"][mask],
                                     f["sin"][mask], f["h"][mask, :2])
        return ~np.any(d < self.robot.footprint_radius, axis=1)

    def _base_contacts(self, xy, exclude_instance=None, first_only=False):
        r = self.robot.footprint_radius
        f, mask = self._box_mask(exclude_instance)
        mask = mask & (f["zlo"] <= self.robot.base_height) & (f["zhi"] >= 0.0)
        if not np.any(mask):
            return []
        pt = np.asarray([xy], dtype=float)
        from .geometry import points_boxes_distance_2d

        d = points_boxes_distance_2d(pt, f["c"][mask, :2], f["cos"][mask],
                                     f["sin"][mask], f["h"][mask, :2])[0]
        hit = d < r
        if not np.any(hit):
            return []
        contacts = []
        idx = np.nonzero(mask)[0][hit]
        for i in idx:
            name = f"wall:{i}" if f["h"][i, 1] == 0.0 else f"object:{f['ids'][i]}"
            contacts.append(("base", name))
            if first_only:
                break
        return contacts

    def _arm_segments(self, base_pose, arm_q):
        bx, by, byaw = base_pose
        pts = arm_joint_points(self.robot.arm, arm_q)
        world = yaw_apply(byaw, pts) + np.array([bx, by, 0.0])
        keep = np.linalg.norm(world[1:] - world[:-1], axis=1) > 1e-9
        return world, world[:-1][keep], world[1:][keep]

    def _arm_contacts(self, base_pose, arm_q, first_only=False):
        rad = self.robot.capsule_radius
        world_pts, P0, P1 = self._arm_segments(base_pose, arm_q)
        contacts = []
        f, mask = self._box_mask()
        if np.any(mask):
            # broad phase: a sound lower bound on the distance to each box
            center = np.array(base_pose[:2], dtype=float)
            arm_span = float(np.max(np.linalg.norm(
                world_pts[:, :2] - center[None, :], axis=1)))
            horiz = np.hypot(f["c"][:, 0] - center[0], f["c"][:, 1] - center[1])
            zmin, zmax = float(world_pts[:, 2].min()), float(world_pts[:, 2].max())
            near = mask & (horiz - f["rad"] - arm_span <= rad) & \
                (f["zlo"] <= zmax + rad) & (f["zhi"] >= zmin - rad)
            if np.any(near) and len(P0):
                from .geometry import segments_boxes_distance

                d = segments_boxes_distance(P0, P1, f["c"][near], f["cos"][near],
                                            f["sin"][near], f["h"][near],
                                            radius=rad)
                hits = np.argwhere(d < rad)
                idx = np.nonzero(near)[0]
                for si, mi in hits:
                    i = idx[mi]
                    kind = (f"wall:{i}" if f["h"][i, 1] == 0.0
                            else f"object:{f['ids'][i]}")
                    contacts.append((f"arm_link:{si}", kind))
                    if first_only:
                        return contacts
        # floors: a capsule dipping below a room floor counts as contact
        for room in self.scene.rooms:
            if float(world_pts[:, 2].min()) < room.floor_z + rad:
                contacts.append(("arm", f"floor:{room.id}"))
                if first_only:
                    return contacts
                break
        return contacts

    def check_collision(self, base_pose=None, arm_q=None, object_pose=None):
        """Collision query for a robot configuration or an object pose.

        Returns (collides, contacts). Defaults test the current robot state.
        """
        if object_pose is not None:
            oid, pose = object_pose
            contacts = self._object_contacts(oid, pose)
            return bool(contacts), contacts
        s = self.state
        bp = base_pose if base_pose is not None else (s.base_x, s.base_y, s.base_yaw)
        q = arm_q if arm_q is not None else s.arm_q
        contacts = self._base_contacts(bp[:2])
        contacts += self._arm_contacts(bp, q)
        return bool(contacts), contacts

    def _object_contacts(self, oid, pose, posed=None):
        from .geometry import box_boxes_intersect

        contacts = []
        obj = self._objects[oid]
        if posed is None:
            q = [self.state.joint_q.get((oid, ji), obj.model.joint_default(j))
                 for ji, j in enumerate(obj.model.joints)]
            posed = pose_instance_links(obj, q, pose)
        f, mask = self._box_mask(exclude_instance=oid)
        if not np.any(mask):
            return []
        idx = np.nonzero(mask)[0]
        for (pc, pyaw, phalf) in posed:
            hit = box_boxes_intersect(pc, pyaw, phalf, f["c"][mask], f["cos"][mask],
                                      f["sin"][mask], f["h"][mask],
                                      f["corners"][mask])
            for i in idx[hit]:
                name = f"wall:{i}" if f["h"][i, 1] == 0.0 else f"object:{f['ids'][i]}"
                contacts.append((f"object:{oid}", name))
        return contacts

    # -- stepping ---------------------------------------------------------------

    def clamp_commands(self, commands: ControlCommands):
        cfg = self.config
        clamped = []
        v = commands.linear
        w = commands.angular
        if abs(v) > cfg.max_linear:
            v = math.copysign(cfg.max_linear, v)
            clamped.append("linear")
        if abs(w) > cfg.max_angular:
            w = math.copysign(cfg.max_angular, w)
            clamped.append("angular")
        targets = commands.arm_targets
        if targets is not None:
            targets = np.asarray(targets, dtype=float)
            if targets.shape != (self.robot.arm.dof,):
                raise DimensionMismatch(
                    f"arm target length {targets.shape} != {self.robot.arm.dof}")
            lo = np.array([l[0] for l in self.robot.arm.limits])
            hi = np.array([l[1] for l in self.robot.arm.limits])
            cl = np.clip(targets, lo, hi)
            if np.any(cl != targets):
                clamped.append("arm_targets")
            targets = cl
        return ControlCommands(v, w, targets, commands.gripper), clamped

    def step(self, commands: ControlCommands | None = None) -> dict:
        """One environment step: exactly SUBSTEPS_PER_STEP x 1/120 s."""
        info = self.step_substeps(commands, SUBSTEPS_PER_STEP)
        self.state.tick += 1
        return info

    def step_substeps(self, commands: ControlCommands | None, n: int) -> dict:
        commands = commands or ControlCommands()
        commands, clamped = self.clamp_commands(commands)
        s = self.state
        blocked = False
        if commands.gripper is not None:
            if commands.gripper and not s.gripper_open:
                self.release()
            elif not commands.gripper and s.gripper_open:
                self.grasp()
        for _ in range(n):
            blocked = self._substep_base(commands, blocked)
            self._substep_arm(commands)
            self._substep_joints()
            self._follow_attached()
            s.substeps += 1
        return {"clamped": clamped, "blocked": blocked}

    def _robot_free(self, x, y, yaw) -> bool:
        if self._base_contacts((x, y), first_only=True):
            return False
        return not self._arm_contacts((x, y, yaw), self.state.arm_q, first_only=True)

    def _substep_base(self, commands, blocked) -> bool:
        s = self.state
        if blocked:
            s.base_v, s.base_w = 0.0, 0.0
            return True
        v, w = commands.linear, commands.angular
        nx, ny, nyaw = integrate_unicycle(s.base_x, s.base_y, s.base_yaw, v, w, SUBSTEP_DT)
        if self._robot_free(nx, ny, nyaw):
            s.base_x, s.base_y, s.base_yaw = nx, ny, nyaw
            s.base_v, s.base_w = v, w
            return False
        # kinematic stop: bisect the substep for the last contact-free pose
        lo, hi = 0.0, 1.0
        for _ in range(24):
            mid = (lo + hi) / 2.0
            mx, my, myaw = integrate_unicycle(s.base_x, s.base_y, s.base_yaw, v, w,
                                              SUBSTEP_DT * mid)
            if self._robot_free(mx, my, myaw):
                lo = mid
            else:
                hi = mid
        fx, fy, fyaw = integrate_unicycle(s.base_x, s.base_y, s.base_yaw, v, w,
                                          SUBSTEP_DT * lo)
        s.base_x, s.base_y, s.base_yaw = fx, fy, fyaw
        s.base_v, s.base_w = 0.0, 0.0
        return True

    def _substep_arm(self, commands):
        s = self.state
        if commands.arm_targets is None:
            return
        vel = np.asarray(self.robot.arm.velocity_limits, dtype=float)
        delta = np.clip(commands.arm_targets - s.arm_q,
                        -vel * SUBSTEP_DT, vel * SUBSTEP_DT)
        if not np.any(delta):
            return
        lo = np.array([l[0] for l in self.robot.arm.limits])
        hi = np.array([l[1] for l in self.robot.arm.limits])
        candidate = np.clip(s.arm_q + delta, lo, hi)
        bp = (s.base_x, s.base_y, s.base_yaw)
        if self._arm_contacts(bp, candidate, first_only=True):
            return  # hold the previous configuration for this substep
        s.arm_q = candidate

    def _substep_joints(self):
        """Integrate and damp residual joint velocities (usually zero)."""
        s = self.state
        if not s.joint_v:
            return
        moved = False
        for key, v in list(s.joint_v.items()):
            if v == 0.0:
                continue
            oid, ji = key
            joint = self._objects[oid].model.joints[ji]
            q = s.joint_q[key] + v * SUBSTEP_DT
            lo, hi = joint.limits
            if q <= lo:
                q, v = lo, 0.0
            elif q >= hi:
                q, v = hi, 0.0
            else:
                v = v * math.exp(-joint.damping * SUBSTEP_DT)
                if abs(v) < 1e-6:
                    v = 0.0
            s.joint_q[key] = q
            s.joint_v[key] = v
            moved = True
        if moved:
            self._geom_version += 1

    # -- end effector, grasping -----------------------------------------------

    def ee_pose(self):
        """(position (3,), yaw) of the end effector in the world frame."""
        s = self.state
        pos, R = forward_kinematics(self.robot.arm, s.arm_q)
        world = yaw_apply(s.base_yaw, pos) + np.array([s.base_x, s.base_y, 0.0])
        ee_yaw = s.base_yaw + math.atan2(R[1, 0], R[0, 0])
        return world, ee_yaw

    def _instance_anchor_pose(self, oid):
        obj = self._objects[oid]
        if oid in self.state.free_poses:
            return self.state.free_poses[oid]
        c = obj.bbox.center
        return (c[0], c[1], c[2], obj.bbox.yaw)

    def grasp(self) -> None:
        """Close the gripper; attach the nearest non-static object within range."""
        s = self.state
        s.gripper_open = False
        ee, ee_yaw = self.ee_pose()
        best = (math.inf, None)
        for oid, obj in self._objects.items():
            if obj.static:
                continue
            for c, yaw, half in self._posed_links(oid):
                d = point_box_distance(ee, c, yaw, half)
                if d < best[0]:
                    best = (d, oid)
        if best[1] is None or best[0] > self.config.grasp_range:
            return
        oid = best[1]
        px, py, pz, pyaw = self._instance_anchor_pose(oid)
        rel = np.array([px, py, pz]) - ee
        s.attached = oid
        s.grasp_local = tuple(float(v) for v in yaw_apply(-ee_yaw, rel))
        s.grasp_yaw = float(pyaw - ee_yaw)

    def release(self) -> None:
        """Open the gripper; a held object settles onto the support below."""
        s = self.state
        s.gripper_open = True
        if s.attached is None:
            return
        oid = s.attached
        s.attached = None
        s.grasp_local = None
        s.grasp_yaw = None
        self._settle(oid)

    def _follow_attached(self):
        s = self.state
        if s.attached is None:
            return
        ee, ee_yaw = self.ee_pose()
        p = ee + yaw_apply(ee_yaw, np.asarray(s.grasp_local))
        s.free_poses[s.attached] = (float(p[0]), float(p[1]), float(p[2]),
                                    ee_yaw + s.grasp_yaw)
        self._geom_version += 1

    def _settle(self, oid) -> None:
        """Drop the object straight down onto the highest support plane."""
        posed = self._posed_links(oid)
        bottom = min(c[2] - h[2] for c, _, h in posed)
        cx, cy = np.mean([c[:2] for c, _, _ in posed], axis=0)
        support = -math.inf
        for room in self.scene.rooms:
            from .geometry import point_in_polygon

            if point_in_polygon((cx, cy), room.polygon):
                support = max(support, room.floor_z)
        f, mask = self._box_mask(exclude_instance=oid)
        c, yaws, h = f["c"], f["yaw"], f["h"]
        pt = np.asarray([[cx, cy]])
        for i in np.nonzero(mask)[0]:
            if h[i, 1] == 0.0:
                continue
            top = c[i, 2] + h[i, 2]
            if top <= bottom + 1e-6 and points_obb_distance_2d(
                    pt, c[i, :2], yaws[i], h[i, :2])[0] == 0.0:
                support = max(support, top)
        if support == -math.inf:
            support = 0.0
        dz = support - bottom
        px, py, pz, pyaw = self._instance_anchor_pose(oid)
        self.state.free_poses[oid] = (px, py, pz + dz, pyaw)
        self._geom_version += 1

    # -- quasi-static pushing ----------------------------------------------------

    def apply_push(self, point, direction, max_force=60.0,
                   target_displacement=0.30) -> PushOutcome:
        """Resolve a push by force/torque balance.

        Static roots do not move; free bodies overcome sliding friction
        mu*m*g; jointed links overcome the joint's resistance with the force
        projected on the contact's motion direction. Displacement is the
        contact point's path length, capped by limits, collisions and the
        target displacement.
        """
        point = np.asarray(point, dtype=float)
        direction = np.asarray(direction, dtype=float)
        direction = direction / np.linalg.norm(direction)
        hit = self._find_surface(point)
        if hit is None:
            raise InvalidContact(f"point {point.tolist()} not on any surface")
        kind, oid, link_idx = hit
        if kind == "wall":
            return PushOutcome(False, 0.0, tuple(point), float(max_force))
        obj = self._objects[oid]
        parent_joint = {j.child: ji for ji, j in enumerate(obj.model.joints)}
        if link_idx in parent_joint:
            return self._push_joint(obj, parent_joint[link_idx], point, direction,
                                    max_force, target_displacement)
        if obj.static:
            return PushOutcome(False, 0.0, tuple(point), float(max_force))
        return self._push_free(obj, point, direction, max_force, target_displacement)

    def _find_surface(self, point, tol=1e-3):
        """Surface under the point. Flush faces tie toward the movable part:
        a jointed link wins over a welded/root link, which wins over a wall,
        so pushes on panel fronts actuate the panel, not the body behind it."""
        candidates = []
        f = self._flat_boxes()
        for i in range(len(self.scene.walls)):
            d = point_box_surface_distance(point, f["c"][i], f["yaw"][i], f["h"][i])
            candidates.append((d, 2, ("wall", 0, -1)))
        for oid in self._objects:
            obj = self._objects[oid]
            jointed = {j.child for j in obj.model.joints}
            for li, (pc, pyaw, phalf) in enumerate(self._posed_links(oid)):
                d = point_box_surface_distance(point, pc, pyaw, phalf)
                rank = 0 if li in jointed else 1
                candidates.append((d, rank, ("link", oid, li)))
        near = [c for c in candidates if c[0] <= tol]
        if not near:
            return None
        near.sort(key=lambda c: (c[1], c[0], c[2][1], c[2][2]))
        return near[0][2]

    def _push_free(self, obj, point, direction, max_force, target):
        mu = obj.model.links[obj.model.root_link].resolved_friction(self.scene.materials)
        mass = obj.model.total_mass(self.scene.materials)
        resistance = mu * mass * self.config.gravity
        if max_force <= resistance:
            return PushOutcome(False, 0.0, tuple(point), float(max_force))
        d_xy = np.array([direction[0], direction[1], 0.0]) * target
        span = float(np.linalg.norm(d_xy))
        if span < 1e-12:
            return PushOutcome(False, 0.0, tuple(point), float(max_force))
        unit = d_xy / span
        oid = obj.id
        px, py, pz, pyaw = self._instance_anchor_pose(oid)

        def pose_at(dist):
            return (float(px + unit[0] * dist), float(py + unit[1] * dist),
                    float(pz), float(pyaw))

        moved_dist = self._max_free_travel(
            lambda dist: not self._object_contacts(oid, pose_at(dist)), span)
        if moved_dist > 0.0:
            self.state.free_poses[oid] = pose_at(moved_dist)
            self._geom_version += 1
        return PushOutcome(moved_dist > 0.10, float(moved_dist), tuple(point),
                           float(max_force))

    def _push_joint(self, obj, ji, point, direction, max_force, target):
        joint = obj.model.joints[ji]
        oid = obj.id
        key = (oid, ji)
        q0 = self.state.joint_q[key]
        px, py, pz, pyaw = self._instance_anchor_pose(oid)
        anchor_w = yaw_apply(pyaw, np.asarray(joint.anchor, dtype=float)) + \
            np.array([px, py, pz])
        if joint.kind == "prismatic":
            axis_w = yaw_apply(pyaw, np.asarray(joint.axis, dtype=float))
            f_gen = float(max_force * (direction @ axis_w))
            applied = f_gen
            if abs(f_gen) <= joint.friction:
                return PushOutcome(False, 0.0, tuple(point), applied)
            sigma = math.copysign(1.0, f_gen)
            contact_per_q = 1.0
        else:
            axis_sign = 1.0 if joint.axis[2] > 0 else -1.0
            r = point - anchor_w
            F = max_force * direction
            tau = axis_sign * (r[0] * F[1] - r[1] * F[0])
            applied = float(tau)
            if abs(tau) <= joint.friction:
                return PushOutcome(False, 0.0, tuple(point), applied)
            sigma = math.copysign(1.0, tau)
            r_perp = math.hypot(r[0], r[1])
            if r_perp < 1e-9:
                return PushOutcome(False, 0.0, tuple(point), applied)
            contact_per_q = r_perp
        dq_target = sigma * target / contact_per_q
        lo, hi = joint.limits
        dq_max = (hi - q0) if sigma > 0 else (q0 - lo)
        span = min(abs(dq_target), dq_max)
        if span <= 0.0:
            return PushOutcome(False, 0.0, tuple(point), applied)

        subtree = self._joint_subtree(obj, ji)

        def free_at(mag):
            q = dict(self.state.joint_q)
            q[key] = q0 + sigma * mag
            posed_all = pose_instance_links(
                obj, [q.get((oid, k), obj.model.joint_default(jj))
                      for k, jj in enumerate(obj.model.joints)],
                self.state.free_poses.get(oid))
            posed = [posed_all[li] for li in subtree]
            return not self._moving_links_contacts(oid, posed)

        moved_q = self._max_free_travel(free_at, span)
        if moved_q > 0.0:
            self.state.joint_q[key] = q0 + sigma * moved_q
            self._geom_version += 1
        displacement = moved_q * contact_per_q
        return PushOutcome(displacement > 0.10, float(displacement), tuple(point),
                           applied)

    def _joint_subtree(self, obj, ji):
        """Link indices moved by joint ji (child and its descendants)."""
        children = {}
        for k, j in enumerate(obj.model.joints):
            children.setdefault(j.parent, []).append(j.child)
        out = []
        stack = [obj.model.joints[ji].child]
        while stack:
            li = stack.pop()
            out.append(li)
            stack.extend(children.get(li, []))
        return out

    def _moving_links_contacts(self, oid, posed):
        """Moving-subtree links vs all geometry outside the instance."""
        from .geometry import box_boxes_intersect

        f, mask = self._box_mask(exclude_instance=oid)
        if not np.any(mask):
            return False
        for (pc, pyaw, phalf) in posed:
            if np.any(box_boxes_intersect(pc, pyaw, phalf, f["c"][mask],
                                          f["cos"][mask], f["sin"][mask],
                                          f["h"][mask], f["corners"][mask])):
                return True
        return False

    @staticmethod
    def _max_free_travel(free_at, span, scan=24, bisect=26):
        """Largest s in [0, span] with free_at(s') for sampled s' <= s."""
        if free_at(span):
            return span
        lo = 0.0
        hi = span
        for k in range(1, scan + 1):
            s = span * k / scan
            if not free_at(s):
                hi = s
                lo = span * (k - 1) / scan
                break
        for _ in range(bisect):
            mid = (lo + hi) / 2.0
            if free_at(mid):
                lo = mid
            else:
                hi = mid
        return lo
