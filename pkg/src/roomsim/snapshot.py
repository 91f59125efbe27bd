"""Flattened, immutable geometry view of a posed scene.

A snapshot lists every primitive once: yaw-boxes (object links first, then
walls as zero-thickness boxes), followed by horizontal planes (floors, then
ceilings). Rendering, LiDAR and collision all consume these arrays, so they
agree on geometry by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import yaw_apply
from .scene import Scene, class_id

WALL_CLASS = class_id("wall")
FLOOR_CLASS = class_id("floor")
CEILING_CLASS = class_id("ceiling")


@dataclass
class Snapshot:
    # boxes: object links [0, n_link_boxes) then walls [n_link_boxes, n_boxes)
    box_center: np.ndarray  # (M, 3)
    box_yaw: np.ndarray  # (M,)
    box_half: np.ndarray  # (M, 3)
    box_instance: np.ndarray  # (M,) int64, 0 for walls
    box_link: np.ndarray  # (M,) int64, -1 for walls
    box_class: np.ndarray  # (M,) int64 semantic ids
    box_static: np.ndarray  # (M,) bool
    box_albedo: np.ndarray  # (M, 3)
    box_rough: np.ndarray  # (M,)
    box_metal: np.ndarray  # (M,)
    n_link_boxes: int
    # horizontal planes: floors then ceilings
    plane_z: np.ndarray  # (P,)
    plane_ceiling: np.ndarray  # (P,) bool
    plane_class: np.ndarray  # (P,) int64
    plane_albedo: np.ndarray  # (P, 3)
    plane_rough: np.ndarray  # (P,)
    plane_metal: np.ndarray  # (P,)
    poly_xy: np.ndarray  # concatenated polygon vertices (V, 2)
    poly_off: np.ndarray  # (P+1,) offsets into poly_xy
    lights: tuple
    robot_pose: tuple | None = None  # (x, y, yaw) when built from a world
    scene: Scene | None = None

    @property
    def n_boxes(self) -> int:
        return len(self.box_yaw)

    @property
    def n_planes(self) -> int:
        return len(self.plane_z)

    @property
    def n_prims(self) -> int:
        return self.n_boxes + self.n_planes

    def prim_key(self, prim: int):
        """Stable identity of a primitive: ('box', instance, link) or ('plane', i)."""
        if prim < self.n_boxes:
            return ("box", int(self.box_instance[prim]), int(self.box_link[prim]))
        return ("plane", prim - self.n_boxes)

    def prim_instance(self, prim) -> np.ndarray:
        """Instance id per primitive index array (0 for structure/background)."""
        prim = np.asarray(prim)
        inst = np.zeros(prim.shape, dtype=np.int64)
        isbox = (prim >= 0) & (prim < self.n_boxes)
        inst[isbox] = self.box_instance[prim[isbox]]
        return inst

    def prim_semantic(self, prim) -> np.ndarray:
        prim = np.asarray(prim)
        sem = np.zeros(prim.shape, dtype=np.int64)
        isbox = (prim >= 0) & (prim < self.n_boxes)
        sem[isbox] = self.box_class[prim[isbox]]
        isplane = prim >= self.n_boxes
        sem[isplane] = self.plane_class[prim[isplane] - self.n_boxes]
        return sem

    def bounds(self):
        """Conservative (lo, hi) of all geometry, for scene-exit tests."""
        lo = np.full(3, np.inf)
        hi = np.full(3, -np.inf)
        if self.n_boxes:
            r = np.linalg.norm(self.box_half, axis=1)
            lo = np.minimum(lo, (self.box_center - r[:, None]).min(axis=0))
            hi = np.maximum(hi, (self.box_center + r[:, None]).max(axis=0))
        if len(self.poly_xy):
            lo[:2] = np.minimum(lo[:2], self.poly_xy.min(axis=0))
            hi[:2] = np.maximum(hi[:2], self.poly_xy.max(axis=0))
            lo[2] = min(lo[2], float(self.plane_z.min()))
            hi[2] = max(hi[2], float(self.plane_z.max()))
        return lo, hi


def pose_instance_links(obj, joint_positions=None, pose_override=None):
    """World (center, yaw, half) per link of one instance.

    pose_override replaces the bbox anchor pose with (x, y, z, yaw) for free
    bodies that have been pushed or carried.
    """
    if pose_override is not None:
        ax, ay, az, ayaw = pose_override
    else:
        ax, ay, az = obj.bbox.center
        ayaw = obj.bbox.yaw
    anchor = np.array([ax, ay, az])
    out = []
    for (center, yaw), link in zip(obj.model.link_poses(joint_positions), obj.model.links):
        world_c = anchor + yaw_apply(ayaw, center)
        out.append((world_c, ayaw + yaw, np.asarray(link.half_extents, dtype=float)))
    return out


def build_snapshot(scene: Scene, joint_positions=None, free_poses=None,
                   robot_pose=None) -> Snapshot:
    """Pose every link and flatten the scene into primitive arrays.

    joint_positions: {(instance_id, joint_index): value}; defaults per model.
    free_poses: {instance_id: (x, y, z, yaw)} overrides for movable bodies.
    """
    joint_positions = joint_positions or {}
    free_poses = free_poses or {}
    centers, yaws, halves = [], [], []
    inst, linkidx, cls, static = [], [], [], []
    albedo, rough, metal = [], [], []

    for obj in scene.objects:
        q = [joint_positions.get((obj.id, ji), obj.model.joint_default(j))
             for ji, j in enumerate(obj.model.joints)]
        posed = pose_instance_links(obj, q, free_poses.get(obj.id))
        sem = class_id(obj.class_label)
        for li, (c, yaw, half) in enumerate(posed):
            m = scene.materials[obj.model.links[li].material]
            centers.append(c)
            yaws.append(yaw)
            halves.append(half)
            inst.append(obj.id)
            linkidx.append(li)
            cls.append(sem)
            static.append(obj.static)
            albedo.append(m.albedo)
            rough.append(m.roughness)
            metal.append(m.metallic)
    n_link_boxes = len(centers)

    for wall in scene.walls:
        a = np.asarray(wall.a, dtype=float)
        b = np.asarray(wall.b, dtype=float)
        mid = (a + b) / 2.0
        length = float(np.linalg.norm(b - a))
        yaw = math.atan2(b[1] - a[1], b[0] - a[0])
        m = scene.materials[wall.material]
        centers.append(np.array([mid[0], mid[1], wall.height / 2.0]))
        yaws.append(yaw)
        halves.append(np.array([length / 2.0, 0.0, wall.height / 2.0]))
        inst.append(0)
        linkidx.append(-1)
        cls.append(WALL_CLASS)
        static.append(True)
        albedo.append(m.albedo)
        rough.append(m.roughness)
        metal.append(m.metallic)

    plane_z, plane_ceiling, plane_class = [], [], []
    plane_albedo, plane_rough, plane_metal = [], [], []
    polys = []
    for room in scene.rooms:
        fm = scene.materials[room.floor_material]
        plane_z.append(room.floor_z)
        plane_ceiling.append(False)
        plane_class.append(FLOOR_CLASS)
        plane_albedo.append(fm.albedo)
        plane_rough.append(fm.roughness)
        plane_metal.append(fm.metallic)
        polys.append(np.asarray(room.polygon, dtype=float))
    for room in scene.rooms:
        cm = scene.materials[room.ceiling_material]
        plane_z.append(room.ceiling_z)
        plane_ceiling.append(True)
        plane_class.append(CEILING_CLASS)
        plane_albedo.append(cm.albedo)
        plane_rough.append(cm.roughness)
        plane_metal.append(cm.metallic)
        polys.append(np.asarray(room.polygon, dtype=float))

    off = [0]
    for p in polys:
        off.append(off[-1] + len(p))
    poly_xy = np.concatenate(polys, axis=0) if polys else np.zeros((0, 2))

    M = len(centers)
    return Snapshot(
        box_center=np.asarray(centers, dtype=float).reshape(M, 3),
        box_yaw=np.asarray(yaws, dtype=float),
        box_half=np.asarray(halves, dtype=float).reshape(M, 3),
        box_instance=np.asarray(inst, dtype=np.int64),
        box_link=np.asarray(linkidx, dtype=np.int64),
        box_class=np.asarray(cls, dtype=np.int64),
        box_static=np.asarray(static, dtype=bool),
        box_albedo=np.asarray(albedo, dtype=float).reshape(M, 3),
        box_rough=np.asarray(rough, dtype=float),
        box_metal=np.asarray(metal, dtype=float),
        n_link_boxes=n_link_boxes,
        plane_z=np.asarray(plane_z, dtype=float),
        plane_ceiling=np.asarray(plane_ceiling, dtype=bool),
        plane_class=np.asarray(plane_class, dtype=np.int64),
        plane_albedo=np.asarray(plane_albedo, dtype=float).reshape(len(plane_z), 3),
        plane_rough=np.asarray(plane_rough, dtype=float),
        plane_metal=np.asarray(plane_metal, dtype=float),
        poly_xy=poly_xy,
        poly_off=np.asarray(off, dtype=np.int64),
        lights=tuple(scene.lights),
        robot_pose=robot_pose,
        scene=scene,
    )
