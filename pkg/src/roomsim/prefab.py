"""Procedural scenes and articulated models for demos, tests and benchmarks.

No mesh assets anywhere: every model is a handful of extruded boxes, which
is enough to exercise sensing, physics, planning and randomization.
"""

from __future__ import annotations

import math

import numpy as np

from .scene import (
    ArticulatedObject,
    Joint,
    Light,
    Link,
    ObjectInstance,
    OrientedBBox,
    Room,
    Scene,
    WallSegment,
    fill_bounding_box,
    translate_model,
    validate_scene,
)

DEFAULT_CEILING = 2.5


def rect_room(width, depth, height=DEFAULT_CEILING, origin=(0.0, 0.0)):
    """Axis-aligned rectangular room: 4 walls + floor/ceiling polygons."""
    x0, y0 = origin
    x1, y1 = x0 + width, y0 + depth
    corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    walls = [
        WallSegment(a=corners[i], b=corners[(i + 1) % 4], height=height)
        for i in range(4)
    ]
    room = Room(id=0, polygon=tuple(corners), floor_z=0.0, ceiling_z=height)
    return room, walls


def box_model(half_extents, material="wood_oak", mass=None, density=None):
    """Single rigid extruded box centered at the model origin."""
    return ArticulatedObject(links=(Link(
        offset=(0.0, 0.0, 0.0), yaw=0.0, half_extents=tuple(half_extents),
        material=material, mass=mass, density=density),))


def table_model(material="wood_oak"):
    top = Link(offset=(0.0, 0.0, 0.35), yaw=0.0, half_extents=(0.5, 0.35, 0.025),
               material=material)
    pedestal = Link(offset=(0.0, 0.0, 0.1625), yaw=0.0, half_extents=(0.08, 0.08, 0.1625),
                    material=material)
    return ArticulatedObject(links=(top, pedestal))


def chair_model(material="wood_pine"):
    seat = Link(offset=(0.0, 0.0, 0.225), yaw=0.0, half_extents=(0.22, 0.22, 0.025),
                material=material)
    back = Link(offset=(-0.19, 0.0, 0.45), yaw=0.0, half_extents=(0.03, 0.22, 0.2),
                material=material)
    legs = Link(offset=(0.0, 0.0, 0.1), yaw=0.0, half_extents=(0.2, 0.2, 0.1),
                material=material)
    return ArticulatedObject(links=(seat, back, legs))


def door_model(width=0.9, height=2.0, thickness=0.04, friction=4.0,
               material="wood_walnut", open_limit=math.pi / 2):
    """Swinging panel hinged on a z revolute joint at its -x edge.

    Link 0 is a thin static-ish hinge post; link 1 the panel. The panel's
    motion anchor sits at the post so torque levers measure from the hinge
    line.
    """
    post = Link(offset=(-width / 2, 0.0, height / 2), yaw=0.0,
                half_extents=(0.02, thickness / 2, height / 2), material=material)
    panel = Link(offset=(0.0, 0.0, height / 2), yaw=0.0,
                 half_extents=(width / 2, thickness / 2, height / 2), material=material)
    hinge = Joint(kind="revolute", parent=0, child=1, axis=(0.0, 0.0, 1.0),
                  anchor=(-width / 2, 0.0, 0.0), limits=(0.0, open_limit),
                  friction=friction, damping=0.1)
    return ArticulatedObject(links=(post, panel), joints=(hinge,), root_link=0)


def drawer_model(friction=8.0, material="wood_oak", travel=0.35):
    """Cabinet body with one sliding drawer on a +x prismatic joint."""
    body = Link(offset=(0.0, 0.0, 0.4), yaw=0.0, half_extents=(0.25, 0.3, 0.4),
                material=material)
    drawer = Link(offset=(0.05, 0.0, 0.55), yaw=0.0, half_extents=(0.2, 0.27, 0.12),
                  material=material)
    slide = Joint(kind="prismatic", parent=0, child=1, axis=(1.0, 0.0, 0.0),
                  anchor=(0.0, 0.0, 0.55), limits=(0.0, travel),
                  friction=friction, damping=0.1)
    return ArticulatedObject(links=(body, drawer), joints=(slide,), root_link=0)


def mug_model(material="ceramic_white"):
    return box_model((0.045, 0.045, 0.05), material=material, mass=0.3)


DEFAULT_ASSET_POOL = {
    "table": [table_model(), table_model("wood_walnut")],
    "chair": [chair_model(), chair_model("wood_oak")],
    "door": [door_model()],
    "cabinet": [drawer_model(), drawer_model(material="wood_walnut")],
    "mug": [mug_model(), mug_model("ceramic_terracotta")],
    "box": [box_model((0.5, 0.5, 0.5)), box_model((0.5, 0.5, 0.5), "plastic_white")],
}

DEFAULT_LIGHTS = (
    Light(kind="directional", direction=(0.0, 0.0, -1.0), intensity=(1.0, 1.0, 1.0)),
    Light(kind="point", position=(0.0, 0.0, 2.2), intensity=(2.0, 2.0, 2.0)),
)


def empty_room_scene(width=10.0, depth=10.0, height=DEFAULT_CEILING,
                     name="empty-room", seed=0):
    room, walls = rect_room(width, depth, height)
    return validate_scene(Scene(name=name, rooms=(room,), walls=tuple(walls),
                                lights=DEFAULT_LIGHTS, rng_seed=seed))


def corridor_scene(length=3.0, width=1.0, name="corridor"):
    room, walls = rect_room(length, width)
    return validate_scene(Scene(name=name, rooms=(room,), walls=tuple(walls),
                                lights=DEFAULT_LIGHTS))


def door_scene(joint_friction=24.0, door_width=0.9, name="door-room"):
    """A hinged door in the middle of a 4x4 room, unobstructed swing."""
    room, walls = rect_room(4.0, 4.0)
    model = door_model(width=door_width, friction=joint_friction)
    lo, hi = model.native_aabb()
    mid = (lo + hi) / 2.0
    model = translate_model(model, -mid)
    half = tuple((hi - lo) / 2.0)
    bbox = OrientedBBox(center=(2.0, 2.0, float(half[2])), yaw=0.0, half_extents=half)
    door = ObjectInstance(id=1, class_label="door", bbox=bbox, model=model, static=True)
    return validate_scene(Scene(name=name, rooms=(room,), walls=tuple(walls),
                                objects=(door,), lights=DEFAULT_LIGHTS))


def furniture_scene(n_objects=20, width=10.0, depth=10.0, seed=0,
                    name="furniture", with_cabinet=True, with_mug=False):
    """Grid-scattered tables/chairs/boxes, deterministic for a seed."""
    rng = np.random.default_rng(seed)
    room, walls = rect_room(width, depth)
    objects = []
    cols = max(2, int(math.ceil(math.sqrt(n_objects))))
    pitch_x = (width - 2.0) / cols
    pitch_y = (depth - 2.0) / cols
    classes = ["table", "chair", "box"]
    oid = 1
    for k in range(n_objects):
        gx, gy = k % cols, k // cols
        cx = 1.0 + (gx + 0.5) * pitch_x + rng.uniform(-0.1, 0.1)
        cy = 1.0 + (gy + 0.5) * pitch_y + rng.uniform(-0.1, 0.1)
        label = classes[k % len(classes)]
        if with_cabinet and k == 0:
            label = "cabinet"
        if with_mug and k == 1:
            label = "mug"
        model = DEFAULT_ASSET_POOL[label][0]
        lo, hi = model.native_aabb()
        native = (hi - lo) / 2.0
        s = rng.uniform(0.8, 1.1)
        half = tuple(float(v) for v in native * s)
        bbox = OrientedBBox(center=(cx, cy, float(half[2])),
                            yaw=float(rng.uniform(-math.pi, math.pi)),
                            half_extents=half)
        objects.append(fill_bounding_box(bbox, model, instance_id=oid,
                                         class_label=label,
                                         static=bool(label == "cabinet"),
                                         room_id=0))
        oid += 1
    return validate_scene(Scene(name=name, rooms=(room,), walls=tuple(walls),
                                objects=tuple(objects), lights=DEFAULT_LIGHTS,
                                rng_seed=seed))
