"""Scene data model, document format and scene-level tooling.

A scene is a set of rooms (horizontal floor/ceiling polygons), vertical wall
segments, class-labeled articulated object instances, lights and a material
table. Scene values are immutable by convention: every transforming
operation returns a new scene.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import boxes_intersect, fnv1a64, polygon_is_simple, yaw_apply


class ParseError(Exception):
    """Document is not structurally valid."""


class ValidationError(Exception):
    """An invariant is violated; message names the field path."""


class DegenerateModel(Exception):
    """Model has zero native extent on some axis."""


class ImportError_(Exception):
    """Floorplan layout is structurally invalid."""


GRAVITY = 9.81

# 57-entry class vocabulary: furniture plus common small objects.
CLASS_VOCABULARY = [
    "wall", "floor", "ceiling", "door", "window", "table", "desk", "chair",
    "stool", "bench", "sofa", "bed", "cabinet", "drawer_unit", "wardrobe",
    "shelf", "bookcase", "dresser", "nightstand", "counter", "sink",
    "stove", "oven", "microwave", "fridge", "dishwasher", "washer",
    "dryer", "toilet", "bathtub", "shower", "mirror", "tv", "monitor",
    "laptop", "speaker", "lamp", "chandelier", "fan", "heater", "plant",
    "vase", "picture", "clock", "rug", "curtain", "pillow", "basket",
    "trash_can", "box", "bottle", "mug", "bowl", "plate", "pot", "pan",
    "toy",
]

# Semantic ids: 0 is background (no hit); classes follow vocabulary order.
SEMANTIC_BACKGROUND = 0


def class_id(label: str) -> int:
    return 1 + CLASS_VOCABULARY.index(label)


@dataclass(frozen=True)
class Material:
    albedo: tuple  # RGB in [0,1]
    roughness: float
    metallic: float
    friction: float  # dimensionless, >= 0
    density: float  # kg/m^3, > 0


def material_family(name: str) -> str:
    """Family is the name prefix before the first underscore (wood_oak -> wood)."""
    return name.split("_", 1)[0]


# Built-in material table. Friction and density values are a documented
# stand-in curated from common engineering references, keyed wood_*/metal_*
# etc so that families group under a shared prefix.
BUILTIN_MATERIALS = {
    "wood_oak": Material((0.55, 0.38, 0.22), 0.65, 0.0, 0.40, 720.0),
    "wood_pine": Material((0.72, 0.55, 0.34), 0.70, 0.0, 0.42, 510.0),
    "wood_walnut": Material((0.36, 0.24, 0.15), 0.60, 0.0, 0.38, 640.0),
    "metal_steel": Material((0.62, 0.62, 0.65), 0.35, 1.0, 0.25, 7850.0),
    "metal_aluminum": Material((0.80, 0.81, 0.83), 0.40, 1.0, 0.30, 2700.0),
    "metal_brass": Material((0.78, 0.62, 0.30), 0.30, 1.0, 0.28, 8500.0),
    "marble_white": Material((0.86, 0.85, 0.82), 0.25, 0.0, 0.35, 2700.0),
    "marble_black": Material((0.18, 0.18, 0.20), 0.22, 0.0, 0.35, 2700.0),
    "fabric_linen": Material((0.76, 0.72, 0.63), 0.92, 0.0, 0.60, 300.0),
    "fabric_denim": Material((0.25, 0.32, 0.52), 0.95, 0.0, 0.62, 350.0),
    "ceramic_white": Material((0.90, 0.90, 0.88), 0.18, 0.0, 0.40, 2300.0),
    "ceramic_terracotta": Material((0.68, 0.38, 0.26), 0.55, 0.0, 0.45, 2000.0),
    "glass_clear": Material((0.70, 0.74, 0.76), 0.08, 0.0, 0.20, 2500.0),
    "plastic_white": Material((0.88, 0.88, 0.86), 0.45, 0.0, 0.30, 950.0),
    "plastic_black": Material((0.08, 0.08, 0.08), 0.50, 0.0, 0.32, 1050.0),
    "rubber_black": Material((0.06, 0.06, 0.06), 0.90, 0.0, 0.90, 1100.0),
    "stone_gray": Material((0.48, 0.47, 0.45), 0.75, 0.0, 0.55, 2600.0),
    "carpet_beige": Material((0.70, 0.64, 0.52), 0.98, 0.0, 0.70, 250.0),
    "paint_white": Material((0.85, 0.85, 0.84), 0.80, 0.0, 0.45, 1400.0),
    "paint_gray": Material((0.55, 0.56, 0.57), 0.80, 0.0, 0.45, 1400.0),
}


@dataclass(frozen=True)
class Link:
    """Extruded box: offset/yaw in the model frame, half extents in meters."""

    offset: tuple  # (x, y, z)
    yaw: float
    half_extents: tuple  # (hx, hy, hz)
    material: str
    mass: float | None = None  # kg; when None, density * volume is used
    density: float | None = None  # kg/m^3; None falls back to the material
    friction: float | None = None  # sliding friction override, None = material

    @property
    def volume(self) -> float:
        hx, hy, hz = self.half_extents
        return 8.0 * hx * hy * hz

    def resolved_mass(self, table) -> float:
        if self.mass is not None:
            return self.mass
        density = self.density
        if density is None:
            density = table[self.material].density
        return density * self.volume

    def resolved_friction(self, table) -> float:
        if self.friction is not None:
            return self.friction
        return table[self.material].friction


@dataclass(frozen=True)
class Joint:
    kind: str  # "revolute" | "prismatic"
    parent: int  # link index
    child: int  # link index
    axis: tuple  # unit vector; revolute axes must be +-z (2.5D geometry)
    anchor: tuple  # point in the model frame
    limits: tuple  # (lo, hi), radians or meters
    friction: float = 0.0  # resistance torque N*m or force N
    damping: float = 0.0
    initial: float | None = None  # default: 0 clipped into limits


@dataclass(frozen=True)
class ArticulatedObject:
    links: tuple  # of Link
    joints: tuple = ()  # of Joint
    root_link: int = 0

    def joint_default(self, j: Joint) -> float:
        if j.initial is not None:
            return min(max(j.initial, j.limits[0]), j.limits[1])
        return min(max(0.0, j.limits[0]), j.limits[1])

    def link_poses(self, joint_positions=None):
        """(center, yaw) of each link in the model frame for the given joint values.

        Joint transforms compose root-first along each link's ancestor chain;
        revolute joints rotate the subtree about their anchor's z-line,
        prismatic joints translate it along their axis.
        """
        q = list(joint_positions) if joint_positions is not None else [
            self.joint_default(j) for j in self.joints
        ]
        parent_joint = {}  # link index -> joint index
        for ji, j in enumerate(self.joints):
            parent_joint[j.child] = ji
        poses = []
        for li, link in enumerate(self.links):
            chain = []
            cur = li
            while cur in parent_joint:
                ji = parent_joint[cur]
                chain.append(ji)
                cur = self.joints[ji].parent
            center = np.asarray(link.offset, dtype=float)
            yaw = link.yaw
            for ji in chain:  # child-most joint first: apply nearest motion first
                j = self.joints[ji]
                if j.kind == "revolute":
                    s = 1.0 if j.axis[2] > 0 else -1.0
                    ang = s * q[ji]
                    anchor = np.asarray(j.anchor, dtype=float)
                    center = anchor + yaw_apply(ang, center - anchor)
                    yaw += ang
                else:
                    center = center + np.asarray(j.axis, dtype=float) * q[ji]
            poses.append((center, yaw))
        return poses

    def native_aabb(self):
        """(lo, hi) of the model at default joint values, in the model frame."""
        lo = np.full(3, np.inf)
        hi = np.full(3, -np.inf)
        for (center, yaw), link in zip(self.link_poses(), self.links):
            h = np.asarray(link.half_extents, dtype=float)
            corners = np.array(
                [[sx * h[0], sy * h[1], sz * h[2]]
                 for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
            )
            world = yaw_apply(yaw, corners) + center
            lo = np.minimum(lo, world.min(axis=0))
            hi = np.maximum(hi, world.max(axis=0))
        return lo, hi

    def total_mass(self, table) -> float:
        return sum(link.resolved_mass(table) for link in self.links)


@dataclass(frozen=True)
class OrientedBBox:
    center: tuple  # (x, y, z) meters
    yaw: float  # radians
    half_extents: tuple  # (hx, hy, hz) meters


@dataclass(frozen=True)
class ObjectInstance:
    id: int
    class_label: str
    bbox: OrientedBBox
    model: ArticulatedObject
    static: bool = False
    room_id: int | None = None


@dataclass(frozen=True)
class Room:
    id: int
    polygon: tuple  # of (x, y)
    floor_z: float = 0.0
    ceiling_z: float = 2.5
    floor_material: str = "wood_oak"
    ceiling_material: str = "paint_white"


@dataclass(frozen=True)
class WallSegment:
    a: tuple  # (x, y)
    b: tuple
    height: float
    material: str = "paint_white"


@dataclass(frozen=True)
class Light:
    kind: str  # "directional" | "point"
    intensity: tuple  # RGB >= 0
    direction: tuple | None = None  # unit vector, directional only
    position: tuple | None = None  # point only


@dataclass(frozen=True)
class Scene:
    name: str
    rooms: tuple = ()
    walls: tuple = ()
    objects: tuple = ()
    lights: tuple = ()
    materials: dict = field(default_factory=lambda: dict(BUILTIN_MATERIALS))
    rng_seed: int = 0

    def object_by_id(self, oid: int) -> ObjectInstance:
        for o in self.objects:
            if o.id == oid:
                return o
        raise KeyError(oid)

    def hash(self) -> int:
        return fnv1a64(scene_to_text(self).encode())


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _check(cond, path, msg):
    if not cond:
        raise ValidationError(f"{path}: {msg}")


def validate_scene(scene: Scene) -> Scene:
    for name, m in sorted(scene.materials.items()):
        path = f"materials[{name}]"
        _check(all(0.0 <= c <= 1.0 for c in m.albedo), path + ".albedo", "outside [0,1]")
        _check(0.0 <= m.roughness <= 1.0, path + ".roughness", "outside [0,1]")
        _check(0.0 <= m.metallic <= 1.0, path + ".metallic", "outside [0,1]")
        _check(m.friction >= 0.0, path + ".friction", "negative")
        _check(m.density > 0.0, path + ".density", "not positive")
    for ri, room in enumerate(scene.rooms):
        path = f"rooms[{ri}]"
        _check(len(room.polygon) >= 3, path + ".polygon", "fewer than 3 vertices")
        _check(polygon_is_simple(room.polygon), path + ".polygon", "self-intersecting")
        _check(room.ceiling_z > room.floor_z, path + ".ceiling_z", "not above floor_z")
        _check(room.floor_material in scene.materials, path + ".floor_material",
               f"unknown {room.floor_material!r}")
        _check(room.ceiling_material in scene.materials, path + ".ceiling_material",
               f"unknown {room.ceiling_material!r}")
    for wi, wall in enumerate(scene.walls):
        _check(wall.height > 0.0, f"walls[{wi}].height", "not positive")
        _check(wall.material in scene.materials, f"walls[{wi}].material",
               f"unknown {wall.material!r}")
    seen = set()
    for oi, obj in enumerate(scene.objects):
        path = f"objects[{oi}]"
        _check(obj.id not in seen, path + ".id", f"duplicate id {obj.id}")
        _check(obj.id >= 1, path + ".id", "instance ids start at 1 (0 is background)")
        seen.add(obj.id)
        _check(obj.class_label in CLASS_VOCABULARY, path + ".class",
               f"unknown class {obj.class_label!r}")
        _check(all(h > 0 for h in obj.bbox.half_extents), path + ".bbox.half_extents",
               "must be strictly positive")
        _validate_model(obj.model, scene.materials, path + ".model")
        lo, hi = obj.model.native_aabb()
        ext = np.maximum(np.abs(lo), np.abs(hi))
        limit = 1.05 * np.asarray(obj.bbox.half_extents)
        _check(bool(np.all(ext <= limit + 1e-9)), path + ".model",
               "posed geometry exceeds bbox by more than 5%")
    for li, light in enumerate(scene.lights):
        path = f"lights[{li}]"
        _check(light.kind in ("directional", "point"), path + ".kind", "unknown kind")
        _check(all(v >= 0 for v in light.intensity), path + ".intensity", "negative")
        if light.kind == "directional":
            _check(light.direction is not None, path + ".direction", "missing")
            n = math.sqrt(sum(c * c for c in light.direction))
            _check(abs(n - 1.0) <= 1e-6, path + ".direction", "not a unit vector")
        else:
            _check(light.position is not None, path + ".position", "missing")
    return scene


def _validate_model(model: ArticulatedObject, materials, path):
    n = len(model.links)
    _check(n >= 1, path + ".links", "empty")
    for li, link in enumerate(model.links):
        lp = f"{path}.links[{li}]"
        _check(all(h > 0 for h in link.half_extents), lp + ".half_extents", "not positive")
        _check(link.material in materials, lp + ".material", f"unknown {link.material!r}")
        _check(link.resolved_mass(materials) > 0, lp + ".mass", "not positive")
    _check(0 <= model.root_link < n, path + ".root_link", "out of range")
    children = set()
    for ji, j in enumerate(model.joints):
        jp = f"{path}.joints[{ji}]"
        _check(j.kind in ("revolute", "prismatic"), jp + ".kind", "unknown kind")
        _check(0 <= j.parent < n and 0 <= j.child < n, jp, "link index out of range")
        _check(j.child != model.root_link, jp + ".child", "root link cannot be a child")
        _check(j.child not in children, jp + ".child", "link has two parent joints")
        children.add(j.child)
        _check(j.limits[0] <= j.limits[1], jp + ".limits", "lo > hi")
        norm = math.sqrt(sum(c * c for c in j.axis))
        _check(abs(norm - 1.0) <= 1e-6, jp + ".axis", "not a unit vector")
        if j.kind == "revolute":
            _check(abs(abs(j.axis[2]) - 1.0) <= 1e-6, jp + ".axis",
                   "revolute axes must be +-z in 2.5D geometry")
        _check(j.friction >= 0.0, jp + ".friction", "negative")
        _check(j.damping >= 0.0, jp + ".damping", "negative")
    # tree check: joint chains terminate without cycles. Links with no parent
    # joint are rigidly welded to the root body.
    parent_of = {j.child: j.parent for j in model.joints}
    for li in range(n):
        seen_links = set()
        cur = li
        while cur in parent_of:
            _check(cur not in seen_links, f"{path}.joints", "cycle in joint graph")
            seen_links.add(cur)
            cur = parent_of[cur]
    return model


# ---------------------------------------------------------------------------
# Canonical document I/O. Keys are sorted and floats rounded to 6 decimals so
# a save -> load -> save round trip is byte identical.
# ---------------------------------------------------------------------------

def _r(x):
    v = round(float(x), 6)
    return 0.0 if v == 0 else v  # avoid -0.0


def _rv(xs):
    return [_r(x) for x in xs]


def scene_to_dict(scene: Scene) -> dict:
    return {
        "name": scene.name,
        "seed": int(scene.rng_seed),
        "rooms": [
            {
                "id": r.id,
                "polygon": [_rv(p) for p in r.polygon],
                "floor_z": _r(r.floor_z),
                "ceiling_z": _r(r.ceiling_z),
                "floor_material": r.floor_material,
                "ceiling_material": r.ceiling_material,
            }
            for r in scene.rooms
        ],
        "walls": [
            {"a": _rv(w.a), "b": _rv(w.b), "height": _r(w.height), "material": w.material}
            for w in scene.walls
        ],
        "objects": [
            {
                "id": o.id,
                "class": o.class_label,
                "bbox": {
                    "center": _rv(o.bbox.center),
                    "yaw": _r(o.bbox.yaw),
                    "half_extents": _rv(o.bbox.half_extents),
                },
                "static": bool(o.static),
                "room_id": o.room_id,
                "model": model_to_dict(o.model),
            }
            for o in scene.objects
        ],
        "lights": [
            {
                "kind": l.kind,
                "intensity": _rv(l.intensity),
                **({"direction": _rv(l.direction)} if l.kind == "directional" else {}),
                **({"position": _rv(l.position)} if l.kind == "point" else {}),
            }
            for l in scene.lights
        ],
        "materials": {
            name: {
                "albedo": _rv(m.albedo),
                "roughness": _r(m.roughness),
                "metallic": _r(m.metallic),
                "friction": _r(m.friction),
                "density": _r(m.density),
            }
            for name, m in scene.materials.items()
        },
    }


def model_to_dict(model: ArticulatedObject) -> dict:
    return {
        "links": [
            {
                "offset": _rv(l.offset),
                "yaw": _r(l.yaw),
                "half_extents": _rv(l.half_extents),
                "material": l.material,
                **({"mass": _r(l.mass)} if l.mass is not None else {}),
                **({"density": _r(l.density)} if l.density is not None else {}),
                **({"friction": _r(l.friction)} if l.friction is not None else {}),
            }
            for l in model.links
        ],
        "joints": [
            {
                "type": j.kind,
                "parent": j.parent,
                "child": j.child,
                "axis": _rv(j.axis),
                "anchor": _rv(j.anchor),
                "limits": _rv(j.limits),
                "friction": _r(j.friction),
                "damping": _r(j.damping),
                **({"initial": _r(j.initial)} if j.initial is not None else {}),
            }
            for j in model.joints
        ],
        "root_link": model.root_link,
    }


def scene_to_text(scene: Scene) -> str:
    return json.dumps(scene_to_dict(scene), sort_keys=True, indent=1) + "\n"


def save_scene(scene: Scene, path) -> None:
    with open(path, "w") as f:
        f.write(scene_to_text(scene))


def _need(d, key, path):
    if key not in d:
        raise ParseError(f"{path}: missing key {key!r}")
    return d[key]


def material_from_dict(d, path) -> Material:
    try:
        return Material(
            albedo=tuple(float(c) for c in _need(d, "albedo", path)),
            roughness=float(_need(d, "roughness", path)),
            metallic=float(_need(d, "metallic", path)),
            friction=float(_need(d, "friction", path)),
            density=float(_need(d, "density", path)),
        )
    except (TypeError, ValueError) as e:
        raise ParseError(f"{path}: {e}") from e


def model_from_dict(d, path) -> ArticulatedObject:
    links = []
    for li, ld in enumerate(_need(d, "links", path)):
        lp = f"{path}.links[{li}]"
        links.append(Link(
            offset=tuple(float(v) for v in _need(ld, "offset", lp)),
            yaw=float(_need(ld, "yaw", lp)),
            half_extents=tuple(float(v) for v in _need(ld, "half_extents", lp)),
            material=str(_need(ld, "material", lp)),
            mass=float(ld["mass"]) if "mass" in ld else None,
            density=float(ld["density"]) if "density" in ld else None,
            friction=float(ld["friction"]) if "friction" in ld else None,
        ))
    joints = []
    for ji, jd in enumerate(d.get("joints", [])):
        jp = f"{path}.joints[{ji}]"
        joints.append(Joint(
            kind=str(_need(jd, "type", jp)),
            parent=int(_need(jd, "parent", jp)),
            child=int(_need(jd, "child", jp)),
            axis=tuple(float(v) for v in _need(jd, "axis", jp)),
            anchor=tuple(float(v) for v in _need(jd, "anchor", jp)),
            limits=tuple(float(v) for v in _need(jd, "limits", jp)),
            friction=float(jd.get("friction", 0.0)),
            damping=float(jd.get("damping", 0.0)),
            initial=float(jd["initial"]) if "initial" in jd else None,
        ))
    return ArticulatedObject(
        links=tuple(links), joints=tuple(joints), root_link=int(d.get("root_link", 0))
    )


def scene_from_dict(doc: dict) -> Scene:
    if not isinstance(doc, dict):
        raise ParseError("top level: expected an object")
    materials = {
        name: material_from_dict(md, f"materials[{name}]")
        for name, md in _need(doc, "materials", "top level").items()
    }
    rooms = []
    for ri, rd in enumerate(doc.get("rooms", [])):
        rp = f"rooms[{ri}]"
        rooms.append(Room(
            id=int(_need(rd, "id", rp)),
            polygon=tuple(tuple(float(v) for v in p) for p in _need(rd, "polygon", rp)),
            floor_z=float(rd.get("floor_z", 0.0)),
            ceiling_z=float(rd.get("ceiling_z", 2.5)),
            floor_material=str(rd.get("floor_material", "wood_oak")),
            ceiling_material=str(rd.get("ceiling_material", "paint_white")),
        ))
    walls = []
    for wi, wd in enumerate(doc.get("walls", [])):
        wp = f"walls[{wi}]"
        walls.append(WallSegment(
            a=tuple(float(v) for v in _need(wd, "a", wp)),
            b=tuple(float(v) for v in _need(wd, "b", wp)),
            height=float(_need(wd, "height", wp)),
            material=str(wd.get("material", "paint_white")),
        ))
    objects = []
    for oi, od in enumerate(doc.get("objects", [])):
        op = f"objects[{oi}]"
        bd = _need(od, "bbox", op)
        objects.append(ObjectInstance(
            id=int(_need(od, "id", op)),
            class_label=str(_need(od, "class", op)),
            bbox=OrientedBBox(
                center=tuple(float(v) for v in _need(bd, "center", op + ".bbox")),
                yaw=float(_need(bd, "yaw", op + ".bbox")),
                half_extents=tuple(float(v) for v in _need(bd, "half_extents", op + ".bbox")),
            ),
            model=model_from_dict(_need(od, "model", op), op + ".model"),
            static=bool(od.get("static", False)),
            room_id=od.get("room_id"),
        ))
    lights = []
    for li, ld in enumerate(doc.get("lights", [])):
        lp = f"lights[{li}]"
        lights.append(Light(
            kind=str(_need(ld, "kind", lp)),
            intensity=tuple(float(v) for v in _need(ld, "intensity", lp)),
            direction=tuple(float(v) for v in ld["direction"]) if "direction" in ld else None,
            position=tuple(float(v) for v in ld["position"]) if "position" in ld else None,
        ))
    scene = Scene(
        name=str(_need(doc, "name", "top level")),
        rooms=tuple(rooms),
        walls=tuple(walls),
        objects=tuple(objects),
        lights=tuple(lights),
        materials=materials,
        rng_seed=int(doc.get("seed", 0)),
    )
    return validate_scene(scene)


def load_scene(path) -> Scene:
    with open(path) as f:
        text = f.read()
    return load_scene_text(text)


def load_scene_text(text: str) -> Scene:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(str(e)) from e
    return scene_from_dict(doc)


# ---------------------------------------------------------------------------
# Bounding-box fill and floorplan import
# ---------------------------------------------------------------------------

def fill_bounding_box(bbox: OrientedBBox, model: ArticulatedObject,
                      instance_id: int = 1, class_label: str = "box",
                      static: bool = False, room_id=None) -> ObjectInstance:
    """Scale a model per-axis so its posed AABB matches the bbox extents.

    The model is scaled in its own frame and posed at the bbox center with
    the bbox yaw. Class label and joint topology are never changed.
    """
    if any(h <= 0 for h in bbox.half_extents):
        raise ValidationError("bbox.half_extents: must be strictly positive")
    lo, hi = model.native_aabb()
    native = (hi - lo) / 2.0
    if np.any(native <= 1e-12):
        raise DegenerateModel(f"model has zero extent on axis {int(np.argmin(native))}")
    scale = np.asarray(bbox.half_extents, dtype=float) / native
    scaled = scale_model(model, scale)
    # recentre so the scaled AABB midpoint sits on the model origin
    slo, shi = scaled.native_aabb()
    mid = (slo + shi) / 2.0
    if np.any(np.abs(mid) > 1e-9):
        scaled = translate_model(scaled, -mid)
    slo, shi = scaled.native_aabb()
    got = (shi - slo) / 2.0
    if np.any(np.abs(got / np.asarray(bbox.half_extents) - 1.0) > 0.01):
        raise ValidationError(
            "fill_bounding_box: scaled model misses bbox extents by more than 1% "
            "(non-axis-aligned links cannot be fit per-axis)")
    return ObjectInstance(id=instance_id, class_label=class_label, bbox=bbox,
                          model=scaled, static=static, room_id=room_id)


def scale_model(model: ArticulatedObject, scale) -> ArticulatedObject:
    """Anisotropic scale in the model frame.

    Exact for axis-aligned links (local yaw multiple of pi/2); oblique links
    get the induced effective extents, checked by the 1% fit assertion in
    fill_bounding_box.
    """
    sx, sy, sz = (float(s) for s in scale)
    links = []
    for l in model.links:
        c, s = math.cos(l.yaw), math.sin(l.yaw)
        ex = math.sqrt((sx * c) ** 2 + (sy * s) ** 2)
        ey = math.sqrt((sx * s) ** 2 + (sy * c) ** 2)
        links.append(replace(
            l,
            offset=(l.offset[0] * sx, l.offset[1] * sy, l.offset[2] * sz),
            half_extents=(l.half_extents[0] * ex, l.half_extents[1] * ey,
                          l.half_extents[2] * sz),
        ))
    joints = []
    for j in model.joints:
        anchor = (j.anchor[0] * sx, j.anchor[1] * sy, j.anchor[2] * sz)
        if j.kind == "prismatic":
            stretched = np.asarray(j.axis, dtype=float) * np.array([sx, sy, sz])
            gain = float(np.linalg.norm(stretched))
            axis = tuple(stretched / gain)
            joints.append(replace(j, anchor=anchor, axis=axis,
                                  limits=(j.limits[0] * gain, j.limits[1] * gain),
                                  initial=None if j.initial is None else j.initial * gain))
        else:
            joints.append(replace(j, anchor=anchor))
    return ArticulatedObject(links=tuple(links), joints=tuple(joints),
                             root_link=model.root_link)


def translate_model(model: ArticulatedObject, delta) -> ArticulatedObject:
    d = np.asarray(delta, dtype=float)
    links = tuple(replace(l, offset=tuple(np.asarray(l.offset) + d)) for l in model.links)
    joints = tuple(replace(j, anchor=tuple(np.asarray(j.anchor) + d)) for j in model.joints)
    return ArticulatedObject(links=links, joints=joints, root_link=model.root_link)


def _aspect_mismatch(bbox_half, model) -> float:
    lo, hi = model.native_aabb()
    native = (hi - lo) / 2.0
    s = np.asarray(bbox_half, dtype=float) / np.maximum(native, 1e-12)
    logs = np.log(s)
    return float(np.sum(np.abs(logs - logs.mean())))


def import_floorplan(layout: dict, asset_pool: dict) -> tuple:
    """Build a scene from a structural layout plus class-labeled boxes.

    The layout mirrors the scene schema minus models: walls/rooms are taken
    as-is, `doors`/`windows` entries are treated as placement boxes of those
    classes, and each box is filled with the pool model of its class whose
    aspect best fits. Boxes of classes absent from the pool are skipped and
    listed in the report.

    Returns (scene, report) where report = {"skipped": [...], "placed": n}.
    """
    if not isinstance(layout, dict):
        raise ImportError_("layout: expected an object")
    for key in ("walls", "rooms", "objects", "doors", "windows"):
        if key in layout and not isinstance(layout[key], list):
            raise ImportError_(f"layout.{key}: expected a list")
    boxes = []
    for od in layout.get("objects", []):
        boxes.append((str(_need_imp(od, "class")), od))
    for od in layout.get("doors", []):
        boxes.append(("door", od))
    for od in layout.get("windows", []):
        boxes.append(("window", od))
    skipped = []
    objects = []
    next_id = 1
    for class_label, od in boxes:
        bd = _need_imp(od, "bbox")
        bbox = OrientedBBox(
            center=tuple(float(v) for v in _need_imp(bd, "center")),
            yaw=float(bd.get("yaw", 0.0)),
            half_extents=tuple(float(v) for v in _need_imp(bd, "half_extents")),
        )
        pool = asset_pool.get(class_label)
        if not pool:
            skipped.append({"class": class_label, "bbox_center": list(bbox.center)})
            continue
        model = min(pool, key=lambda m: _aspect_mismatch(bbox.half_extents, m))
        objects.append(fill_bounding_box(
            bbox, model, instance_id=next_id, class_label=class_label,
            static=bool(od.get("static", False)), room_id=od.get("room_id")))
        next_id += 1
    doc = {
        "name": str(layout.get("name", "imported")),
        "seed": int(layout.get("seed", 0)),
        "rooms": layout.get("rooms", []),
        "walls": layout.get("walls", []),
        "objects": [],
        "lights": layout.get("lights", [{
            "kind": "directional", "direction": [0.0, 0.0, -1.0],
            "intensity": [1.0, 1.0, 1.0],
        }]),
        "materials": layout.get("materials") or {
            name: {
                "albedo": list(m.albedo), "roughness": m.roughness,
                "metallic": m.metallic, "friction": m.friction, "density": m.density,
            } for name, m in BUILTIN_MATERIALS.items()
        },
    }
    try:
        base = scene_from_dict(doc)
    except (ParseError, ValidationError) as e:
        raise ImportError_(str(e)) from e
    scene = validate_scene(replace(base, objects=tuple(objects)))
    return scene, {"skipped": skipped, "placed": len(objects)}


def _need_imp(d, key):
    if key not in d:
        raise ImportError_(f"missing key {key!r}")
    return d[key]


# ---------------------------------------------------------------------------
# Overlap resolution
# ---------------------------------------------------------------------------

OVERLAP_REMOVE_FRACTION = 0.80
OVERLAP_MAX_SHRINK = 0.20
OVERLAP_SHRINK_STEP = 0.01
OVERLAP_MC_SAMPLES = 4096
_OVERLAP_SEED = 0x0FF5E7


def _instance_box(obj: ObjectInstance):
    return (np.asarray(obj.bbox.center, dtype=float), obj.bbox.yaw,
            np.asarray(obj.bbox.half_extents, dtype=float))


def overlap_fraction(a: ObjectInstance, b: ObjectInstance) -> float:
    """Intersection volume over the smaller object's volume, by Monte Carlo.

    4096 points are sampled in the smaller bbox from a sub-seed fixed by the
    unordered id pair, so estimates are deterministic and order independent.
    """
    ca, ya, ha = _instance_box(a)
    cb, yb, hb = _instance_box(b)
    va = float(np.prod(2 * ha))
    vb = float(np.prod(2 * hb))
    if vb < va:
        (ca, ya, ha), (cb, yb, hb) = (cb, yb, hb), (ca, ya, ha)
    if not boxes_intersect(ca, ya, ha, cb, yb, hb):
        return 0.0
    rng = np.random.default_rng(
        np.random.SeedSequence((_OVERLAP_SEED, min(a.id, b.id), max(a.id, b.id))))
    local = rng.uniform(-1.0, 1.0, size=(OVERLAP_MC_SAMPLES, 3)) * ha
    world = yaw_apply(ya, local) + ca
    rel = yaw_apply(-yb, world - cb)
    inside = np.all(np.abs(rel) <= hb, axis=1)
    return float(inside.mean())


def _shrunk(obj: ObjectInstance, factor: float) -> ObjectInstance:
    bbox = replace(obj.bbox, half_extents=tuple(h * factor for h in obj.bbox.half_extents))
    return replace(obj, bbox=bbox, model=scale_model(obj.model, (factor, factor, factor)))


def resolve_overlaps(scene: Scene):
    """Remove objects overlapping a partner by more than 80% of the smaller
    volume (the larger instance id of the pair is dropped), then uniformly
    shrink remaining offenders in 1% steps, at most 20% cumulative, until
    pairwise intersection is gone. Pairs still intersecting at 20% are
    flagged, not modified further.

    Returns (scene, report) with report keys removed/shrunk/flagged.
    """
    objects = {o.id: o for o in scene.objects}
    report = {"removed": [], "shrunk": {}, "flagged": []}

    removed = set()
    ids = sorted(objects)
    for i, ia in enumerate(ids):
        for ib in ids[i + 1:]:
            if ia in removed or ib in removed:
                continue
            frac = overlap_fraction(objects[ia], objects[ib])
            if frac > OVERLAP_REMOVE_FRACTION:
                victim = max(ia, ib)
                removed.add(victim)
                report["removed"].append({"id": victim, "partner": min(ia, ib),
                                          "overlap": frac})
    for oid in removed:
        del objects[oid]

    shrink_steps = {oid: 0 for oid in objects}
    max_steps = int(round(OVERLAP_MAX_SHRINK / OVERLAP_SHRINK_STEP))

    def intersecting_pairs():
        alive = sorted(objects)
        out = []
        for i, ia in enumerate(alive):
            for ib in alive[i + 1:]:
                a, b = objects[ia], objects[ib]
                if boxes_intersect(*_instance_box(a), *_instance_box(b)):
                    out.append((ia, ib))
        return out

    while True:
        pairs = intersecting_pairs()
        progressed = False
        for ia, ib in pairs:
            victim = max(ia, ib)
            if shrink_steps[victim] >= max_steps:
                continue
            shrink_steps[victim] += 1
            factor = 1.0 - OVERLAP_SHRINK_STEP * shrink_steps[victim]
            objects[victim] = _shrunk(scene.object_by_id(victim), factor)
            progressed = True
        if not progressed:
            break

    for ia, ib in intersecting_pairs():
        report["flagged"].append({"pair": [ia, ib],
                                  "overlap": overlap_fraction(objects[ia], objects[ib])})
    report["shrunk"] = {oid: OVERLAP_SHRINK_STEP * n
                        for oid, n in shrink_steps.items() if n > 0}
    new_objects = tuple(objects[o.id] for o in scene.objects if o.id in objects)
    return replace(scene, objects=new_objects), report


def scene_stats(scene: Scene) -> dict:
    """Object count, room count, objects per room and per-class histogram."""
    histogram = {}
    for o in scene.objects:
        histogram[o.class_label] = histogram.get(o.class_label, 0) + 1
    n_rooms = len(scene.rooms)
    return {
        "objects": len(scene.objects),
        "rooms": n_rooms,
        "objects_per_room": (len(scene.objects) / n_rooms) if n_rooms else 0.0,
        "class_histogram": dict(sorted(histogram.items())),
    }
