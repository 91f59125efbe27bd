"""Build a scene procedurally, round-trip it through the canonical document
format, import a floorplan, and watch overlap resolution remove/shrink
offending objects.

Run:  python demos/01_scenes_and_overlap.py
"""

import json
import pathlib
import tempfile

from roomsim import prefab
from roomsim.scene import (
    ObjectInstance,
    OrientedBBox,
    Scene,
    import_floorplan,
    load_scene,
    resolve_overlaps,
    save_scene,
    scene_stats,
    validate_scene,
)

out_dir = pathlib.Path(tempfile.mkdtemp(prefix="roomsim_demo_"))

# --- a furnished room, saved canonically -----------------------------------
scene = prefab.furniture_scene(n_objects=14, seed=3)
path = out_dir / "furnished.json"
save_scene(scene, path)
again = load_scene(path)
print(f"wrote {path}")
print("round trip byte-identical:", path.read_text() == open(path).read())
print("stats:", json.dumps(scene_stats(again)))

# --- floorplan import --------------------------------------------------------
layout = {
    "name": "studio",
    "rooms": [{"id": 0, "polygon": [[0, 0], [7, 0], [7, 5], [0, 5]]}],
    "walls": [
        {"a": [0, 0], "b": [7, 0], "height": 2.5},
        {"a": [7, 0], "b": [7, 5], "height": 2.5},
        {"a": [7, 5], "b": [0, 5], "height": 2.5},
        {"a": [0, 5], "b": [0, 0], "height": 2.5},
    ],
    "objects": [
        {"class": "table", "bbox": {"center": [2.0, 2.5, 0.375], "yaw": 0.0,
                                    "half_extents": [0.6, 0.4, 0.375]}},
        {"class": "chair", "bbox": {"center": [3.2, 2.5, 0.25], "yaw": 1.6,
                                    "half_extents": [0.25, 0.25, 0.25]}},
        {"class": "hologram", "bbox": {"center": [5.0, 4.0, 0.5], "yaw": 0.0,
                                       "half_extents": [0.3, 0.3, 0.5]}},
    ],
}
imported, report = import_floorplan(layout, prefab.DEFAULT_ASSET_POOL)
print(f"\nfloorplan import placed {report['placed']} objects, "
      f"skipped {[s['class'] for s in report['skipped']]}")

# --- overlap resolution -------------------------------------------------------
room, walls = prefab.rect_room(10.0, 10.0)
crowded = validate_scene(Scene(
    name="crowded", rooms=(room,), walls=tuple(walls),
    objects=(
        ObjectInstance(id=1, class_label="box",
                       bbox=OrientedBBox((3.0, 3.0, 0.5), 0.0, (1.0, 1.0, 0.5)),
                       model=prefab.box_model((1.0, 1.0, 0.5))),
        # almost entirely inside object 1 -> removed
        ObjectInstance(id=2, class_label="box",
                       bbox=OrientedBBox((3.5, 3.0, 0.5), 0.0, (0.4, 0.4, 0.3)),
                       model=prefab.box_model((0.4, 0.4, 0.3))),
        # clipping a corner -> shrunk until clear
        ObjectInstance(id=3, class_label="box",
                       bbox=OrientedBBox((4.3, 4.2, 0.5), 0.3, (0.6, 0.6, 0.5)),
                       model=prefab.box_model((0.6, 0.6, 0.5))),
    )))
resolved, rep = resolve_overlaps(crowded)
print("\noverlap resolution:")
print("  removed:", [r["id"] for r in rep["removed"]])
print("  shrunk:", {k: f"{v:.0%}" for k, v in rep["shrunk"].items()})
print("  flagged:", rep["flagged"])
print("  survivors:", [o.id for o in resolved.objects])
