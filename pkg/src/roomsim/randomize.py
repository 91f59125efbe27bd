"""Seed-reproducible domain randomization over materials (visual and
dynamics), object instances and per-link dynamics properties.

Each axis draws from an independent sub-seeded stream, so enabling one axis
never perturbs another's draws. All three transforms preserve object count,
bbox poses, class labels, joint topology and scene validity.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .scene import (
    BUILTIN_MATERIALS,
    Scene,
    fill_bounding_box,
    material_family,
    validate_scene,
)

_AXIS_MATERIALS = 0x4D41
_AXIS_OBJECTS = 0x4F42
_AXIS_DYNAMICS = 0x4459

DYNAMICS_JITTER = (0.8, 1.25)  # symmetric in log space


def default_material_pools() -> dict:
    pools = {}
    for name, mat in BUILTIN_MATERIALS.items():
        pools.setdefault(material_family(name), {})[name] = mat
    return pools


@dataclass
class RandomizationSpec:
    seed: int = 0
    randomize_materials: bool = False
    randomize_objects: bool = False
    randomize_dynamics: bool = False
    material_pools: dict = field(default_factory=default_material_pools)
    asset_pool: dict = field(default_factory=dict)

    def __post_init__(self):
        for family, pool in self.material_pools.items():
            assert pool, f"empty material pool for family {family!r}"
        for label, models in self.asset_pool.items():
            assert models, f"empty asset pool for class {label!r}"

    def with_seed(self, seed: int) -> "RandomizationSpec":
        return replace(self, seed=seed)


def _axis_rng(spec, axis):
    return np.random.default_rng(np.random.SeedSequence((int(spec.seed), axis)))


def randomize_materials(scene: Scene, spec: RandomizationSpec):
    """Replace each link's material by a uniform draw from its family pool.

    Links whose family has no pool are left unchanged and reported. Returns
    (scene, report).
    """
    rng = _axis_rng(spec, _AXIS_MATERIALS)
    report = {"missing_families": [], "assignments": 0}
    table = dict(scene.materials)
    new_objects = []
    for obj in scene.objects:
        links = []
        for li, link in enumerate(obj.model.links):
            family = material_family(link.material)
            pool = spec.material_pools.get(family)
            if not pool:
                report["missing_families"].append(
                    {"object": obj.id, "link": li, "family": family})
                links.append(link)
                continue
            names = sorted(pool)
            name = names[int(rng.integers(len(names)))]
            table.setdefault(name, pool[name])
            links.append(replace(link, material=name))
            report["assignments"] += 1
        model = replace(obj.model, links=tuple(links))
        new_objects.append(replace(obj, model=model))
    out = replace(scene, objects=tuple(new_objects), materials=table)
    return validate_scene(out), report


def randomize_objects(scene: Scene, spec: RandomizationSpec):
    """Swap each instance's model for a same-class draw from the asset pool,
    refit into the unchanged bbox. Classes without a pool keep their model
    and are reported. Returns (scene, report)."""
    rng = _axis_rng(spec, _AXIS_OBJECTS)
    report = {"missing_classes": [], "swaps": 0}
    new_objects = []
    for obj in scene.objects:
        pool = spec.asset_pool.get(obj.class_label)
        if not pool:
            report["missing_classes"].append({"object": obj.id,
                                              "class": obj.class_label})
            new_objects.append(obj)
            continue
        model = pool[int(rng.integers(len(pool)))]
        new_objects.append(fill_bounding_box(
            obj.bbox, model, instance_id=obj.id, class_label=obj.class_label,
            static=obj.static, room_id=obj.room_id))
        report["swaps"] += 1
    out = replace(scene, objects=tuple(new_objects))
    return validate_scene(out), report


def randomize_dynamics(scene: Scene, spec: RandomizationSpec):
    """Set per-link friction and density from the material table, each
    jittered by an independent uniform factor in [0.8, 1.25]; masses follow
    density * volume. Returns (scene, report)."""
    rng = _axis_rng(spec, _AXIS_DYNAMICS)
    lo, hi = DYNAMICS_JITTER
    report = {"links": 0}
    new_objects = []
    for obj in scene.objects:
        links = []
        for link in obj.model.links:
            mat = scene.materials[link.material]
            f_mu = float(rng.uniform(lo, hi))
            f_rho = float(rng.uniform(lo, hi))
            links.append(replace(link, friction=mat.friction * f_mu,
                                 density=mat.density * f_rho, mass=None))
            report["links"] += 1
        model = replace(obj.model, links=tuple(links))
        new_objects.append(replace(obj, model=model))
    out = replace(scene, objects=tuple(new_objects))
    return validate_scene(out), report


def apply_randomization(scene: Scene, spec: RandomizationSpec):
    """Run the enabled axes in a fixed order; returns (scene, reports)."""
    reports = {}
    if spec.randomize_objects:
        scene, reports["objects"] = randomize_objects(scene, spec)
    if spec.randomize_materials:
        scene, reports["materials"] = randomize_materials(scene, spec)
    if spec.randomize_dynamics:
        scene, reports["dynamics"] = randomize_dynamics(scene, spec)
    return scene, reports


def spec_from_config(doc: dict, seed: int | None = None) -> RandomizationSpec:
    """Build a spec from an environment-config randomization block."""
    from . import prefab

    axes = doc.get("axes", [])
    pools = doc.get("asset_pool")
    return RandomizationSpec(
        seed=int(doc.get("seed", 0) if seed is None else seed),
        randomize_materials="materials" in axes,
        randomize_objects="objects" in axes,
        randomize_dynamics="dynamics" in axes,
        asset_pool=pools if pools is not None else dict(prefab.DEFAULT_ASSET_POOL),
    )
