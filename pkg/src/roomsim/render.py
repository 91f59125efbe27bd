"""CPU ray-casting renderer: per-pixel depth, normals, ids, shaded RGB with
microfacet specular and a vertical directional shadow model, plus optical
and scene flow between ticks.

Rendering is a pure function of (snapshot, camera, preset): identical inputs
produce bit-identical buffers.
"""

from __future__ import annotations

import colorsys
import math
import struct
from dataclasses import dataclass

import numpy as np

from ._raycast import cast_rays
from .snapshot import Snapshot

BACKGROUND_RGB = (0.1, 0.1, 0.1)
AMBIENT_FACTOR = 0.3
DIELECTRIC_F0 = 0.04
MIN_ALPHA = 1e-3


class RenderError(Exception):
    pass


@dataclass(frozen=True)
class Camera:
    position: tuple
    rotation: tuple  # 3x3 row-major, columns = right / down / forward
    vertical_fov: float
    width: int
    height: int
    near: float = 0.05
    far: float = 100.0

    def __post_init__(self):
        if not (0 < self.near < self.far):
            raise RenderError("camera requires 0 < near < far")
        if self.width < 1 or self.height < 1:
            raise RenderError("camera resolution must be at least 1x1")

    @classmethod
    def look_at(cls, eye, target, up=(0.0, 0.0, 1.0), vertical_fov=math.pi / 3,
                width=128, height=128, near=0.05, far=100.0):
        eye = np.asarray(eye, dtype=float)
        fwd = np.asarray(target, dtype=float) - eye
        n = np.linalg.norm(fwd)
        if n < 1e-12:
            raise RenderError("camera target coincides with eye")
        fwd = fwd / n
        up = np.asarray(up, dtype=float)
        right = np.cross(fwd, up)
        rn = np.linalg.norm(right)
        if rn < 1e-9:  # looking straight up/down: pick a stable right vector
            right = np.array([1.0, 0.0, 0.0])
        else:
            right = right / rn
        down = np.cross(fwd, right)
        R = np.stack([right, down, fwd], axis=1)
        return cls(position=tuple(eye), rotation=tuple(map(tuple, R)),
                   vertical_fov=vertical_fov, width=width, height=height,
                   near=near, far=far)

    @property
    def R(self) -> np.ndarray:
        return np.asarray(self.rotation, dtype=float)

    @property
    def focal(self) -> float:
        return (self.height / 2.0) / math.tan(self.vertical_fov / 2.0)

    def pixel_dirs(self, offsets=((0.5, 0.5),)) -> np.ndarray:
        """World-frame unit ray directions, one block of H*W per offset."""
        cam = _camera_frame_dirs(self.width, self.height, self.vertical_fov,
                                 offsets)
        return cam @ self.R.T

    def project(self, points) -> tuple:
        """(u, v, in_front) pixel coordinates of world points."""
        rel = np.asarray(points, dtype=float) - np.asarray(self.position)
        cam = rel @ self.R  # columns are the camera axes
        z = cam[..., 2]
        in_front = z > 1e-12
        zsafe = np.where(in_front, z, 1.0)
        u = self.width / 2.0 + self.focal * cam[..., 0] / zsafe
        v = self.height / 2.0 + self.focal * cam[..., 1] / zsafe
        return u, v, in_front


from functools import lru_cache


@lru_cache(maxsize=16)
def _camera_frame_dirs(width, height, vfov, offsets):
    f = (height / 2.0) / math.tan(vfov / 2.0)
    cx, cy = width / 2.0, height / 2.0
    blocks = []
    for ou, ov in offsets:
        u = np.arange(width) + ou
        v = np.arange(height) + ov
        uu, vv = np.meshgrid(u, v)
        cam = np.stack([(uu - cx) / f, (vv - cy) / f, np.ones_like(uu)], axis=-1)
        cam = cam / np.linalg.norm(cam, axis=-1, keepdims=True)
        blocks.append(cam.reshape(-1, 3))
    out = np.concatenate(blocks, axis=0)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RenderPreset:
    name: str
    resolution: int
    msaa: bool
    shadows: bool

    def __post_init__(self):
        fixed = {"VisualRL": (128, False, False), "HighFidelity": (512, True, True)}
        if self.name in fixed:
            if (self.resolution, self.msaa, self.shadows) != fixed[self.name]:
                raise RenderError(f"preset {self.name} settings are fixed to "
                                  f"{fixed[self.name]}")

    @classmethod
    def visualrl(cls):
        return cls("VisualRL", 128, False, False)

    @classmethod
    def highfidelity(cls):
        return cls("HighFidelity", 512, True, True)

    @classmethod
    def by_name(cls, name: str):
        key = name.strip().lower()
        if key == "visualrl":
            return cls.visualrl()
        if key == "highfidelity":
            return cls.highfidelity()
        raise RenderError(f"unknown preset {name!r}")


# fixed 2x2 stratified subsample pattern (deterministic MSAA)
MSAA_OFFSETS = ((0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75))


@dataclass
class SensorFrame:
    rgb: np.ndarray  # (H, W, 3) in [0, 1]
    depth: np.ndarray  # (H, W) meters along the ray, 0 = no hit
    normals: np.ndarray  # (H, W, 3)
    semantic: np.ndarray  # (H, W) class ids, 0 = background
    instance: np.ndarray  # (H, W) instance ids, 0 = background
    optical_flow: np.ndarray  # (H, W, 2) pixels/frame
    scene_flow: np.ndarray  # (H, W, 3) meters/frame
    tick: int = 0

    def validate(self):
        h, w = self.depth.shape
        assert self.rgb.shape == (h, w, 3)
        assert self.normals.shape == (h, w, 3)
        assert self.semantic.shape == (h, w)
        assert self.instance.shape == (h, w)
        assert self.optical_flow.shape == (h, w, 2)
        assert self.scene_flow.shape == (h, w, 3)
        hitn = self.normals[self.depth > 0]
        if len(hitn):
            assert np.all(np.abs(np.linalg.norm(hitn, axis=-1) - 1.0) < 1e-6)
        return self


def schlick_fresnel(f0, cos_theta):
    """F = f0 + (1 - f0) (1 - cos)^5, elementwise."""
    f0 = np.asarray(f0, dtype=float)
    cos_theta = np.asarray(cos_theta, dtype=float)
    return f0 + (1.0 - f0) * (1.0 - cos_theta) ** 5


def ggx_distribution(n_dot_h, roughness):
    alpha = np.maximum(np.asarray(roughness, dtype=float), 0.0) ** 2
    alpha = np.maximum(alpha, MIN_ALPHA)
    a2 = alpha * alpha
    denom = n_dot_h * n_dot_h * (a2 - 1.0) + 1.0
    return a2 / (math.pi * denom * denom)


def smith_ggx_geometry(n_dot_v, n_dot_l, roughness):
    k = (np.asarray(roughness, dtype=float) + 1.0) ** 2 / 8.0

    def g1(x):
        return x / (x * (1.0 - k) + k)

    return g1(n_dot_v) * g1(n_dot_l)


def shade(normals, view, albedo, roughness, metallic, light_dirs, light_rgb,
          shadowed=None):
    """Lambertian diffuse + Cook-Torrance GGX specular, clamped to [0, 1].

    normals/view: (N, 3) unit vectors (view points away from the surface
    toward the camera). light_dirs/light_rgb: per light, unit direction
    toward the light and RGB radiance at the surface. shadowed: (L, N) bool.
    """
    n = np.asarray(normals, dtype=float)
    v = np.asarray(view, dtype=float)
    albedo = np.asarray(albedo, dtype=float)
    roughness = np.asarray(roughness, dtype=float)
    metallic = np.asarray(metallic, dtype=float)
    out = np.zeros_like(albedo)
    f0 = DIELECTRIC_F0 * (1.0 - metallic[:, None]) + albedo * metallic[:, None]
    n_dot_v = np.maximum(np.einsum("nd,nd->n", n, v), 1e-6)
    for li in range(len(light_dirs)):
        l = np.asarray(light_dirs[li], dtype=float)
        rgb = np.asarray(light_rgb[li], dtype=float)
        n_dot_l = np.einsum("nd,nd->n", n, l)
        lit = n_dot_l > 0.0
        n_dot_l = np.maximum(n_dot_l, 0.0)
        h = l + v
        h = h / np.maximum(np.linalg.norm(h, axis=-1, keepdims=True), 1e-12)
        n_dot_h = np.maximum(np.einsum("nd,nd->n", n, h), 0.0)
        h_dot_v = np.maximum(np.einsum("nd,nd->n", h, v), 0.0)
        F = schlick_fresnel(f0, h_dot_v[:, None])
        D = ggx_distribution(n_dot_h, roughness)[:, None]
        G = smith_ggx_geometry(n_dot_v, n_dot_l, roughness)[:, None]
        spec = F * D * G / (4.0 * n_dot_v[:, None] * np.maximum(n_dot_l[:, None], 1e-6))
        kd = (1.0 - F) * (1.0 - metallic[:, None])
        diffuse = kd * albedo / math.pi
        contrib_d = diffuse * n_dot_l[:, None] * rgb
        contrib_s = spec * n_dot_l[:, None] * rgb
        if shadowed is not None:
            dark = shadowed[li][:, None]
            out += np.where(dark, AMBIENT_FACTOR * contrib_d,
                            contrib_d + contrib_s) * lit[:, None]
        else:
            out += (contrib_d + contrib_s) * lit[:, None]
    return np.clip(out, 0.0, 1.0)


def _prim_arrays(snap: Snapshot):
    box_rad = np.linalg.norm(snap.box_half, axis=1) if snap.n_boxes else np.zeros(0)
    return (snap.box_center.reshape(-1, 3), np.cos(snap.box_yaw), np.sin(snap.box_yaw),
            snap.box_half.reshape(-1, 3), box_rad, snap.plane_z,
            snap.poly_xy.reshape(-1, 2), snap.poly_off)


def raycast(snap: Snapshot, origins, dirs, t_min, t_max, skip=None, enabled=None):
    origins = np.ascontiguousarray(origins, dtype=float)
    dirs = np.ascontiguousarray(dirs, dtype=float)
    if origins.ndim == 1:
        origins = np.broadcast_to(origins, dirs.shape).copy()
    if skip is None:
        skip = np.full(len(dirs), -1, dtype=np.int64)
    if enabled is None:
        enabled = np.ones(snap.n_prims, dtype=np.uint8)
    bc, bcos, bsin, bh, brad, pz, pxy, poff = _prim_arrays(snap)
    return cast_rays(origins, dirs, bc, bcos, bsin, bh, brad, pz, pxy, poff,
                     enabled, skip, t_min, t_max)


def shadow_test(snap: Snapshot, points, skip_prims=None) -> np.ndarray:
    """True where a +z ray from the point hits non-ceiling geometry."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    dirs = np.zeros_like(points)
    dirs[:, 2] = 1.0
    enabled = np.ones(snap.n_prims, dtype=np.uint8)
    enabled[snap.n_boxes:][snap.plane_ceiling] = 0  # ceilings never cast
    skip = (np.asarray(skip_prims, dtype=np.int64) if skip_prims is not None
            else np.full(len(points), -1, dtype=np.int64))
    t, prim, _ = raycast(snap, points, dirs, 1e-6, np.inf, skip=skip, enabled=enabled)
    return prim >= 0


def _light_arrays(snap: Snapshot, points):
    """Per light: unit direction toward the light and radiance at each point."""
    dirs, rgbs, kinds = [], [], []
    n = len(points)
    for light in snap.lights:
        if light.kind == "directional":
            d = -np.asarray(light.direction, dtype=float)
            dirs.append(np.broadcast_to(d, (n, 3)))
            rgbs.append(np.broadcast_to(np.asarray(light.intensity, dtype=float),
                                        (n, 3)))
            kinds.append("directional")
        else:
            rel = np.asarray(light.position, dtype=float) - points
            dist = np.maximum(np.linalg.norm(rel, axis=-1, keepdims=True), 1e-6)
            dirs.append(rel / dist)
            rgbs.append(np.asarray(light.intensity, dtype=float) / (dist ** 2))
            kinds.append("point")
    return dirs, rgbs, kinds


def render(snap: Snapshot, camera: Camera, preset: RenderPreset,
           prev: tuple | None = None, tick: int = 0,
           want_rgb: bool = True) -> SensorFrame:
    """Cast one ray per pixel (plus MSAA subsamples for RGB) and fill every
    per-pixel channel. prev = (previous snapshot, previous camera) enables
    the flow channels; they are zero otherwise."""
    H, W = camera.height, camera.width
    dirs = camera.pixel_dirs()
    origin = np.asarray(camera.position, dtype=float)
    t, prim, nrm = raycast(snap, origin, dirs, camera.near, camera.far)
    depth = t.reshape(H, W)
    normals = nrm.reshape(H, W, 3)
    semantic = snap.prim_semantic(prim).reshape(H, W)
    instance = snap.prim_instance(prim).reshape(H, W)

    rgb = np.empty((H, W, 3))
    rgb[:] = BACKGROUND_RGB
    if want_rgb:
        if preset.msaa:
            sub_dirs = camera.pixel_dirs(MSAA_OFFSETS)
            st, sprim, snrm = raycast(snap, origin, sub_dirs, camera.near, camera.far)
            cols = _shade_rays(snap, preset, origin, sub_dirs, st, sprim, snrm)
            rgb = cols.reshape(len(MSAA_OFFSETS), H, W, 3).mean(axis=0)
        else:
            cols = _shade_rays(snap, preset, origin, dirs, t, prim, nrm)
            rgb = cols.reshape(H, W, 3)

    optical = np.zeros((H, W, 2))
    scene_fl = np.zeros((H, W, 3))
    if prev is not None:
        prev_snap, prev_cam = prev
        optical, scene_fl = compute_flow(prev_snap, prev_cam, snap, camera,
                                         t, prim, dirs)
        optical = optical.reshape(H, W, 2)
        scene_fl = scene_fl.reshape(H, W, 3)

    return SensorFrame(rgb=rgb, depth=depth, normals=normals, semantic=semantic,
                       instance=instance, optical_flow=optical,
                       scene_flow=scene_fl, tick=tick)


def _shade_rays(snap, preset, origin, dirs, t, prim, nrm):
    n = len(dirs)
    cols = np.empty((n, 3))
    cols[:] = BACKGROUND_RGB
    hit = prim >= 0
    if not np.any(hit):
        return cols
    hidx = np.nonzero(hit)[0]
    hp = prim[hidx]
    points = origin + t[hidx, None] * dirs[hidx]
    albedo = np.empty((len(hidx), 3))
    rough = np.empty(len(hidx))
    metal = np.empty(len(hidx))
    isbox = hp < snap.n_boxes
    bsel = hp[isbox]
    albedo[isbox] = snap.box_albedo[bsel]
    rough[isbox] = snap.box_rough[bsel]
    metal[isbox] = snap.box_metal[bsel]
    psel = hp[~isbox] - snap.n_boxes
    albedo[~isbox] = snap.plane_albedo[psel]
    rough[~isbox] = snap.plane_rough[psel]
    metal[~isbox] = snap.plane_metal[psel]
    view = -dirs[hidx]
    ldirs, lrgbs, kinds = _light_arrays(snap, points)
    shadowed = None
    if preset.shadows and ldirs:
        vert = shadow_test(snap, points, skip_prims=hp)
        shadowed = [vert if kinds[i] == "directional"
                    else np.zeros(len(hidx), dtype=bool) for i in range(len(ldirs))]
    cols[hidx] = shade(nrm[hidx], view, albedo, rough, metal, ldirs, lrgbs,
                       shadowed)
    return cols


def compute_flow(prev_snap: Snapshot, prev_cam: Camera, snap: Snapshot,
                 camera: Camera, t=None, prim=None, dirs=None):
    """Forward flow for the current frame's hit points.

    scene flow: displacement of each hit point under its primitive's rigid
    transform between the previous and current snapshot. optical flow:
    current projection minus the previous camera's projection of the
    previous-tick point, in pixels.
    """
    if dirs is None:
        dirs = camera.pixel_dirs()
    if t is None or prim is None:
        t, prim, _ = raycast(snap, np.asarray(camera.position, dtype=float),
                             dirs, camera.near, camera.far)
    if prev_snap.n_boxes != snap.n_boxes:
        raise RenderError("flow requires snapshots of the same scene")
    n = len(dirs)
    optical = np.zeros((n, 2))
    scene_fl = np.zeros((n, 3))
    hit = prim >= 0
    if not np.any(hit):
        return optical, scene_fl
    hidx = np.nonzero(hit)[0]
    hp = prim[hidx]
    x_cur = np.asarray(camera.position) + t[hidx, None] * dirs[hidx]
    x_prev = x_cur.copy()
    isbox = hp < snap.n_boxes
    # primitives whose pose is bit-identical across ticks keep x_prev == x_cur
    if np.any(isbox):
        b_all = hp[isbox]
        same = (np.all(snap.box_center[b_all] == prev_snap.box_center[b_all],
                       axis=1) & (snap.box_yaw[b_all] == prev_snap.box_yaw[b_all]))
        isbox[np.nonzero(isbox)[0][same]] = False
    if np.any(isbox):
        b = hp[isbox]
        rel = x_cur[isbox] - snap.box_center[b]
        cy, sy = np.cos(-snap.box_yaw[b]), np.sin(-snap.box_yaw[b])
        loc = np.stack([cy * rel[:, 0] - sy * rel[:, 1],
                        sy * rel[:, 0] + cy * rel[:, 1], rel[:, 2]], axis=1)
        py, psy = np.cos(prev_snap.box_yaw[b]), np.sin(prev_snap.box_yaw[b])
        x_prev[isbox] = np.stack(
            [py * loc[:, 0] - psy * loc[:, 1] + prev_snap.box_center[b, 0],
             psy * loc[:, 0] + py * loc[:, 1] + prev_snap.box_center[b, 1],
             loc[:, 2] + prev_snap.box_center[b, 2]], axis=1)
    scene_fl[hidx] = x_cur - x_prev
    u1, v1, f1 = camera.project(x_cur)
    u0, v0, f0 = prev_cam.project(x_prev)
    ok = f1 & f0
    optical[hidx, 0] = np.where(ok, u1 - u0, 0.0)
    optical[hidx, 1] = np.where(ok, v1 - v0, 0.0)
    return optical, scene_fl


def hammersley_sequence(n: int):
    """Low-discrepancy 2D points: (i/n, radical inverse base 2 of i)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    pts = []
    for i in range(n):
        f = 0.5
        r = 0.0
        k = i
        while k:
            if k & 1:
                r += f
            k >>= 1
            f /= 2.0
        pts.append((i / n, r))
    return pts


# ---------------------------------------------------------------------------
# Frame export: PNG for color-like channels, raw float32 planes with a
# 16-byte header (magic, H, W, C, little endian) for metric channels.
# ---------------------------------------------------------------------------

PLANE_MAGIC = b"RSPF"


def id_palette(n: int = 256) -> np.ndarray:
    """Fixed palette: id 0 is black, the rest a golden-ratio hue walk."""
    pal = np.zeros((n, 3), dtype=np.uint8)
    for i in range(1, n):
        h = (i * 0.618033988749895) % 1.0
        r, g, b = colorsys.hsv_to_rgb(h, 0.75, 0.95)
        pal[i] = (int(r * 255), int(g * 255), int(b * 255))
    return pal


def save_png_rgb(rgb: np.ndarray, path) -> None:
    from PIL import Image

    arr = np.clip(np.asarray(rgb) * 255.0 + 0.5, 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path)


def save_png_ids(ids: np.ndarray, path) -> None:
    from PIL import Image

    pal = id_palette()
    arr = pal[np.asarray(ids, dtype=np.int64) % len(pal)]
    Image.fromarray(arr, mode="RGB").save(path)


def save_raw_plane(arr: np.ndarray, path) -> None:
    arr = np.asarray(arr, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    h, w, c = arr.shape
    with open(path, "wb") as f:
        f.write(PLANE_MAGIC)
        f.write(struct.pack("<III", h, w, c))
        f.write(arr.astype("<f4").tobytes())


def load_raw_plane(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != PLANE_MAGIC:
            raise RenderError(f"bad plane magic {magic!r}")
        h, w, c = struct.unpack("<III", f.read(12))
        data = np.frombuffer(f.read(), dtype="<f4")
    return data.reshape(h, w, c)
