"""Shared 2.5D geometry kernel.

World geometry is restricted to yaw-rotated extruded boxes, vertical wall
rectangles (zero-thickness boxes) and horizontal polygon planes. Everything
here is plain float64 math shared by the scene model, physics, rendering and
range sensing.
"""

from __future__ import annotations

import math

import numpy as np

HIT_EPS = 1e-9


def rot2(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s], [s, c]])


def yaw_apply(yaw: float, pts: np.ndarray) -> np.ndarray:
    """Rotate points (..., 2|3) about +z by yaw. z components pass through."""
    pts = np.asarray(pts, dtype=float)
    c, s = math.cos(yaw), math.sin(yaw)
    out = pts.copy()
    out[..., 0] = c * pts[..., 0] - s * pts[..., 1]
    out[..., 1] = s * pts[..., 0] + c * pts[..., 1]
    return out


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    return math.pi - (math.pi - a) % (2.0 * math.pi)


def world_to_box(points: np.ndarray, center, yaw: float) -> np.ndarray:
    """World points (...,3) into the local frame of a yaw-box."""
    return yaw_apply(-yaw, np.asarray(points, dtype=float) - np.asarray(center, dtype=float))


def box_to_world(points: np.ndarray, center, yaw: float) -> np.ndarray:
    return yaw_apply(yaw, points) + np.asarray(center, dtype=float)


def box_corners_2d(center2, yaw: float, half2) -> np.ndarray:
    """(4,2) corner array of a 2D oriented rectangle."""
    hx, hy = half2
    local = np.array([[hx, hy], [-hx, hy], [-hx, -hy], [hx, -hy]])
    return local @ rot2(yaw).T + np.asarray(center2, dtype=float)


# ---------------------------------------------------------------------------
# Ray casting against the three primitive kinds.
#
# ray_boxes_t is vectorized over rays for one box; callers loop primitives in
# a fixed order so results are bit-reproducible (and reproducible against a
# scalar reference loop using the same formulas).
# ---------------------------------------------------------------------------

def ray_boxes_t(origin, dirs, center, yaw, half, t_min=HIT_EPS, t_max=np.inf):
    """Slab test of rays (shared origin) against one yaw-box.

    Returns (t, axis, sign): t is inf on miss; axis/sign identify the face
    whose outward local normal is sign * e_axis.
    """
    origin = np.asarray(origin, dtype=float)
    dirs = np.asarray(dirs, dtype=float)
    o = world_to_box(origin, center, yaw)
    d = yaw_apply(-yaw, dirs)
    n = dirs.shape[0]
    tn = np.full(n, -np.inf)
    tf = np.full(n, np.inf)
    axis = np.zeros(n, dtype=np.int64)
    sign = np.zeros(n, dtype=np.int64)
    miss = np.zeros(n, dtype=bool)
    for k in range(3):
        dk = d[:, k]
        ok = o[k]
        par = np.abs(dk) < 1e-300
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-half[k] - ok) / dk
            t2 = (half[k] - ok) / dk
        lo = np.minimum(t1, t2)
        hi = np.maximum(t1, t2)
        # parallel rays miss unless the origin lies inside this slab
        miss |= par & (abs(ok) > half[k])
        lo = np.where(par, -np.inf, lo)
        hi = np.where(par, np.inf, hi)
        enter = lo > tn
        axis = np.where(enter, k, axis)
        sign = np.where(enter, np.where(np.where(par, 0.0, dk) < 0, 1, -1), sign)
        tn = np.maximum(tn, lo)
        tf = np.minimum(tf, hi)
    t = np.where(tn >= t_min, tn, tf)
    hit = ~miss & (tn <= tf) & (t >= t_min) & (t <= t_max)
    t = np.where(hit, t, np.inf)
    inside = hit & (tn < t_min)
    if np.any(inside):
        # origin inside the box: report the exit face, normal toward origin
        exit_axis = np.zeros(n, dtype=np.int64)
        exit_sign = np.zeros(n, dtype=np.int64)
        for k in range(3):
            dk = d[:, k]
            ok = o[k]
            par = np.abs(dk) < 1e-300
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = (-half[k] - ok) / dk
                t2 = (half[k] - ok) / dk
            hi = np.where(par, np.inf, np.maximum(t1, t2))
            is_exit = hi == tf
            exit_axis = np.where(is_exit, k, exit_axis)
            exit_sign = np.where(is_exit, np.where(dk < 0, 1, -1), exit_sign)
        axis = np.where(inside, exit_axis, axis)
        sign = np.where(inside, exit_sign, sign)
    return t, axis, sign


def ray_plane_poly_t(origin, dirs, z, poly, t_min=HIT_EPS, t_max=np.inf):
    """Rays (shared origin) against a horizontal polygon at height z."""
    origin = np.asarray(origin, dtype=float)
    dirs = np.asarray(dirs, dtype=float)
    dz = dirs[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (z - origin[2]) / dz
        ok = (np.abs(dz) >= 1e-300) & (t >= t_min) & (t <= t_max)
        tt = np.where(ok, t, 0.0)
        pts = origin[None, :2] + tt[:, None] * dirs[:, :2]
    ok &= points_in_polygon(pts, poly)
    return np.where(ok, t, np.inf)


def points_in_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd containment test, vectorized over pts (N,2)."""
    pts = np.asarray(pts, dtype=float)
    poly = np.asarray(poly, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < np.where(crosses, xint, np.inf))
    return inside


def point_in_polygon(pt, poly) -> bool:
    return bool(points_in_polygon(np.asarray([pt], dtype=float), poly)[0])


# ---------------------------------------------------------------------------
# Distances and intersection predicates.
# ---------------------------------------------------------------------------

def point_box_distance(p, center, yaw, half) -> float:
    """Euclidean distance from a point to a solid yaw-box (0 inside)."""
    q = np.abs(world_to_box(np.asarray(p, dtype=float), center, yaw)) - np.asarray(half, dtype=float)
    return float(np.linalg.norm(np.maximum(q, 0.0)))


def point_box_surface_distance(p, center, yaw, half) -> float:
    """Unsigned distance from a point to the box *surface*."""
    q = np.abs(world_to_box(np.asarray(p, dtype=float), center, yaw)) - np.asarray(half, dtype=float)
    outside = float(np.linalg.norm(np.maximum(q, 0.0)))
    inside = float(np.max(q))  # negative when strictly inside
    return outside if inside > 0 else -inside


def points_obb_distance_2d(pts, center2, yaw, half2):
    """Distance from 2D points (N,2) to a solid 2D oriented rectangle."""
    pts = np.asarray(pts, dtype=float)
    rel = pts - np.asarray(center2, dtype=float)
    c, s = math.cos(yaw), math.sin(yaw)
    lx = c * rel[:, 0] + s * rel[:, 1]
    ly = -s * rel[:, 0] + c * rel[:, 1]
    qx = np.maximum(np.abs(lx) - half2[0], 0.0)
    qy = np.maximum(np.abs(ly) - half2[1], 0.0)
    return np.hypot(qx, qy)


def points_segment_distance_2d(pts, a, b):
    """Distance from 2D points (N,2) to segment ab."""
    pts = np.asarray(pts, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(pts - a, axis=1)
    t = np.clip(((pts - a) @ ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(pts - proj, axis=1)


def segment_box_distance(p0, p1, center, yaw, half, iters=64) -> float:
    """Min distance from segment p0p1 to a solid yaw-box.

    Point-to-convex-set distance is convex along the segment, so ternary
    search converges; 64 splits put the parameter well below 1e-12.
    """
    a = world_to_box(np.asarray(p0, dtype=float), center, yaw)
    b = world_to_box(np.asarray(p1, dtype=float), center, yaw)
    h = np.asarray(half, dtype=float)

    def d(t):
        q = np.abs(a + t * (b - a)) - h
        return float(np.linalg.norm(np.maximum(q, 0.0)))

    lo, hi = 0.0, 1.0
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if d(m1) <= d(m2):
            hi = m2
        else:
            lo = m1
    return min(d(lo), d(hi), d(0.0), d(1.0))


def _project_interval(corners: np.ndarray, axis: np.ndarray):
    p = corners @ axis
    return p.min(), p.max()


def boxes_intersect(c1, y1, h1, c2, y2, h2) -> bool:
    """Exact intersection of two solid yaw-boxes (closed sets).

    z-interval overlap plus 2D separating-axis test over the 4 face axes.
    """
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    if c1[2] - h1[2] > c2[2] + h2[2] or c2[2] - h2[2] > c1[2] + h1[2]:
        return False
    k1 = box_corners_2d(c1[:2], y1, h1[:2])
    k2 = box_corners_2d(c2[:2], y2, h2[:2])
    for yaw in (y1, y2):
        c, s = math.cos(yaw), math.sin(yaw)
        for axis in (np.array([c, s]), np.array([-s, c])):
            lo1, hi1 = _project_interval(k1, axis)
            lo2, hi2 = _project_interval(k2, axis)
            if lo1 > hi2 or lo2 > hi1:
                return False
    return True


def box_segment_intersect_2d(center2, yaw, half2, a, b) -> bool:
    """2D oriented rectangle vs segment (solid rectangle)."""
    a = world_to_box(np.array([a[0], a[1], 0.0]), [center2[0], center2[1], 0.0], yaw)[:2]
    b = world_to_box(np.array([b[0], b[1], 0.0]), [center2[0], center2[1], 0.0], yaw)[:2]
    # slab clip of the segment against the axis-aligned rectangle
    d = b - a
    t0, t1 = 0.0, 1.0
    for k in range(2):
        if abs(d[k]) < 1e-300:
            if abs(a[k]) > half2[k]:
                return False
        else:
            u = (-half2[k] - a[k]) / d[k]
            v = (half2[k] - a[k]) / d[k]
            lo, hi = min(u, v), max(u, v)
            t0, t1 = max(t0, lo), min(t1, hi)
            if t0 > t1:
                return False
    return True


def segments_intersect_2d(a1, a2, b1, b2) -> bool:
    """Proper or touching intersection of segments a and b."""

    def orient(p, q, r):
        v = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
        if v > 1e-12:
            return 1
        if v < -1e-12:
            return -1
        return 0

    def on_seg(p, q, r):
        return (
            min(p[0], q[0]) - 1e-12 <= r[0] <= max(p[0], q[0]) + 1e-12
            and min(p[1], q[1]) - 1e-12 <= r[1] <= max(p[1], q[1]) + 1e-12
        )

    o1, o2 = orient(a1, a2, b1), orient(a1, a2, b2)
    o3, o4 = orient(b1, b2, a1), orient(b1, b2, a2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(a1, a2, b1):
        return True
    if o2 == 0 and on_seg(a1, a2, b2):
        return True
    if o3 == 0 and on_seg(b1, b2, a1):
        return True
    if o4 == 0 and on_seg(b1, b2, a2):
        return True
    return False


def polygon_is_simple(poly) -> bool:
    """True when no two non-adjacent edges intersect."""
    poly = np.asarray(poly, dtype=float)
    n = len(poly)
    if n < 3:
        return False
    for i in range(n):
        a1, a2 = poly[i], poly[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if segments_intersect_2d(a1, a2, poly[j], poly[(j + 1) % n]):
                return False
    return True


# ---------------------------------------------------------------------------
# Vectorized batch queries over box arrays (the shapes the physics cache
# holds). cosv/sinv are cos(yaw)/sin(yaw) per box.
# ---------------------------------------------------------------------------

def points_boxes_distance_2d(pts, centers2, cosv, sinv, halves2):
    """(N, M) horizontal distances from points to solid 2D oriented boxes."""
    pts = np.asarray(pts, dtype=float)
    rel = pts[:, None, :] - centers2[None, :, :]  # (N, M, 2)
    lx = cosv * rel[..., 0] + sinv * rel[..., 1]
    ly = -sinv * rel[..., 0] + cosv * rel[..., 1]
    qx = np.maximum(np.abs(lx) - halves2[:, 0], 0.0)
    qy = np.maximum(np.abs(ly) - halves2[:, 1], 0.0)
    return np.hypot(qx, qy)


def points_segments_distance_2d(pts, A, B):
    """(N, W) distances from points to segments A[i]-B[i]."""
    pts = np.asarray(pts, dtype=float)
    AB = B - A  # (W, 2)
    denom = np.einsum("wd,wd->w", AB, AB)
    denom = np.where(denom == 0.0, 1.0, denom)
    AP = pts[:, None, :] - A[None, :, :]  # (N, W, 2)
    t = np.clip(np.einsum("nwd,wd->nw", AP, AB) / denom, 0.0, 1.0)
    proj = A[None, :, :] + t[..., None] * AB[None, :, :]
    return np.linalg.norm(pts[:, None, :] - proj, axis=-1)


def segments_boxes_distance(P0, P1, centers, cosv, sinv, halves, iters=64,
                            radius=None):
    """(S, M) min distances from 3D segments to solid yaw-boxes.

    Same ternary recursion as segment_box_distance, evaluated elementwise so
    the scalar and batch paths agree bit for bit. When `radius` is given,
    pairs that conservative endpoint/midpoint bounds already classify
    against it skip the ternary refinement (the returned bound preserves the
    d < radius verdict exactly).
    """
    P0 = np.asarray(P0, dtype=float)
    P1 = np.asarray(P1, dtype=float)

    def to_local(P):
        rel = P[:, None, :] - centers[None, :, :]
        lx = cosv * rel[..., 0] + sinv * rel[..., 1]
        ly = -sinv * rel[..., 0] + cosv * rel[..., 1]
        return np.stack([lx, ly, rel[..., 2]], axis=-1)

    a = to_local(P0)  # (S, M, 3)
    b = to_local(P1)
    ab = b - a

    def d(t):
        q = np.abs(a + t[..., None] * ab) - halves[None, :, :]
        return np.linalg.norm(np.maximum(q, 0.0), axis=-1)

    S, M = a.shape[0], a.shape[1]
    zeros = np.zeros((S, M))
    ones = np.ones((S, M))
    d0 = d(zeros)
    d1 = d(ones)
    if radius is not None:
        ends = np.minimum(d0, d1)
        dm = d(np.full((S, M), 0.5))
        half_len = 0.5 * np.linalg.norm(ab, axis=-1)
        lower = np.maximum(dm - half_len, 0.0)  # Lipschitz bound
        settled = (ends < radius) | (lower >= radius)
        if np.all(settled):
            return np.where(ends < radius, ends, lower)
    lo = zeros.copy()
    hi = ones.copy()
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        take = d(m1) <= d(m2)
        hi = np.where(take, m2, hi)
        lo = np.where(take, lo, m1)
    return np.minimum.reduce([d(lo), d(hi), d0, d1])


def box_boxes_intersect(c1, y1, h1, centers, cosv, sinv, halves, corners):
    """(M,) exact SAT intersection of one yaw-box against M yaw-boxes.

    corners: precomputed (M, 4, 2) footprint corners of the M boxes.
    """
    c1 = np.asarray(c1, dtype=float)
    h1 = np.asarray(h1, dtype=float)
    ok = ~((c1[2] - h1[2] > centers[:, 2] + halves[:, 2]) |
           (centers[:, 2] - halves[:, 2] > c1[2] + h1[2]))
    if not np.any(ok):
        return ok
    k1 = box_corners_2d(c1[:2], y1, h1[:2])  # (4, 2)
    c, s = math.cos(y1), math.sin(y1)
    # axes of the single box: project everything once
    for axis in (np.array([c, s]), np.array([-s, c])):
        p1 = k1 @ axis
        pm = corners @ axis  # (M, 4)
        sep = (p1.min() > pm.max(axis=1)) | (pm.min(axis=1) > p1.max())
        ok &= ~sep
    # axes of each of the M boxes
    for ax, ay in ((cosv, sinv), (-sinv, cosv)):
        pm = corners[..., 0] * ax[:, None] + corners[..., 1] * ay[:, None]  # (M, 4)
        p1 = k1[None, :, 0] * ax[:, None] + k1[None, :, 1] * ay[:, None]  # (M, 4)
        sep = (p1.min(axis=1) > pm.max(axis=1)) | (pm.min(axis=1) > p1.max(axis=1))
        ok &= ~sep
    return ok


# ---------------------------------------------------------------------------
# Grid traversal (Amanatides & Woo DDA) for occupancy maps and geodesics.
# ---------------------------------------------------------------------------

def grid_traverse(p0, p1, origin, resolution, max_cells=1_000_000):
    """Cells (ix, iy) visited by the segment p0 -> p1, in order."""
    x0 = (p0[0] - origin[0]) / resolution
    y0 = (p0[1] - origin[1]) / resolution
    x1 = (p1[0] - origin[0]) / resolution
    y1 = (p1[1] - origin[1]) / resolution
    ix, iy = int(math.floor(x0)), int(math.floor(y0))
    ix1, iy1 = int(math.floor(x1)), int(math.floor(y1))
    dx, dy = x1 - x0, y1 - y0
    step_x = 1 if dx > 0 else -1
    step_y = 1 if dy > 0 else -1
    tmax_x = ((ix + (step_x > 0)) - x0) / dx if dx != 0 else math.inf
    tmax_y = ((iy + (step_y > 0)) - y0) / dy if dy != 0 else math.inf
    tdelta_x = abs(1.0 / dx) if dx != 0 else math.inf
    tdelta_y = abs(1.0 / dy) if dy != 0 else math.inf
    cells = [(ix, iy)]
    while (ix, iy) != (ix1, iy1) and len(cells) < max_cells:
        if tmax_x < tmax_y:
            ix += step_x
            tmax_x += tdelta_x
        else:
            iy += step_y
            tmax_y += tdelta_y
        cells.append((ix, iy))
    return cells


# ---------------------------------------------------------------------------
# Hashing. State and scene hashes are 64-bit FNV-1a over canonical text.
# ---------------------------------------------------------------------------

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h
