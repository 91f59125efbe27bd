"""Range sensing: single and 16-beam spinning LiDAR with dropout noise, and
local occupancy-grid derivation from single-beam scans.

Scan encoding: a hit is valid with 0 < range <= max_range; a beam with no
return in range carries range == max_range with valid False; a dropped beam
carries range == 0 with valid False. Occupancy treats these differently
(no-return clears along the beam, dropped contributes nothing).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import grid_traverse, ray_boxes_t, ray_plane_poly_t
from .snapshot import Snapshot

UNKNOWN, FREE, OCCUPIED = 0, 1, 2


@dataclass(frozen=True)
class LidarConfig:
    n_rays: int = 512
    horizontal_fov: float = 2.0 * math.pi
    n_beams: int = 1
    vertical_angles: tuple = (0.0,)
    max_range: float = 10.0
    dropout_p: float = 0.05
    mount: tuple = (0.0, 0.0, 0.3, 0.0)  # x, y, z, yaw relative to the base

    def __post_init__(self):
        if self.n_rays < 1:
            raise ValueError("n_rays must be >= 1")
        if len(self.vertical_angles) != self.n_beams:
            raise ValueError("vertical_angles length must equal n_beams")
        if not (0.0 <= self.dropout_p <= 1.0):
            raise ValueError("dropout_p must be in [0, 1]")

    @classmethod
    def single_beam(cls, n_rays=512, **kw):
        return cls(n_rays=n_rays, n_beams=1, vertical_angles=(0.0,), **kw)

    @classmethod
    def sixteen_beam(cls, n_rays=512, **kw):
        angles = tuple(np.deg2rad(np.linspace(-15.0, 15.0, 16)))
        return cls(n_rays=n_rays, n_beams=16, vertical_angles=angles, **kw)

    def azimuths(self) -> np.ndarray:
        """Ray i at -fov/2 + i * fov / (n_rays - 1), sensor frame, CCW."""
        if self.n_rays == 1:
            return np.array([-self.horizontal_fov / 2.0])
        i = np.arange(self.n_rays, dtype=float)
        return -self.horizontal_fov / 2.0 + i * self.horizontal_fov / (self.n_rays - 1)


@dataclass
class LidarScan:
    ranges: np.ndarray  # (n_beams, n_rays)
    valid: np.ndarray  # (n_beams, n_rays) bool
    azimuths: np.ndarray  # (n_rays,) sensor frame
    max_range: float
    origin: tuple  # sensor position (x, y, z)
    yaw: float  # sensor heading in the world
    tick: int = 0

    def copy(self):
        return LidarScan(self.ranges.copy(), self.valid.copy(),
                         self.azimuths.copy(), self.max_range, self.origin,
                         self.yaw, self.tick)


def sensor_pose(snap: Snapshot, config: LidarConfig):
    if snap.robot_pose is None:
        bx, by, byaw = 0.0, 0.0, 0.0
    else:
        bx, by, byaw = snap.robot_pose
    mx, my, mz, myaw = config.mount
    c, s = math.cos(byaw), math.sin(byaw)
    return (bx + c * mx - s * my, by + s * mx + c * my, mz), byaw + myaw


def lidar_scan(snap: Snapshot, config: LidarConfig, rng=None, tick: int = 0,
               apply_noise: bool = True) -> LidarScan:
    """Cast all beams against every primitive; nearest hit per ray, then the
    dropout model. Pure numpy so results match a scalar reference loop
    exactly."""
    origin3, yaw = sensor_pose(snap, config)
    az = config.azimuths()
    world_az = az + yaw
    dirs = []
    for e in config.vertical_angles:
        ce, se = math.cos(e), math.sin(e)
        dirs.append(np.stack([ce * np.cos(world_az), ce * np.sin(world_az),
                              np.full_like(world_az, se)], axis=1))
    dirs = np.concatenate(dirs, axis=0)
    t = nearest_range(snap, np.asarray(origin3, dtype=float), dirs,
                      config.max_range)
    t = t.reshape(config.n_beams, config.n_rays)
    hit = np.isfinite(t)
    ranges = np.where(hit, t, config.max_range)
    scan = LidarScan(ranges=ranges, valid=hit, azimuths=az,
                     max_range=config.max_range, origin=tuple(origin3), yaw=yaw,
                     tick=tick)
    if apply_noise and config.dropout_p > 0.0:
        if rng is None:
            raise ValueError("dropout requires an rng")
        scan = apply_dropout(scan, config.dropout_p, rng)
    return scan


def nearest_range(snap: Snapshot, origin, dirs, max_range) -> np.ndarray:
    """Nearest-intersection distance per ray (inf when nothing in range),
    walking primitives in snapshot order."""
    best = np.full(len(dirs), np.inf)
    for b in range(snap.n_boxes):
        t, _, _ = ray_boxes_t(origin, dirs, snap.box_center[b], snap.box_yaw[b],
                              snap.box_half[b], t_max=max_range)
        best = np.where(t < best, t, best)
    for p in range(snap.n_planes):
        poly = snap.poly_xy[snap.poly_off[p]:snap.poly_off[p + 1]]
        t = ray_plane_poly_t(origin, dirs, snap.plane_z[p], poly, t_max=max_range)
        best = np.where(t < best, t, best)
    return best


def apply_dropout(scan: LidarScan, p: float, rng) -> LidarScan:
    """Invalidate each valid return independently with probability p.

    Dropped rays get range 0; no-return rays are left untouched."""
    if not (0.0 <= p <= 1.0):
        raise ValueError("p must be in [0, 1]")
    out = scan.copy()
    if p == 0.0:
        return out
    draws = rng.random(out.ranges.shape)
    dropped = out.valid & (draws < p)
    out.valid = out.valid & ~dropped
    out.ranges = np.where(dropped, 0.0, out.ranges)
    return out


# ---------------------------------------------------------------------------
# Occupancy grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridConfig:
    resolution: float = 0.1  # m per cell
    width: int = 100
    height: int = 100
    origin: tuple = (0.0, 0.0)  # world position of cell (0, 0)'s corner

    @classmethod
    def centered(cls, center, resolution=0.1, width=100, height=100):
        return cls(resolution=resolution, width=width, height=height,
                   origin=(center[0] - resolution * width / 2.0,
                           center[1] - resolution * height / 2.0))


@dataclass
class OccupancyGrid:
    config: GridConfig
    cells: np.ndarray  # (width, height) uint8 in {UNKNOWN, FREE, OCCUPIED}

    def cell_of(self, xy):
        gx = int(math.floor((xy[0] - self.config.origin[0]) / self.config.resolution))
        gy = int(math.floor((xy[1] - self.config.origin[1]) / self.config.resolution))
        return gx, gy

    def in_bounds(self, cell):
        return 0 <= cell[0] < self.config.width and 0 <= cell[1] < self.config.height


def scan_to_occupancy(scan: LidarScan, grid_config: GridConfig) -> OccupancyGrid:
    """Clear traversed cells, mark hit cells; occupied wins over free.

    Single-beam scans only: hits clear up to the hit cell and mark it, valid
    no-returns clear to max range, dropped beams contribute nothing.
    """
    if scan.ranges.shape[0] != 1:
        raise ValueError("occupancy derivation expects a 1-beam scan")
    cfg = grid_config
    cells = np.full((cfg.width, cfg.height), UNKNOWN, dtype=np.uint8)
    ox, oy = scan.origin[0], scan.origin[1]
    free_cells = []
    occ_cells = []
    world_az = scan.azimuths + scan.yaw
    for i in range(scan.ranges.shape[1]):
        r = scan.ranges[0, i]
        is_valid = scan.valid[0, i]
        if not is_valid and r == 0.0:
            continue  # dropped
        reach = r if is_valid else scan.max_range
        end = (ox + reach * math.cos(world_az[i]), oy + reach * math.sin(world_az[i]))
        path = grid_traverse((ox, oy), end, cfg.origin, cfg.resolution)
        if is_valid:
            free_cells.extend(path[:-1])
            occ_cells.append(path[-1])
        else:
            free_cells.extend(path)
    for gx, gy in free_cells:
        if 0 <= gx < cfg.width and 0 <= gy < cfg.height:
            cells[gx, gy] = FREE
    for gx, gy in occ_cells:
        if 0 <= gx < cfg.width and 0 <= gy < cfg.height:
            cells[gx, gy] = OCCUPIED
    return OccupancyGrid(config=cfg, cells=cells)


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------

def scan_to_record(scan: LidarScan) -> str:
    return json.dumps({
        "tick": scan.tick,
        "angles": [round(float(a), 9) for a in scan.azimuths],
        "ranges": [[round(float(r), 6) for r in row] for row in scan.ranges],
        "valid": [[bool(v) for v in row] for row in scan.valid],
    }, sort_keys=True)


PGM_VALUES = {OCCUPIED: 0, UNKNOWN: 128, FREE: 255}


def grid_to_pgm(grid: OccupancyGrid, path) -> None:
    """PGM P5: 0 = occupied, 128 = unknown, 255 = free; row 0 = max y."""
    img = np.full((grid.config.height, grid.config.width), 128, dtype=np.uint8)
    for state, value in PGM_VALUES.items():
        img[(grid.cells.T == state)] = value
    img = img[::-1]  # +y up
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (grid.config.width, grid.config.height))
        f.write(img.tobytes())
