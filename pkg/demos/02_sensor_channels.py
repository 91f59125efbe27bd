"""Render every per-pixel channel of a furnished room, write PNG and raw
float planes, run the two LiDAR models and derive a local occupancy map.

Run:  python demos/02_sensor_channels.py
"""

import pathlib
import tempfile

import numpy as np

from roomsim import prefab
from roomsim.render import (
    Camera,
    RenderPreset,
    render,
    save_png_ids,
    save_png_rgb,
    save_raw_plane,
)
from roomsim.sensors import GridConfig, LidarConfig, grid_to_pgm, lidar_scan, \
    scan_to_occupancy
from roomsim.snapshot import build_snapshot

out = pathlib.Path(tempfile.mkdtemp(prefix="roomsim_sensors_"))
scene = prefab.furniture_scene(n_objects=16, seed=11)
snap = build_snapshot(scene, robot_pose=(5.0, 1.2, 1.2))

camera = Camera.look_at((5.0, 1.2, 1.4), (5.0, 6.0, 0.6), width=512, height=512)
frame = render(snap, camera, RenderPreset.highfidelity())
save_png_rgb(frame.rgb, out / "rgb.png")
save_png_ids(frame.semantic, out / "semantic.png")
save_png_ids(frame.instance, out / "instance.png")
save_raw_plane(frame.depth, out / "depth.rspf")
save_raw_plane(frame.normals, out / "normals.rspf")
print(f"wrote rgb/semantic/instance/depth/normals under {out}")
hit = frame.depth > 0
print(f"depth range on hits: {frame.depth[hit].min():.2f}.."
      f"{frame.depth[hit].max():.2f} m")

# flow between two frames of a moving camera
camera2 = Camera.look_at((5.1, 1.2, 1.4), (5.1, 6.0, 0.6), width=512, height=512)
frame2 = render(snap, camera2, RenderPreset.highfidelity(),
                prev=(snap, camera))
mag = np.linalg.norm(frame2.optical_flow, axis=-1)
print(f"optical flow from a 10 cm sidestep: mean |flow| = "
      f"{mag[frame2.depth > 0].mean():.2f} px")

# single-beam scan to occupancy
rng = np.random.default_rng(0)
scan = lidar_scan(snap, LidarConfig.single_beam(n_rays=512, dropout_p=0.05),
                  rng=rng)
print(f"\n1-beam scan: {scan.valid.sum()} returns / 512 rays "
      f"(dropout included)")
grid = scan_to_occupancy(scan, GridConfig.centered((5.0, 1.2), resolution=0.1,
                                                   width=120, height=120))
grid_to_pgm(grid, out / "occupancy.pgm")
print(f"occupancy map: {int((grid.cells == 2).sum())} occupied, "
      f"{int((grid.cells == 1).sum())} free cells -> {out / 'occupancy.pgm'}")

vlp = lidar_scan(snap, LidarConfig.sixteen_beam(n_rays=256, dropout_p=0.0))
print(f"16-beam scan shape: {vlp.ranges.shape}, "
      f"returns: {int(vlp.valid.sum())}")
