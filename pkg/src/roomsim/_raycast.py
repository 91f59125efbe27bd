"""Numba ray-cast kernel over the snapshot primitive arrays.

Double precision, no fastmath: results must be bit-reproducible across runs.
The kernel walks boxes with a bounding-sphere reject, then horizontal
polygon planes, keeping the nearest hit per ray.
"""

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True, fastmath=False)
def cast_rays(origins, dirs, box_c, box_cos, box_sin, box_half, box_rad,
              plane_z, poly_xy, poly_off, enabled, skip, t_min, t_max):
    n = dirs.shape[0]
    nb = box_c.shape[0]
    npl = plane_z.shape[0]
    out_t = np.zeros(n)
    out_prim = np.full(n, -1, np.int64)
    out_nrm = np.zeros((n, 3))
    for i in prange(n):
        ox, oy, oz = origins[i, 0], origins[i, 1], origins[i, 2]
        dx, dy, dz = dirs[i, 0], dirs[i, 1], dirs[i, 2]
        best = t_max
        prim = -1
        nrm_x = 0.0
        nrm_y = 0.0
        nrm_z = 0.0
        for b in range(nb):
            if b == skip[i] or enabled[b] == 0:
                continue
            rx = ox - box_c[b, 0]
            ry = oy - box_c[b, 1]
            rz = oz - box_c[b, 2]
            tc = -(rx * dx + ry * dy + rz * dz)
            rb = box_rad[b]
            if tc - rb > best or tc + rb < t_min:
                continue
            l2 = (rx * rx + ry * ry + rz * rz) - tc * tc
            if l2 > rb * rb:
                continue
            c = box_cos[b]
            s = box_sin[b]
            lox = c * rx + s * ry
            loy = -s * rx + c * ry
            ldx = c * dx + s * dy
            ldy = -s * dx + c * dy
            tn = -np.inf
            tf = np.inf
            ax = -1
            sg = 0.0
            ex_ax = -1
            ex_sg = 0.0
            miss = False
            for k in range(3):
                if k == 0:
                    o = lox
                    d = ldx
                elif k == 1:
                    o = loy
                    d = ldy
                else:
                    o = rz
                    d = dz
                h = box_half[b, k]
                if abs(d) < 1e-300:
                    if abs(o) > h:
                        miss = True
                        break
                    continue
                t1 = (-h - o) / d
                t2 = (h - o) / d
                if t1 < t2:
                    lo_ = t1
                    hi_ = t2
                else:
                    lo_ = t2
                    hi_ = t1
                if lo_ > tn:
                    tn = lo_
                    ax = k
                    sg = 1.0 if d < 0 else -1.0
                if hi_ < tf:
                    tf = hi_
                    ex_ax = k
                    ex_sg = 1.0 if d < 0 else -1.0
            if miss or tn > tf:
                continue
            t = tn if tn >= t_min else tf
            if t < t_min or t > best:
                continue
            if tn < t_min:
                ax = ex_ax
                sg = ex_sg
            best = t
            prim = b
            if ax == 0:
                nrm_x = c * sg
                nrm_y = s * sg
                nrm_z = 0.0
            elif ax == 1:
                nrm_x = -s * sg
                nrm_y = c * sg
                nrm_z = 0.0
            else:
                nrm_x = 0.0
                nrm_y = 0.0
                nrm_z = sg
        for p in range(npl):
            pid = nb + p
            if pid == skip[i] or enabled[pid] == 0:
                continue
            if abs(dz) < 1e-300:
                continue
            t = (plane_z[p] - oz) / dz
            if t < t_min or t > best:
                continue
            px = ox + t * dx
            py = oy + t * dy
            inside = False
            v0 = poly_off[p]
            v1 = poly_off[p + 1]
            nv = v1 - v0
            for e in range(nv):
                x1 = poly_xy[v0 + e, 0]
                y1 = poly_xy[v0 + e, 1]
                x2 = poly_xy[v0 + (e + 1) % nv, 0]
                y2 = poly_xy[v0 + (e + 1) % nv, 1]
                if (y1 > py) != (y2 > py):
                    xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
                    if px < xint:
                        inside = not inside
            if inside:
                best = t
                prim = pid
                nrm_x = 0.0
                nrm_y = 0.0
                nrm_z = 1.0 if dz < 0 else -1.0
        if prim >= 0:
            out_t[i] = best
            out_prim[i] = prim
            out_nrm[i, 0] = nrm_x
            out_nrm[i, 1] = nrm_y
            out_nrm[i, 2] = nrm_z
    return out_t, out_prim, out_nrm
