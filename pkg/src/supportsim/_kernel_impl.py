"""Loop kernels shared by the numba and pure-numpy backends.

Everything here is written in nopython-compatible style: scalar loops over
preallocated numpy arrays, no Python objects.  ``kernels`` compiles these
with numba when that backend is active; otherwise the same code runs
interpreted.  Keeping a single source for both paths guarantees the two
backends perform the same arithmetic in the same order.
"""

import math

import numpy as np

# Traversal stack depth. build_bvh splits ranges at the median, so tree depth
# is bounded by ~log2(n_faces) + 1; 64 covers any mesh that fits in memory.
STACK_SIZE = 64


def ray_cast_batch(
    node_min,
    node_max,
    node_left,
    node_start,
    node_count,
    face_order,
    v0,
    v1,
    v2,
    origins,
    dirs,
    ignore_face,
    t_min,
):
    """First-hit ray casts against a BVH.

    Returns (hit_face, hit_t) arrays; hit_face is -1 where nothing was hit.
    Hits require t >= t_min.  Ties on t are broken toward the smaller face
    id, so results do not depend on traversal order.
    """
    n_rays = origins.shape[0]
    hit_face = np.full(n_rays, -1, np.int64)
    hit_t = np.full(n_rays, np.inf, np.float64)
    stack = np.empty(STACK_SIZE, np.int64)

    for r in range(n_rays):
        ox = origins[r, 0]
        oy = origins[r, 1]
        oz = origins[r, 2]
        dx = dirs[r, 0]
        dy = dirs[r, 1]
        dz = dirs[r, 2]
        skip = ignore_face[r]
        best_t = np.inf
        best_f = -1

        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]

            # Slab test, clipped against the best hit found so far.
            tlo = t_min
            thi = best_t
            miss = False

            mn = node_min[node, 0]
            mx = node_max[node, 0]
            if dx != 0.0:
                inv = 1.0 / dx
                ta = (mn - ox) * inv
                tb = (mx - ox) * inv
                if ta > tb:
                    ta, tb = tb, ta
                if ta > tlo:
                    tlo = ta
                if tb < thi:
                    thi = tb
                miss = tlo > thi
            elif ox < mn or ox > mx:
                miss = True

            if not miss:
                mn = node_min[node, 1]
                mx = node_max[node, 1]
                if dy != 0.0:
                    inv = 1.0 / dy
                    ta = (mn - oy) * inv
                    tb = (mx - oy) * inv
                    if ta > tb:
                        ta, tb = tb, ta
                    if ta > tlo:
                        tlo = ta
                    if tb < thi:
                        thi = tb
                    miss = tlo > thi
                elif oy < mn or oy > mx:
                    miss = True

            if not miss:
                mn = node_min[node, 2]
                mx = node_max[node, 2]
                if dz != 0.0:
                    inv = 1.0 / dz
                    ta = (mn - oz) * inv
                    tb = (mx - oz) * inv
                    if ta > tb:
                        ta, tb = tb, ta
                    if ta > tlo:
                        tlo = ta
                    if tb < thi:
                        thi = tb
                    miss = tlo > thi
                elif oz < mn or oz > mx:
                    miss = True

            if miss:
                continue

            cnt = node_count[node]
            if cnt > 0:
                start = node_start[node]
                for i in range(start, start + cnt):
                    f = face_order[i]
                    if f == skip:
                        continue
                    # Barycentric ray/triangle test, edge-inclusive.
                    e1x = v1[f, 0] - v0[f, 0]
                    e1y = v1[f, 1] - v0[f, 1]
                    e1z = v1[f, 2] - v0[f, 2]
                    e2x = v2[f, 0] - v0[f, 0]
                    e2y = v2[f, 1] - v0[f, 1]
                    e2z = v2[f, 2] - v0[f, 2]
                    px = dy * e2z - dz * e2y
                    py = dz * e2x - dx * e2z
                    pz = dx * e2y - dy * e2x
                    det = e1x * px + e1y * py + e1z * pz
                    if det == 0.0:
                        continue
                    inv_det = 1.0 / det
                    tx = ox - v0[f, 0]
                    ty = oy - v0[f, 1]
                    tz = oz - v0[f, 2]
                    u = (tx * px + ty * py + tz * pz) * inv_det
                    if u < 0.0 or u > 1.0:
                        continue
                    qx = ty * e1z - tz * e1y
                    qy = tz * e1x - tx * e1z
                    qz = tx * e1y - ty * e1x
                    v = (dx * qx + dy * qy + dz * qz) * inv_det
                    if v < 0.0 or u + v > 1.0:
                        continue
                    t = (e2x * qx + e2y * qy + e2z * qz) * inv_det
                    if t < t_min or t == np.inf:
                        continue
                    if t < best_t or (t == best_t and (best_f < 0 or f < best_f)):
                        best_t = t
                        best_f = f
            else:
                left = node_left[node]
                stack[top] = left
                top += 1
                stack[top] = left + 1
                top += 1

        hit_face[r] = best_f
        if best_f >= 0:
            hit_t[r] = best_t
    return hit_face, hit_t


def count_column_crossings(
    px0, py0, px1, py1, px2, py2, x_lo, y_lo, dx, dy, nx, ny, jitter_x, jitter_y
):
    """Pass 1 of column rasterization: per-triangle count of grid columns
    whose (jittered) center falls inside the triangle's xy projection.

    Triangles with a degenerate projection (vertical or zero-area faces)
    cover no columns.
    """
    n_tri = px0.shape[0]
    counts = np.zeros(n_tri, np.int64)
    for t in range(n_tri):
        ax = px0[t]
        ay = py0[t]
        bx = px1[t]
        by = py1[t]
        cx = px2[t]
        cy = py2[t]
        area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if area2 == 0.0:
            continue
        tri_min_x = min(ax, min(bx, cx))
        tri_max_x = max(ax, max(bx, cx))
        tri_min_y = min(ay, min(by, cy))
        tri_max_y = max(ay, max(by, cy))
        # Column centers: x_lo + (i + 0.5) * dx + jitter_x
        i0 = int(math.ceil((tri_min_x - x_lo - jitter_x) / dx - 0.5))
        i1 = int(math.floor((tri_max_x - x_lo - jitter_x) / dx - 0.5))
        j0 = int(math.ceil((tri_min_y - y_lo - jitter_y) / dy - 0.5))
        j1 = int(math.floor((tri_max_y - y_lo - jitter_y) / dy - 0.5))
        if i0 < 0:
            i0 = 0
        if i1 > nx - 1:
            i1 = nx - 1
        if j0 < 0:
            j0 = 0
        if j1 > ny - 1:
            j1 = ny - 1
        n_inside = 0
        for i in range(i0, i1 + 1):
            sx = x_lo + (i + 0.5) * dx + jitter_x
            for j in range(j0, j1 + 1):
                sy = y_lo + (j + 0.5) * dy + jitter_y
                w0 = (cx - bx) * (sy - by) - (cy - by) * (sx - bx)
                w1 = (ax - cx) * (sy - cy) - (ay - cy) * (sx - cx)
                w2 = (bx - ax) * (sy - ay) - (by - ay) * (sx - ax)
                if area2 > 0.0:
                    if w0 >= 0.0 and w1 >= 0.0 and w2 >= 0.0:
                        n_inside += 1
                else:
                    if w0 <= 0.0 and w1 <= 0.0 and w2 <= 0.0:
                        n_inside += 1
        counts[t] = n_inside
    return counts


def fill_column_crossings(
    px0,
    py0,
    px1,
    py1,
    px2,
    py2,
    z_at_v0,
    grad_x,
    grad_y,
    x_lo,
    y_lo,
    dx,
    dy,
    nx,
    ny,
    jitter_x,
    jitter_y,
    offsets,
    out_col,
    out_z,
    out_face,
    face_ids,
):
    """Pass 2: write (column, crossing z, face id) for each covered column.

    ``offsets[t]`` is the output slot where triangle t's crossings begin
    (exclusive cumulative sum of pass-1 counts), which makes the layout
    deterministic and independent of any parallel schedule.
    """
    n_tri = px0.shape[0]
    for t in range(n_tri):
        ax = px0[t]
        ay = py0[t]
        bx = px1[t]
        by = py1[t]
        cx = px2[t]
        cy = py2[t]
        area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if area2 == 0.0:
            continue
        tri_min_x = min(ax, min(bx, cx))
        tri_max_x = max(ax, max(bx, cx))
        tri_min_y = min(ay, min(by, cy))
        tri_max_y = max(ay, max(by, cy))
        i0 = int(math.ceil((tri_min_x - x_lo - jitter_x) / dx - 0.5))
        i1 = int(math.floor((tri_max_x - x_lo - jitter_x) / dx - 0.5))
        j0 = int(math.ceil((tri_min_y - y_lo - jitter_y) / dy - 0.5))
        j1 = int(math.floor((tri_max_y - y_lo - jitter_y) / dy - 0.5))
        if i0 < 0:
            i0 = 0
        if i1 > nx - 1:
            i1 = nx - 1
        if j0 < 0:
            j0 = 0
        if j1 > ny - 1:
            j1 = ny - 1
        slot = offsets[t]
        for i in range(i0, i1 + 1):
            sx = x_lo + (i + 0.5) * dx + jitter_x
            for j in range(j0, j1 + 1):
                sy = y_lo + (j + 0.5) * dy + jitter_y
                w0 = (cx - bx) * (sy - by) - (cy - by) * (sx - bx)
                w1 = (ax - cx) * (sy - cy) - (ay - cy) * (sx - cx)
                w2 = (bx - ax) * (sy - ay) - (by - ay) * (sx - ax)
                if area2 > 0.0:
                    inside = w0 >= 0.0 and w1 >= 0.0 and w2 >= 0.0
                else:
                    inside = w0 <= 0.0 and w1 <= 0.0 and w2 <= 0.0
                if inside:
                    out_col[slot] = i * ny + j
                    out_z[slot] = z_at_v0[t] + grad_x[t] * (sx - ax) + grad_y[t] * (sy - ay)
                    out_face[slot] = face_ids[t]
                    slot += 1


def column_support_cells(col_offsets, cross_z, cross_face, risky, dz, n_cells):
    """Count support cells from per-column surface crossings.

    Crossings are grouped by column (CSR layout via ``col_offsets``) and
    sorted by z within each column.  Consecutive crossing pairs bound solid
    intervals; a cell is occupied when its center lies strictly inside one.
    Empty cells between the bed (or the top of the solid run below) and an
    occupied run whose bottom surface is risky count as support.
    """
    total = 0
    n_cols = col_offsets.shape[0] - 1
    for c in range(n_cols):
        lo = col_offsets[c]
        hi = col_offsets[c + 1]
        prev_top = -1
        m = lo
        while m + 1 < hi:
            z_enter = cross_z[m]
            z_exit = cross_z[m + 1]
            enter_face = cross_face[m]
            m += 2
            # Occupied cells: centers (k + 0.5) * dz strictly inside the run.
            kb = int(math.floor(z_enter / dz - 0.5)) + 1
            kt = int(math.ceil(z_exit / dz - 0.5)) - 1
            if kb < 0:
                kb = 0
            if kt > n_cells - 1:
                kt = n_cells - 1
            if kt < kb:
                continue
            if kb > prev_top + 1 and risky[enter_face]:
                total += kb - prev_top - 1
            if kt > prev_top:
                prev_top = kt
    return total
