"""Voxel occupancy oracle for support volume.

Independent check of the prism-based simulation: rasterize occupancy on a
resolution^3 grid over the grounded bounding box (xy from the mesh bounds,
z from the bed plane up to the mesh top) by z-column parity, then count
empty cells hanging below occupied cells whose bottom surface is risky,
walking down to the first occupied cell or the bed.

Requires a watertight mesh; parity is undefined otherwise.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import GeometryError
from .mesh import PrintSetup, TriangleMesh, bbox, validate
from .simulate import _require_print_frame, classify_faces

MIN_RESOLUTION = 16
MAX_RESOLUTION = 1024

# Column sample points are offset from cell centers by these fractions of a
# cell so that sample rays cannot run exactly along shared triangle edges of
# axis-aligned geometry (which would break crossing parity).
_JITTER_X = 6.180339887e-8
_JITTER_Y = 3.141592653e-8


def voxel_support_oracle(
    mesh: TriangleMesh, setup: PrintSetup, resolution: int
) -> float:
    """Support volume estimated on a voxel grid. Returns (cell volume) x
    (number of support cells)."""
    if not (MIN_RESOLUTION <= resolution <= MAX_RESOLUTION):
        raise ValueError(
            f"resolution must lie in [{MIN_RESOLUTION}, {MAX_RESOLUTION}], "
            f"got {resolution}"
        )
    _require_print_frame(mesh, setup)
    if not validate(mesh).is_watertight:
        raise GeometryError(
            "voxel support oracle requires a watertight mesh "
            "(column parity is undefined otherwise)"
        )

    lo, hi = bbox(mesh)
    extent_x = hi[0] - lo[0]
    extent_y = hi[1] - lo[1]
    top_z = hi[2]
    if extent_x <= 0.0 or extent_y <= 0.0 or top_z <= 0.0:
        raise GeometryError("mesh bounding box has no volume")

    n = int(resolution)
    dx = extent_x / n
    dy = extent_y / n
    dz = top_z / n

    classification = classify_faces(mesh, setup)

    # Non-degenerate faces only; strictly vertical faces drop out in the
    # kernels via their zero-area xy projection.
    keep = np.flatnonzero(~classification.degenerate)
    tri = mesh.vertices[mesh.faces[keep]]
    normals = mesh.face_normals[keep]

    px0 = np.ascontiguousarray(tri[:, 0, 0])
    py0 = np.ascontiguousarray(tri[:, 0, 1])
    px1 = np.ascontiguousarray(tri[:, 1, 0])
    py1 = np.ascontiguousarray(tri[:, 1, 1])
    px2 = np.ascontiguousarray(tri[:, 2, 0])
    py2 = np.ascontiguousarray(tri[:, 2, 1])

    # Plane z(x, y) = z0 + gx*(x-x0) + gy*(y-y0) per face; faces with
    # n_z == 0 never pass the projection test, any finite gradient works.
    nz = normals[:, 2].copy()
    safe_nz = np.where(nz == 0.0, 1.0, nz)
    grad_x = -normals[:, 0] / safe_nz
    grad_y = -normals[:, 1] / safe_nz
    z_at_v0 = np.ascontiguousarray(tri[:, 0, 2])

    jx = _JITTER_X * dx
    jy = _JITTER_Y * dy

    counts = kernels.count_column_crossings(
        px0, py0, px1, py1, px2, py2, lo[0], lo[1], dx, dy, n, n, jx, jy
    )
    total = int(counts.sum())
    offsets = np.zeros(counts.shape[0], np.int64)
    np.cumsum(counts[:-1], out=offsets[1:])

    out_col = np.empty(total, np.int64)
    out_z = np.empty(total, np.float64)
    out_face = np.empty(total, np.int64)
    kernels.fill_column_crossings(
        px0,
        py0,
        px1,
        py1,
        px2,
        py2,
        z_at_v0,
        np.ascontiguousarray(grad_x),
        np.ascontiguousarray(grad_y),
        lo[0],
        lo[1],
        dx,
        dy,
        n,
        n,
        jx,
        jy,
        offsets,
        out_col,
        out_z,
        out_face,
        keep,
    )

    # Group crossings by column, sort by z (face id last for determinism
    # when coincident surfaces produce equal z).
    perm = np.lexsort((out_face, out_z, out_col))
    cols_sorted = out_col[perm]
    z_sorted = np.ascontiguousarray(out_z[perm])
    face_sorted = np.ascontiguousarray(out_face[perm])
    col_offsets = np.searchsorted(
        cols_sorted, np.arange(n * n + 1, dtype=np.int64), side="left"
    ).astype(np.int64)

    risky = np.ascontiguousarray(classification.risky)
    cells = kernels.column_support_cells(
        col_offsets, z_sorted, face_sorted, risky, dz, n
    )
    return float(cells) * dx * dy * dz
