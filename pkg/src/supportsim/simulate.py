"""Support-structure simulation.

Faces are classified against the build direction: a face is safe when
``n . d + sin(alpha_max) >= 0`` (boundary inclusive), risky otherwise.
Each risky face sheds one support column: every corner casts a downward ray
from just below itself; the column runs from the face down to the first
surface hit (or the bed plane z=0), and its volume is the generalized prism
between the face triangle and the three dropped points, decomposed into
three tetrahedra.

The normalized support volume (NSV) is support volume over mesh volume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError
from .mesh import (
    PrintSetup,
    TriangleMesh,
    bbox,
    bbox_diagonal,
    degenerate_face_mask,
    face_areas,
    signed_volume,
    validate,
)
from .raycast import DEFAULT_LEAF_SIZE, BvhIndex, build_bvh, cast_rays

# Below this face count a single-leaf BVH is cheaper than tree construction.
_SMALL_MESH_FACES = 64

# Ray origins are nudged this fraction of the bbox diagonal below each
# vertex, which keeps the emitting face (and faces meeting it at the vertex)
# behind the ray origin.
RAY_EPS_FACTOR = 1e-6

# Origins are also pulled this fraction of the way toward the face centroid.
# A corner ray that would otherwise run exactly inside an adjacent vertical
# wall plane becomes a clean miss instead of a numerically unstable graze;
# the bias this adds to measured drop heights is O(1e-9) of the face size.
CORNER_INSET_FACTOR = 1e-9

BED_TERMINATION = -1  # termination face id for columns that reach the bed


@dataclass(frozen=True)
class FaceClassification:
    risky: np.ndarray  # (F,) bool
    degenerate: np.ndarray  # (F,) bool
    risky_count: int
    risky_area: float

    @property
    def safe(self) -> np.ndarray:
        return ~(self.risky | self.degenerate)


@dataclass(frozen=True)
class SupportColumn:
    """One risky face's support prism: triangle top, dropped bottom points,
    and the per-vertex termination (face id, or BED_TERMINATION)."""

    face_id: int
    top: np.ndarray  # (3, 3)
    bottom: np.ndarray  # (3, 3)
    terminations: tuple[int, int, int]
    volume: float


@dataclass(frozen=True)
class SupportReport:
    mesh_volume: float
    support_volume: float
    nsv: float
    risky_count: int
    risky_area: float
    column_count: int
    watertight: bool
    setup: PrintSetup


def classify_faces(mesh: TriangleMesh, setup: PrintSetup) -> FaceClassification:
    """Split faces into safe / risky / degenerate for a build direction.

    Degenerate faces are excluded from classification entirely.
    """
    sin_alpha = math.sin(math.radians(setup.alpha_max_degrees))
    metric = mesh.face_normals @ setup.direction + sin_alpha
    degenerate = degenerate_face_mask(mesh)
    risky = (metric < 0.0) & ~degenerate
    areas = face_areas(mesh)
    return FaceClassification(
        risky=risky,
        degenerate=degenerate,
        risky_count=int(risky.sum()),
        risky_area=float(areas[risky].sum()),
    )


def tetra_volume(p0, p1, p2, p3) -> float:
    """Unsigned tetrahedron volume: |det| / 6 of the homogeneous 4x4 matrix
    of the four corners."""
    m = np.ones((4, 4), dtype=np.float64)
    m[0, :3] = p0
    m[1, :3] = p1
    m[2, :3] = p2
    m[3, :3] = p3
    return abs(float(np.linalg.det(m))) / 6.0


def prism_volume(top, bottom) -> float:
    """Volume of the generalized prism between triangle ``top`` (t0,t1,t2)
    and ``bottom`` (b0,b1,b2), split into the three tetrahedra
    (t0,t1,t2,b0), (t1,t2,b0,b1), (t2,b0,b1,b2)."""
    top = np.asarray(top, dtype=np.float64).reshape(3, 3)
    bottom = np.asarray(bottom, dtype=np.float64).reshape(3, 3)
    t0, t1, t2 = top
    b0, b1, b2 = bottom
    return (
        tetra_volume(t0, t1, t2, b0)
        + tetra_volume(t1, t2, b0, b1)
        + tetra_volume(t2, b0, b1, b2)
    )


def _prism_volumes_batch(tops: np.ndarray, bottoms: np.ndarray) -> np.ndarray:
    """Vectorized prism volumes for (N,3,3) top/bottom stacks, same
    decomposition as prism_volume."""

    def tet6(a, b, c):
        cx = b[:, 1] * c[:, 2] - b[:, 2] * c[:, 1]
        cy = b[:, 2] * c[:, 0] - b[:, 0] * c[:, 2]
        cz = b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0]
        return a[:, 0] * cx + a[:, 1] * cy + a[:, 2] * cz

    t0, t1, t2 = tops[:, 0], tops[:, 1], tops[:, 2]
    b0, b1, b2 = bottoms[:, 0], bottoms[:, 1], bottoms[:, 2]
    v1 = np.abs(tet6(t1 - t0, t2 - t0, b0 - t0))
    v2 = np.abs(tet6(t2 - t1, b0 - t1, b1 - t1))
    v3 = np.abs(tet6(b0 - t2, b1 - t2, b2 - t2))
    return (v1 + v2 + v3) / 6.0


def _require_print_frame(mesh: TriangleMesh, setup: PrintSetup) -> None:
    d = setup.direction
    if abs(d[0]) > 1e-9 or abs(d[1]) > 1e-9 or d[2] < 0.0:
        raise GeometryError(
            "simulate expects the mesh in the print frame (build direction +Z); "
            "apply transform_to_print_frame first"
        )
    lo, _ = bbox(mesh)
    if lo[2] < -1e-9 * max(bbox_diagonal(mesh), 1.0):
        raise GeometryError("mesh extends below the bed plane z=0")


def _auto_bvh(mesh: TriangleMesh) -> BvhIndex:
    if mesh.n_faces <= _SMALL_MESH_FACES:
        return build_bvh(mesh, leaf_size=_SMALL_MESH_FACES)
    return build_bvh(mesh, leaf_size=DEFAULT_LEAF_SIZE)


def _drop_corners(mesh: TriangleMesh, risky_idx: np.ndarray, bvh: BvhIndex):
    """Cast one downward ray per corner of each risky face.

    Rays start RAY_EPS_FACTOR * bbox_diagonal below the corner, so the faces
    meeting there lie behind the origin and cannot self-terminate the
    column, and are inset CORNER_INSET_FACTOR toward the face centroid so
    they cannot graze along an adjacent wall plane.  Returns (bottom_z,
    termination) arrays of shape (len(risky_idx), 3).
    """
    tops = mesh.vertices[mesh.faces[risky_idx]]  # (R, 3, 3)
    eps = RAY_EPS_FACTOR * bbox_diagonal(mesh)
    centroids = tops.mean(axis=1, keepdims=True)
    origins = tops + CORNER_INSET_FACTOR * (centroids - tops)
    origins = origins.reshape(-1, 3)
    origins[:, 2] -= eps
    directions = np.broadcast_to(
        np.array([0.0, 0.0, -1.0]), origins.shape
    ).copy()
    face_ids, ts = cast_rays(mesh, bvh, origins, directions, t_min=0.0)

    bottom_z = np.where(face_ids >= 0, origins[:, 2] - ts, 0.0)
    termination = np.where(face_ids >= 0, face_ids, BED_TERMINATION)
    return bottom_z.reshape(-1, 3), termination.reshape(-1, 3)


def _column_geometry(mesh: TriangleMesh, risky_idx: np.ndarray, bottom_z: np.ndarray):
    tops = mesh.vertices[mesh.faces[risky_idx]]
    bottoms = tops.copy()
    bottoms[:, :, 2] = bottom_z
    return tops, bottoms


def simulate(
    mesh: TriangleMesh, setup: PrintSetup, *, bvh: BvhIndex | None = None
) -> SupportReport:
    """Run the support simulation and report volumes and NSV.

    The mesh must already be in the print frame.  Support volumes are
    accumulated over risky faces in ascending face order, so the result is
    independent of any execution schedule.
    """
    _require_print_frame(mesh, setup)
    mesh_volume = abs(signed_volume(mesh))
    if mesh_volume == 0.0:
        raise GeometryError("NSV undefined for zero-volume mesh")

    classification = classify_faces(mesh, setup)
    watertight = validate(mesh).is_watertight
    risky_idx = np.flatnonzero(classification.risky)

    if risky_idx.size == 0:
        return SupportReport(
            mesh_volume=mesh_volume,
            support_volume=0.0,
            nsv=0.0,
            risky_count=0,
            risky_area=classification.risky_area,
            column_count=0,
            watertight=watertight,
            setup=setup,
        )

    if bvh is None:
        bvh = _auto_bvh(mesh)
    bottom_z, _ = _drop_corners(mesh, risky_idx, bvh)
    tops, bottoms = _column_geometry(mesh, risky_idx, bottom_z)
    volumes = _prism_volumes_batch(tops, bottoms)

    support_volume = float(volumes.sum())
    return SupportReport(
        mesh_volume=mesh_volume,
        support_volume=support_volume,
        nsv=support_volume / mesh_volume,
        risky_count=classification.risky_count,
        risky_area=classification.risky_area,
        column_count=int((volumes > 0.0).sum()),
        watertight=watertight,
        setup=setup,
    )


def support_columns(
    mesh: TriangleMesh, setup: PrintSetup, *, bvh: BvhIndex | None = None
) -> list[SupportColumn]:
    """Per-risky-face support columns, for inspection and testing."""
    _require_print_frame(mesh, setup)
    classification = classify_faces(mesh, setup)
    risky_idx = np.flatnonzero(classification.risky)
    if risky_idx.size == 0:
        return []
    if bvh is None:
        bvh = _auto_bvh(mesh)
    bottom_z, termination = _drop_corners(mesh, risky_idx, bvh)
    tops, bottoms = _column_geometry(mesh, risky_idx, bottom_z)
    volumes = _prism_volumes_batch(tops, bottoms)
    columns = []
    for k, face_id in enumerate(risky_idx):
        terms = tuple(int(t) for t in termination[k])
        columns.append(
            SupportColumn(
                face_id=int(face_id),
                top=tops[k].copy(),
                bottom=bottoms[k].copy(),
                terminations=terms,
                volume=float(volumes[k]),
            )
        )
    return columns
