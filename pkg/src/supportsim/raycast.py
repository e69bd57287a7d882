"""BVH construction and first-hit ray casting, plus a brute-force oracle.

The BVH is built by median split on the longest axis of the face-centroid
extents.  Construction is deterministic: stable sorts, fixed split at the
range midpoint.  Traversal lives in ``_kernel_impl.ray_cast_batch`` so it can
run compiled (numba) or interpreted (numpy) with identical results.

``brute_force_first_hit`` answers the same query by a vectorized linear scan
over all faces, with the same edge-inclusive triangle test and the same
smaller-face-id tie rule, and never touches the BVH.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import GeometryError
from .mesh import TriangleMesh

DEFAULT_LEAF_SIZE = 4
MAX_DEPTH = 60  # traversal stack holds 64 entries; median split stays well under


@dataclass(frozen=True)
class Aabb:
    lo: np.ndarray
    hi: np.ndarray

    def contains(self, other: "Aabb", slack: float = 0.0) -> bool:
        return bool(
            (self.lo - slack <= other.lo).all() and (other.hi <= self.hi + slack).all()
        )


@dataclass(frozen=True)
class RayHit:
    face_id: int
    t: float
    point: np.ndarray


@dataclass(frozen=True)
class BvhIndex:
    """Flat BVH arrays.

    Internal nodes store the index of their left child in ``node_left``
    (the right child is always ``left + 1``) and have ``node_count == 0``.
    Leaves store a range [start, start+count) into ``face_order``, which is
    a permutation of all face ids.
    """

    node_min: np.ndarray  # (N, 3) float64
    node_max: np.ndarray  # (N, 3) float64
    node_left: np.ndarray  # (N,) int64, -1 for leaves
    node_start: np.ndarray  # (N,) int64
    node_count: np.ndarray  # (N,) int64, 0 for internal nodes
    face_order: np.ndarray  # (F,) int64 permutation
    leaf_size: int
    depth: int

    @property
    def n_nodes(self) -> int:
        return self.node_min.shape[0]

    def node_aabb(self, i: int) -> Aabb:
        return Aabb(self.node_min[i].copy(), self.node_max[i].copy())


def _face_corners(mesh: TriangleMesh):
    tri = mesh.vertices[mesh.faces]
    v0 = np.ascontiguousarray(tri[:, 0])
    v1 = np.ascontiguousarray(tri[:, 1])
    v2 = np.ascontiguousarray(tri[:, 2])
    return v0, v1, v2


def build_bvh(mesh: TriangleMesh, leaf_size: int = DEFAULT_LEAF_SIZE) -> BvhIndex:
    n_faces = mesh.n_faces
    if n_faces == 0:
        raise GeometryError("cannot build a BVH over a mesh with no faces")
    if leaf_size < 1:
        raise ValueError("leaf_size must be >= 1")

    tri = mesh.vertices[mesh.faces]
    fmin = tri.min(axis=1)
    fmax = tri.max(axis=1)
    centroid = tri.mean(axis=1)

    order = np.arange(n_faces, dtype=np.int64)
    node_min: list[np.ndarray] = []
    node_max: list[np.ndarray] = []
    node_left: list[int] = []
    node_start: list[int] = []
    node_count: list[int] = []

    max_depth = 0

    def new_node(lo: int, hi: int) -> int:
        # bounds over a face set are permutation-invariant, so later re-sorts
        # of order[lo:hi] by subdivide() cannot invalidate them
        idx = len(node_min)
        seg = order[lo:hi]
        node_min.append(fmin[seg].min(axis=0))
        node_max.append(fmax[seg].max(axis=0))
        node_left.append(-1)
        node_start.append(lo)
        node_count.append(hi - lo)
        return idx

    def subdivide(idx: int, lo: int, hi: int, depth: int) -> None:
        nonlocal max_depth
        max_depth = max(max_depth, depth)
        if hi - lo <= leaf_size:
            return
        if depth >= MAX_DEPTH:
            raise GeometryError("BVH exceeded maximum depth")
        seg = order[lo:hi]
        cent = centroid[seg]
        extent = cent.max(axis=0) - cent.min(axis=0)
        axis = int(np.argmax(extent))
        perm = np.argsort(cent[:, axis], kind="stable")
        order[lo:hi] = seg[perm]
        mid = (lo + hi) // 2
        # create both children back to back so the right child really is
        # left + 1, the layout the traversal kernel assumes
        left = new_node(lo, mid)
        new_node(mid, hi)
        node_left[idx] = left
        node_start[idx] = 0
        node_count[idx] = 0
        subdivide(left, lo, mid, depth + 1)
        subdivide(left + 1, mid, hi, depth + 1)

    root = new_node(0, n_faces)
    subdivide(root, 0, n_faces, 1)

    return BvhIndex(
        node_min=np.asarray(node_min, dtype=np.float64),
        node_max=np.asarray(node_max, dtype=np.float64),
        node_left=np.asarray(node_left, dtype=np.int64),
        node_start=np.asarray(node_start, dtype=np.int64),
        node_count=np.asarray(node_count, dtype=np.int64),
        face_order=order,
        leaf_size=leaf_size,
        depth=max_depth,
    )


def cast_rays(
    mesh: TriangleMesh,
    bvh: BvhIndex,
    origins: np.ndarray,
    directions: np.ndarray,
    t_min: float = 0.0,
    ignore_faces=None,
):
    """Batch first-hit query. Returns (face_ids, ts); face_id -1 means miss
    (its t is +inf).  ``ignore_faces`` may be a scalar or per-ray array;
    -1 ignores nothing."""
    origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    directions = np.ascontiguousarray(directions, dtype=np.float64).reshape(-1, 3)
    n = origins.shape[0]
    if directions.shape[0] != n:
        raise ValueError("origins and directions must have matching lengths")
    if ignore_faces is None:
        ignore = np.full(n, -1, np.int64)
    else:
        ignore = np.broadcast_to(
            np.asarray(ignore_faces, dtype=np.int64), (n,)
        ).copy()
    v0, v1, v2 = _face_corners(mesh)
    return kernels.ray_cast_batch(
        bvh.node_min,
        bvh.node_max,
        bvh.node_left,
        bvh.node_start,
        bvh.node_count,
        bvh.face_order,
        v0,
        v1,
        v2,
        origins,
        directions,
        ignore,
        float(t_min),
    )


def ray_first_hit(
    mesh: TriangleMesh,
    bvh: BvhIndex,
    origin,
    direction,
    t_min: float = 0.0,
    ignore_face: int = -1,
) -> RayHit | None:
    """First intersection of one ray with the mesh, or None.

    ``direction`` must be unit length for ``t`` to be a distance.  Hits at
    t < t_min are skipped, as is ``ignore_face``.  Ties on t go to the
    smaller face id.
    """
    origin = np.asarray(origin, dtype=np.float64).reshape(1, 3)
    direction = np.asarray(direction, dtype=np.float64).reshape(1, 3)
    face_ids, ts = cast_rays(mesh, bvh, origin, direction, t_min, ignore_face)
    if face_ids[0] < 0:
        return None
    t = float(ts[0])
    return RayHit(
        face_id=int(face_ids[0]), t=t, point=(origin[0] + t * direction[0])
    )


# ---------------------------------------------------------------------------
# brute-force oracle


def _brute_candidates(mesh, origin, direction, t_min, ignore_face):
    """All (face, t) hits of one ray by linear scan.

    Component arithmetic mirrors the kernel's triangle test exactly so the
    two routes produce bit-identical t values.
    """
    v0, v1, v2 = _face_corners(mesh)
    ox, oy, oz = (float(origin[0]), float(origin[1]), float(origin[2]))
    dx, dy, dz = (float(direction[0]), float(direction[1]), float(direction[2]))

    e1 = v1 - v0
    e2 = v2 - v0
    px = dy * e2[:, 2] - dz * e2[:, 1]
    py = dz * e2[:, 0] - dx * e2[:, 2]
    pz = dx * e2[:, 1] - dy * e2[:, 0]
    det = e1[:, 0] * px + e1[:, 1] * py + e1[:, 2] * pz
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_det = 1.0 / det
        tx = ox - v0[:, 0]
        ty = oy - v0[:, 1]
        tz = oz - v0[:, 2]
        u = (tx * px + ty * py + tz * pz) * inv_det
        qx = ty * e1[:, 2] - tz * e1[:, 1]
        qy = tz * e1[:, 0] - tx * e1[:, 2]
        qz = tx * e1[:, 1] - ty * e1[:, 0]
        v = (dx * qx + dy * qy + dz * qz) * inv_det
        t = (e2[:, 0] * qx + e2[:, 1] * qy + e2[:, 2] * qz) * inv_det

    ok = (
        (det != 0.0)
        & (u >= 0.0)
        & (u <= 1.0)
        & (v >= 0.0)
        & (u + v <= 1.0)
        & (t >= t_min)
        & (t < np.inf)
    )
    if ignore_face >= 0:
        ok = ok & (np.arange(mesh.n_faces) != ignore_face)
    return np.flatnonzero(ok), t[ok]


def brute_force_first_hit(
    mesh: TriangleMesh,
    origin,
    direction,
    t_min: float = 0.0,
    ignore_face: int = -1,
) -> RayHit | None:
    """Reference first-hit query: same contract as ray_first_hit, computed
    by scanning every face without any acceleration structure."""
    origin = np.asarray(origin, dtype=np.float64).reshape(3)
    direction = np.asarray(direction, dtype=np.float64).reshape(3)
    faces, ts = _brute_candidates(mesh, origin, direction, t_min, ignore_face)
    if faces.shape[0] == 0:
        return None
    pick = np.lexsort((faces, ts))[0]
    t = float(ts[pick])
    return RayHit(face_id=int(faces[pick]), t=t, point=origin + t * direction)
