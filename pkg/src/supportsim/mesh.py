"""Triangle mesh container, STL/OBJ parsing, validation, volumes and the
print-frame transform.

Meshes are immutable: vertex/face/normal arrays are marked read-only so a
mesh can be shared freely between worker threads.  Stored STL normals are
discarded on parse; winding order is the source of truth and normals are
always recomputed from it.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GeometryError, ParseError

# Faces with area below this fraction of bbox_diagonal^2 are degenerate:
# flagged in validation, excluded from classification and volume sums.
DEGENERATE_AREA_FACTOR = 1e-12

RISKY_RGB = (220, 40, 40)
SAFE_RGB = (60, 90, 220)

_STL_RECORD = np.dtype(
    [("normal", "<f4", (3,)), ("verts", "<f4", (3, 3)), ("attr", "<u2")]
)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _cross_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # column arithmetic; np.cross carries too much axis bookkeeping for hot paths
    out = np.empty_like(a)
    out[:, 0] = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
    out[:, 1] = a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]
    out[:, 2] = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return out


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed triangle mesh with per-face unit normals.

    ``face_normals`` rows are zero for degenerate faces.
    ``ignored_statement_count`` reports how many unsupported statements an
    OBJ parse skipped (always 0 for STL).
    """

    vertices: np.ndarray  # (V, 3) float64
    faces: np.ndarray  # (F, 3) int64
    face_normals: np.ndarray  # (F, 3) float64
    source_name: str = ""
    ignored_statement_count: int = 0

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]


@dataclass(frozen=True)
class ValidationReport:
    is_watertight: bool
    is_manifold: bool
    degenerate_face_count: int
    duplicate_vertex_count: int
    boundary_edge_count: int


@dataclass(frozen=True)
class PrintSetup:
    """Build direction, self-support angle and bed clearance.

    ``direction`` is normalized on construction.  ``bed_offset`` is the
    height above the bed plane at which transform_to_print_frame places the
    mesh's lowest point; None keeps the mesh where the file put it and only
    lifts parts that dip below the bed.
    """

    direction: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    alpha_max_degrees: float = 45.0
    bed_offset: float | None = None

    def __post_init__(self):
        d = np.array(self.direction, dtype=np.float64).reshape(3)
        n = float(np.linalg.norm(d))
        if not math.isfinite(n) or n == 0.0:
            raise ValueError("print direction must be a nonzero finite vector")
        d /= n
        object.__setattr__(self, "direction", _readonly(d))
        a = float(self.alpha_max_degrees)
        if not (0.0 < a < 90.0):
            raise ValueError("alpha_max_degrees must lie strictly between 0 and 90")
        object.__setattr__(self, "alpha_max_degrees", a)
        if self.bed_offset is not None:
            b = float(self.bed_offset)
            if not math.isfinite(b) or b < 0.0:
                raise ValueError("bed_offset must be finite and >= 0")
            object.__setattr__(self, "bed_offset", b)


def make_mesh(
    vertices, faces, source_name: str = "", ignored_statement_count: int = 0
) -> TriangleMesh:
    """Build a TriangleMesh from arrays, recomputing unit face normals.

    Raises ValueError when a face references a vertex that does not exist.
    """
    v = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if f.size and (f.min() < 0 or f.max() >= v.shape[0]):
        raise ValueError(
            f"face index out of range: mesh has {v.shape[0]} vertices"
        )
    tri = v[f]
    cross = _cross_rows(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    norm = np.sqrt(np.einsum("ij,ij->i", cross, cross))
    normals = np.zeros_like(cross)
    ok = norm > 0.0
    normals[ok] = cross[ok] / norm[ok, None]
    return TriangleMesh(
        vertices=_readonly(v),
        faces=_readonly(f),
        face_normals=_readonly(normals),
        source_name=source_name,
        ignored_statement_count=ignored_statement_count,
    )


# ---------------------------------------------------------------------------
# derived quantities


def bbox(mesh: TriangleMesh) -> tuple[np.ndarray, np.ndarray]:
    if mesh.n_vertices == 0:
        z = np.zeros(3)
        return z, z
    return mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)


def bbox_diagonal(mesh: TriangleMesh) -> float:
    lo, hi = bbox(mesh)
    return float(np.linalg.norm(hi - lo))


def face_areas(mesh: TriangleMesh) -> np.ndarray:
    # vertices/faces are immutable, so the result is memoized on the mesh
    cached = getattr(mesh, "_face_areas", None)
    if cached is None:
        tri = mesh.vertices[mesh.faces]
        cross = _cross_rows(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        cached = _readonly(0.5 * np.sqrt(np.einsum("ij,ij->i", cross, cross)))
        object.__setattr__(mesh, "_face_areas", cached)
    return cached


def degenerate_face_mask(mesh: TriangleMesh) -> np.ndarray:
    cached = getattr(mesh, "_degenerate_mask", None)
    if cached is None:
        diag = bbox_diagonal(mesh)
        cached = _readonly(
            face_areas(mesh) < DEGENERATE_AREA_FACTOR * diag * diag
        )
        object.__setattr__(mesh, "_degenerate_mask", cached)
    return cached


def signed_volume(mesh: TriangleMesh) -> float:
    """Signed volume as the divergence-theorem sum of det(v0, v1, v2) / 6
    over non-degenerate faces.  Positive for outward-wound closed meshes."""
    keep = ~degenerate_face_mask(mesh)
    tri = mesh.vertices[mesh.faces[keep]]
    if tri.shape[0] == 0:
        return 0.0
    contrib = np.einsum(
        "ij,ij->i", tri[:, 0], _cross_rows(tri[:, 1], tri[:, 2])
    )
    return float(contrib.sum()) / 6.0


# ---------------------------------------------------------------------------
# validation


def validate(mesh: TriangleMesh) -> ValidationReport:
    degenerate = degenerate_face_mask(mesh)
    faces = mesh.faces[~degenerate]

    if mesh.n_vertices:
        n_unique = np.unique(mesh.vertices, axis=0).shape[0]
        duplicate_vertex_count = mesh.n_vertices - n_unique
    else:
        duplicate_vertex_count = 0

    if faces.shape[0] == 0:
        return ValidationReport(
            is_watertight=False,
            is_manifold=True,
            degenerate_face_count=int(degenerate.sum()),
            duplicate_vertex_count=duplicate_vertex_count,
            boundary_edge_count=0,
        )

    directed = np.concatenate(
        [faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]], axis=0
    )
    a = directed[:, 0]
    b = directed[:, 1]
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    key = lo * np.int64(mesh.n_vertices) + hi
    orientation = np.where(a < b, 1, -1).astype(np.int64)

    uniq, inverse, counts = np.unique(key, return_inverse=True, return_counts=True)
    balance = np.zeros(uniq.shape[0], np.int64)
    np.add.at(balance, inverse, orientation)

    boundary_edge_count = int((counts == 1).sum())
    watertight = bool((counts == 2).all())
    paired = counts == 2
    manifold = bool((counts <= 2).all()) and bool((balance[paired] == 0).all())

    return ValidationReport(
        is_watertight=watertight,
        is_manifold=manifold,
        degenerate_face_count=int(degenerate.sum()),
        duplicate_vertex_count=duplicate_vertex_count,
        boundary_edge_count=boundary_edge_count,
    )


# ---------------------------------------------------------------------------
# parsing

def _merge_exact_duplicates(tri_pts: np.ndarray):
    """Index a triangle soup, merging vertices equal in all three coordinates.

    Merging is by exact value; no epsilon welding.  First occurrence order
    is preserved so output is independent of any sort internals.
    """
    flat = tri_pts.reshape(-1, 3)
    if flat.shape[0] == 0:
        return flat.copy(), np.zeros((0, 3), np.int64)
    uniq, first, inverse = np.unique(
        flat, axis=0, return_index=True, return_inverse=True
    )
    inverse = inverse.reshape(-1)
    order = np.argsort(first, kind="stable")
    rank = np.empty(order.shape[0], np.int64)
    rank[order] = np.arange(order.shape[0], dtype=np.int64)
    vertices = uniq[order]
    faces = rank[inverse].reshape(-1, 3)
    return vertices, faces


def _source_bytes(source, suffix_hint: str):
    if isinstance(source, (bytes, bytearray)):
        return bytes(source), f"<{suffix_hint}>"
    path = Path(source)
    return path.read_bytes(), path.name


def parse_stl(source) -> TriangleMesh:
    """Parse binary or ASCII STL from a path or raw bytes.

    Binary is detected by size consistency with the declared triangle count;
    otherwise a leading ``solid`` keyword selects the ASCII grammar.  Stored
    facet normals are discarded.  Exact-duplicate vertices are merged.
    """
    data, name = _source_bytes(source, "stl")

    if len(data) >= 84:
        declared = struct.unpack_from("<I", data, 80)[0]
        if len(data) == 84 + 50 * declared:
            return _parse_stl_binary(data, declared, name)

    head = data[:512].lstrip()
    if head.lower().startswith(b"solid"):
        return _parse_stl_ascii(data, name)

    if len(data) < 84:
        raise ParseError(f"{name}: too short for binary STL ({len(data)} bytes)")
    declared = struct.unpack_from("<I", data, 80)[0]
    raise ParseError(
        f"{name}: triangle count mismatch: header declares {declared} triangles "
        f"({84 + 50 * declared} bytes) but file has {len(data)} bytes"
    )


def _parse_stl_binary(data: bytes, count: int, name: str) -> TriangleMesh:
    records = np.frombuffer(data, dtype=_STL_RECORD, count=count, offset=84)
    tri = records["verts"].astype(np.float64)
    bad = ~np.isfinite(tri).all(axis=(1, 2))
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise ParseError(
            f"{name}: non-finite vertex coordinate in facet {idx} "
            f"(byte offset {84 + 50 * idx})"
        )
    vertices, faces = _merge_exact_duplicates(tri)
    return make_mesh(vertices, faces, source_name=name)


def _parse_stl_ascii(data: bytes, name: str) -> TriangleMesh:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{name}: not valid UTF-8 ASCII STL: {exc}") from None

    tris: list[list[float]] = []
    current: list[float] = []
    state = "start"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split()
        if not tokens:
            continue
        word = tokens[0].lower()
        if state == "start":
            if word != "solid":
                raise ParseError(f"{name}: line {lineno}: expected 'solid'")
            state = "body"
        elif state == "body":
            if word == "facet":
                if len(tokens) < 2 or tokens[1].lower() != "normal":
                    raise ParseError(
                        f"{name}: line {lineno}: expected 'facet normal nx ny nz'"
                    )
                current = []
                state = "facet"
            elif word == "endsolid":
                state = "done"
            else:
                raise ParseError(
                    f"{name}: line {lineno}: expected 'facet' or 'endsolid', "
                    f"got {tokens[0]!r}"
                )
        elif state == "facet":
            if word != "outer" or len(tokens) < 2 or tokens[1].lower() != "loop":
                raise ParseError(f"{name}: line {lineno}: expected 'outer loop'")
            state = "loop"
        elif state == "loop":
            if word == "vertex":
                if len(current) >= 9:
                    raise ParseError(
                        f"{name}: line {lineno}: more than 3 vertices in facet"
                    )
                if len(tokens) != 4:
                    raise ParseError(
                        f"{name}: line {lineno}: expected 'vertex x y z'"
                    )
                try:
                    xyz = [float(t) for t in tokens[1:]]
                except ValueError:
                    raise ParseError(
                        f"{name}: line {lineno}: invalid vertex coordinate"
                    ) from None
                if not all(math.isfinite(c) for c in xyz):
                    raise ParseError(
                        f"{name}: line {lineno}: non-finite vertex coordinate"
                    )
                current.extend(xyz)
            elif word == "endloop":
                if len(current) != 9:
                    raise ParseError(
                        f"{name}: line {lineno}: facet has {len(current) // 3} "
                        "vertices, expected 3"
                    )
                state = "endloop"
            else:
                raise ParseError(
                    f"{name}: line {lineno}: expected 'vertex' or 'endloop'"
                )
        elif state == "endloop":
            if word != "endfacet":
                raise ParseError(f"{name}: line {lineno}: expected 'endfacet'")
            tris.append(current)
            state = "body"
        elif state == "done":
            raise ParseError(
                f"{name}: line {lineno}: content after 'endsolid'"
            )
    if state != "done":
        raise ParseError(f"{name}: unexpected end of file (missing 'endsolid')")

    tri = np.array(tris, dtype=np.float64).reshape(-1, 3, 3)
    vertices, faces = _merge_exact_duplicates(tri)
    return make_mesh(vertices, faces, source_name=name)


def parse_obj(source) -> TriangleMesh:
    """Parse the v/f subset of Wavefront OBJ from a path or raw bytes.

    Indices are 1-based; ``i/j/k`` forms are accepted and only the vertex
    index is used.  Faces with more than three corners are fan-triangulated.
    Other statements are ignored and counted.
    """
    data, name = _source_bytes(source, "obj")
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{name}: not valid UTF-8 OBJ: {exc}") from None

    verts: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    ignored = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        kind = tokens[0]
        if kind == "v":
            if len(tokens) < 4:
                raise ParseError(
                    f"{name}: line {lineno}: vertex needs 3 coordinates"
                )
            try:
                xyz = [float(t) for t in tokens[1:4]]
            except ValueError:
                raise ParseError(
                    f"{name}: line {lineno}: invalid vertex coordinate"
                ) from None
            if not all(math.isfinite(c) for c in xyz):
                raise ParseError(
                    f"{name}: line {lineno}: non-finite vertex coordinate"
                )
            verts.append(xyz)
        elif kind == "f":
            if len(tokens) < 4:
                raise ParseError(
                    f"{name}: line {lineno}: face needs at least 3 indices"
                )
            idx = []
            for tok in tokens[1:]:
                head = tok.split("/")[0]
                try:
                    i = int(head)
                except ValueError:
                    raise ParseError(
                        f"{name}: line {lineno}: invalid face index {tok!r}"
                    ) from None
                if i < 1 or i > len(verts):
                    raise ParseError(
                        f"{name}: line {lineno}: face index out of range "
                        f"({i} with {len(verts)} vertices)"
                    )
                idx.append(i - 1)
            for k in range(1, len(idx) - 1):
                faces.append((idx[0], idx[k], idx[k + 1]))
        else:
            ignored += 1

    return make_mesh(
        np.array(verts, dtype=np.float64).reshape(-1, 3),
        np.array(faces, dtype=np.int64).reshape(-1, 3),
        source_name=name,
        ignored_statement_count=ignored,
    )


def load_mesh(path) -> TriangleMesh:
    """Parse a mesh file, picking the format from the extension (falling
    back to content sniffing for unknown extensions)."""
    p = Path(path)
    suffix = p.suffix.lower()
    if suffix == ".obj":
        return parse_obj(p)
    if suffix == ".stl":
        return parse_stl(p)
    data = p.read_bytes()
    head = data[:256].lstrip()
    if head.startswith(b"v ") or head.startswith(b"#"):
        return parse_obj(data)
    return parse_stl(data)


# ---------------------------------------------------------------------------
# writers


def write_stl(mesh: TriangleMesh, path=None) -> bytes:
    """Serialize to binary STL (little-endian, float32). Returns the bytes;
    also writes them to ``path`` when given."""
    tri = mesh.vertices[mesh.faces].astype("<f4")
    records = np.zeros(mesh.n_faces, dtype=_STL_RECORD)
    records["verts"] = tri
    records["normal"] = mesh.face_normals.astype("<f4")
    header = b"supportsim binary STL".ljust(80, b" ")
    blob = header + struct.pack("<I", mesh.n_faces) + records.tobytes()
    if path is not None:
        Path(path).write_bytes(blob)
    return blob


def write_ply_colored(mesh: TriangleMesh, risky_flags, path=None) -> bytes:
    """Serialize to binary little-endian PLY with one RGB color per face:
    risky faces red, all others blue."""
    risky = np.asarray(risky_flags, dtype=bool).reshape(-1)
    if risky.shape[0] != mesh.n_faces:
        raise ValueError(
            f"risky_flags has {risky.shape[0]} entries for {mesh.n_faces} faces"
        )
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"element vertex {mesh.n_vertices}\n"
        "property float x\n"
        "property float y\n"
        "property float z\n"
        f"element face {mesh.n_faces}\n"
        "property list uchar int vertex_indices\n"
        "property uchar red\n"
        "property uchar green\n"
        "property uchar blue\n"
        "end_header\n"
    ).encode("ascii")

    vert_block = mesh.vertices.astype("<f4").tobytes()
    face_dtype = np.dtype(
        [("count", "u1"), ("idx", "<i4", (3,)), ("rgb", "u1", (3,))]
    )
    faces = np.zeros(mesh.n_faces, dtype=face_dtype)
    faces["count"] = 3
    faces["idx"] = mesh.faces.astype("<i4")
    faces["rgb"] = np.where(risky[:, None], RISKY_RGB, SAFE_RGB)
    blob = header + vert_block + faces.tobytes()
    if path is not None:
        Path(path).write_bytes(blob)
    return blob


# ---------------------------------------------------------------------------
# print frame


def rotation_to_print_frame(direction: np.ndarray) -> np.ndarray:
    """Minimal rotation matrix taking ``direction`` to +Z.

    For direction == -Z (antipodal, rotation ambiguous) the 180-degree
    rotation about the x axis is used.
    """
    d = np.asarray(direction, dtype=np.float64).reshape(3)
    z = np.array([0.0, 0.0, 1.0])
    axis = np.cross(d, z)
    s2 = float(axis @ axis)
    c = float(d @ z)
    if s2 < 1e-24:
        if c > 0.0:
            return np.eye(3)
        return np.diag([1.0, -1.0, -1.0])
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + k + (k @ k) * ((1.0 - c) / s2)


def transform_to_print_frame(mesh: TriangleMesh, setup: PrintSetup) -> TriangleMesh:
    """Rotate so the build direction becomes +Z, then place along z.

    With an explicit ``setup.bed_offset`` the lowest point is moved to that
    height; otherwise the placement from the file is kept, shifted up only
    when it would dip below the bed plane z=0.
    """
    if mesh.n_vertices == 0:
        raise GeometryError("cannot orient an empty mesh")
    r = rotation_to_print_frame(setup.direction)
    verts = mesh.vertices @ r.T
    zmin = verts[:, 2].min()
    if setup.bed_offset is not None:
        verts[:, 2] += setup.bed_offset - zmin
    elif zmin < 0.0:
        verts[:, 2] -= zmin
    return make_mesh(
        verts,
        mesh.faces,
        source_name=mesh.source_name,
        ignored_statement_count=mesh.ignored_statement_count,
    )
