"""Procedural watertight test geometry.

Boxes, extruded profiles (tables, bridges, stepped overhangs), icospheres
and a uniform triangle-grid refiner.  All builders produce outward-wound,
watertight meshes directly in the print frame (bed plane z=0, build
direction +Z), so floating parts are expressed by their z placement.

Shared subdivision points are computed once per undirected edge, from the
lower vertex id, so refined meshes stay exactly watertight (duplicate-free
by construction rather than by epsilon welding).
"""

from __future__ import annotations

import math

import numpy as np

from .mesh import TriangleMesh, make_mesh

_BOX_FACES = np.array(
    [
        [0, 2, 1],
        [0, 3, 2],  # bottom, -z
        [4, 5, 6],
        [4, 6, 7],  # top, +z
        [0, 1, 5],
        [0, 5, 4],  # -y
        [2, 3, 7],
        [2, 7, 6],  # +y
        [0, 4, 7],
        [0, 7, 3],  # -x
        [1, 2, 6],
        [1, 6, 5],  # +x
    ],
    dtype=np.int64,
)


def box_mesh(size=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0), name="box") -> TriangleMesh:
    sx, sy, sz = (float(s) for s in size)
    ox, oy, oz = (float(o) for o in origin)
    corners = np.array(
        [
            [0, 0, 0],
            [1, 0, 0],
            [1, 1, 0],
            [0, 1, 0],
            [0, 0, 1],
            [1, 0, 1],
            [1, 1, 1],
            [0, 1, 1],
        ],
        dtype=np.float64,
    )
    verts = corners * (sx, sy, sz) + (ox, oy, oz)
    return make_mesh(verts, _BOX_FACES, source_name=name)


def combine(meshes, name="combined") -> TriangleMesh:
    """Concatenate meshes into one (disjoint shells stay watertight)."""
    verts = []
    faces = []
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        offset += m.n_vertices
    return make_mesh(np.vstack(verts), np.vstack(faces), source_name=name)


def cone_mesh(radius, height, segments: int = 32, name="cone") -> TriangleMesh:
    """Tip-down cone: apex on the bed at the origin, flat cap on top.

    The lateral surface overhangs by atan(radius/height) from the build
    direction, so radius = tan(angle) * height dials in a target overhang.
    """
    r = float(radius)
    h = float(height)
    k = int(segments)
    if r <= 0.0 or h <= 0.0 or k < 3:
        raise ValueError("cone needs positive radius/height and >= 3 segments")
    theta = 2.0 * np.pi * np.arange(k) / k
    ring = np.column_stack([r * np.cos(theta), r * np.sin(theta), np.full(k, h)])
    verts = np.vstack([[[0.0, 0.0, 0.0]], ring, [[0.0, 0.0, h]]])
    apex, top = 0, k + 1
    faces = []
    for i in range(k):
        j = (i + 1) % k
        faces.append((apex, 1 + j, 1 + i))  # lateral, outward-down
        faces.append((top, 1 + i, 1 + j))  # cap, outward-up
    return make_mesh(verts, np.asarray(faces, dtype=np.int64), source_name=name)


# ---------------------------------------------------------------------------
# polygon triangulation and extrusion


def _shoelace2(points: np.ndarray) -> float:
    x = points[:, 0]
    y = points[:, 1]
    return float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def triangulate_polygon(points) -> list[tuple[int, int, int]]:
    """Ear-clip a simple polygon (no holes, no repeated vertices).

    Returns index triples wound in the polygon's own orientation.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = pts.shape[0]
    if n < 3:
        raise ValueError("polygon needs at least 3 vertices")
    orient = 1.0 if _shoelace2(pts) > 0.0 else -1.0

    def cross(o, a, b):
        return (pts[a, 0] - pts[o, 0]) * (pts[b, 1] - pts[o, 1]) - (
            pts[a, 1] - pts[o, 1]
        ) * (pts[b, 0] - pts[o, 0])

    def inside(tri, p):
        a, b, c = tri
        w0 = cross(a, b, p) * orient
        w1 = cross(b, c, p) * orient
        w2 = cross(c, a, p) * orient
        return w0 > 0.0 and w1 > 0.0 and w2 > 0.0

    remaining = list(range(n))
    tris: list[tuple[int, int, int]] = []
    while len(remaining) > 3:
        clipped = False
        for k in range(len(remaining)):
            prev = remaining[k - 1]
            cur = remaining[k]
            nxt = remaining[(k + 1) % len(remaining)]
            if cross(prev, cur, nxt) * orient <= 0.0:
                continue  # reflex or collinear corner
            ear = (prev, cur, nxt)
            if any(
                inside(ear, p) for p in remaining if p not in ear
            ):
                continue
            tris.append(ear)
            remaining.pop(k)
            clipped = True
            break
        if not clipped:
            raise ValueError("polygon could not be triangulated (degenerate?)")
    tris.append((remaining[0], remaining[1], remaining[2]))
    return tris


def extrude_profile(profile_xz, depth: float, name="extrusion") -> TriangleMesh:
    """Extrude a simple polygon in the xz plane along +y into a closed solid.

    The profile is normalized to counterclockwise orientation; caps are
    ear-clipped, sides are quads split along a consistent diagonal.
    """
    profile = np.asarray(profile_xz, dtype=np.float64).reshape(-1, 2)
    if _shoelace2(profile) < 0.0:
        profile = profile[::-1].copy()
    depth = float(depth)
    if depth <= 0.0:
        raise ValueError("extrusion depth must be positive")

    n = profile.shape[0]
    front = np.column_stack(
        [profile[:, 0], np.zeros(n), profile[:, 1]]
    )
    back = front + (0.0, depth, 0.0)
    verts = np.vstack([front, back])

    cap = triangulate_polygon(profile)
    faces: list[tuple[int, int, int]] = []
    for a, b, c in cap:
        faces.append((a, b, c))  # front cap, outward -y
    for a, b, c in cap:
        faces.append((n + a, n + c, n + b))  # back cap, outward +y
    for i in range(n):
        j = (i + 1) % n
        # interior lies left of i->j, so the outward side faces right
        faces.append((i, n + j, j))
        faces.append((i, n + i, n + j))
    return make_mesh(verts, np.asarray(faces, dtype=np.int64), source_name=name)


# ---------------------------------------------------------------------------
# profile families (x = horizontal, z = height)


def tabletop_profile(leg_width, leg_height, span, thickness) -> np.ndarray:
    """T-shape: a deck of width ``span`` resting on a centered leg."""
    w = float(leg_width)
    h = float(leg_height)
    s = float(span)
    t = float(thickness)
    if not (s > w > 0.0) or h <= 0.0 or t <= 0.0:
        raise ValueError("tabletop needs span > leg_width > 0 and positive sizes")
    c = s / 2.0
    return np.array(
        [
            [c - w / 2.0, 0.0],
            [c + w / 2.0, 0.0],
            [c + w / 2.0, h],
            [s, h],
            [s, h + t],
            [0.0, h + t],
            [0.0, h],
            [c - w / 2.0, h],
        ]
    )


def bridge_profile(total_width, leg_width, leg_height, deck_thickness) -> np.ndarray:
    """Two legs carrying a full-width deck."""
    w = float(total_width)
    wl = float(leg_width)
    h = float(leg_height)
    t = float(deck_thickness)
    if not (w > 2.0 * wl > 0.0) or h <= 0.0 or t <= 0.0:
        raise ValueError("bridge needs total_width > 2*leg_width and positive sizes")
    top = h + t
    return np.array(
        [
            [0.0, 0.0],
            [wl, 0.0],
            [wl, h],
            [w - wl, h],
            [w - wl, 0.0],
            [w, 0.0],
            [w, top],
            [0.0, top],
        ]
    )


def steps_profile(base_width, steps, total_height) -> np.ndarray:
    """Overhanging staircase: a column whose width grows at each step.

    ``steps`` is a list of (width, underside_z) pairs with strictly
    increasing widths and heights; each step's underside needs support.
    """
    w0 = float(base_width)
    top = float(total_height)
    pts = [[0.0, 0.0], [w0, 0.0]]
    prev_w = w0
    prev_z = 0.0
    for width, underside in steps:
        width = float(width)
        underside = float(underside)
        if width <= prev_w or underside <= prev_z or underside >= top:
            raise ValueError("steps need strictly increasing widths and heights")
        pts.append([prev_w, underside])
        pts.append([width, underside])
        prev_w = width
        prev_z = underside
    pts.append([prev_w, top])
    pts.append([0.0, top])
    return np.array(pts)


def ell_profile(column_width, reach, underside_z, total_height) -> np.ndarray:
    """Column with one horizontal arm: an L rotated so the arm overhangs."""
    w = float(column_width)
    r = float(reach)
    h = float(underside_z)
    top = float(total_height)
    if not (r > w > 0.0) or not (0.0 < h < top):
        raise ValueError("ell needs reach > column_width and 0 < underside < top")
    return np.array(
        [
            [0.0, 0.0],
            [w, 0.0],
            [w, h],
            [r, h],
            [r, top],
            [0.0, top],
        ]
    )


# ---------------------------------------------------------------------------
# refinement and spheres


def refine_mesh(mesh: TriangleMesh, n: int) -> TriangleMesh:
    """Split every triangle into n^2 congruent sub-triangles.

    Edge subdivision points are generated once per undirected edge with the
    arithmetic anchored at the lower vertex id, so neighbors share bitwise
    identical vertices and watertightness is preserved exactly.
    """
    if n <= 1:
        return mesh
    base = mesh.vertices
    new_verts: list[np.ndarray] = [base[i] for i in range(mesh.n_vertices)]
    edge_cache: dict[tuple[int, int, int], int] = {}

    def edge_point(a: int, b: int, k: int) -> int:
        if a < b:
            key = (a, b, k)
        else:
            key = (b, a, n - k)
        vid = edge_cache.get(key)
        if vid is None:
            ca, cb, ck = key
            p = base[ca] + (ck / n) * (base[cb] - base[ca])
            new_verts.append(p)
            vid = len(new_verts) - 1
            edge_cache[key] = vid
        return vid

    faces_out: list[tuple[int, int, int]] = []
    for face in mesh.faces:
        a, b, c = (int(face[0]), int(face[1]), int(face[2]))
        ab = base[b] - base[a]
        ac = base[c] - base[a]
        grid: dict[tuple[int, int], int] = {}
        for i in range(n + 1):
            for j in range(n + 1 - i):
                if i == 0 and j == 0:
                    vid = a
                elif i == n and j == 0:
                    vid = b
                elif i == 0 and j == n:
                    vid = c
                elif j == 0:
                    vid = edge_point(a, b, i)
                elif i == 0:
                    vid = edge_point(a, c, j)
                elif i + j == n:
                    vid = edge_point(b, c, j)
                else:
                    new_verts.append(base[a] + (i / n) * ab + (j / n) * ac)
                    vid = len(new_verts) - 1
                grid[(i, j)] = vid
        for i in range(n):
            for j in range(n - i):
                faces_out.append((grid[(i, j)], grid[(i + 1, j)], grid[(i, j + 1)]))
                if i + j < n - 1:
                    faces_out.append(
                        (grid[(i + 1, j)], grid[(i + 1, j + 1)], grid[(i, j + 1)])
                    )

    return make_mesh(
        np.asarray(new_verts),
        np.asarray(faces_out, dtype=np.int64),
        source_name=mesh.source_name,
    )


def icosphere(n: int = 8, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Sphere approximation: icosahedron grid-refined n times per edge, with
    all vertices projected onto the sphere."""
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0],
            [1, t, 0],
            [-1, -t, 0],
            [1, -t, 0],
            [0, -1, t],
            [0, 1, t],
            [0, -1, -t],
            [0, 1, -t],
            [t, 0, -1],
            [t, 0, 1],
            [-t, 0, -1],
            [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    faces = np.array(
        [
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ],
        dtype=np.int64,
    )
    ico = make_mesh(verts, faces, source_name="icosphere")
    refined = refine_mesh(ico, n)
    v = refined.vertices.copy()
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    v = v / norms * float(radius) + np.asarray(center, dtype=np.float64)
    return make_mesh(v, refined.faces, source_name="icosphere")
