"""Shared fixtures: procedural meshes and kernel warmup."""

import numpy as np
import pytest

import supportsim as ss
from supportsim.mesh import make_mesh
from supportsim.shapes import (
    box_mesh,
    bridge_profile,
    ell_profile,
    extrude_profile,
    refine_mesh,
    steps_profile,
    tabletop_profile,
)


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # the first compiled-kernel call pays compilation cost; keep that out of
    # the timed tests
    mesh = box_mesh((1.0, 1.0, 1.0), (0.0, 0.0, 0.5))
    setup = ss.PrintSetup()
    ss.simulate(mesh, setup)
    ss.voxel_support_oracle(mesh, setup, resolution=16)
    yield


def pyramid45():
    """Square pyramid, apex on the bed: every lateral face sits exactly on
    the 45 degree self-support boundary."""
    v = np.array(
        [
            [0.0, 0.0, 0.0],
            [1.0, 1.0, 1.0],
            [1.0, -1.0, 1.0],
            [-1.0, -1.0, 1.0],
            [-1.0, 1.0, 1.0],
        ]
    )
    f = np.array(
        [[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1], [1, 4, 3], [1, 3, 2]]
    )
    return make_mesh(v, f, source_name="pyramid45")


def rotated_z(mesh, degrees):
    th = np.radians(degrees)
    c, s = np.cos(th), np.sin(th)
    r = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return make_mesh(mesh.vertices @ r.T, mesh.faces, source_name=mesh.source_name)


def scaled(mesh, factor):
    return make_mesh(
        mesh.vertices * factor, mesh.faces, source_name=mesh.source_name
    )


def oracle_fixtures():
    """Watertight fixtures with hand-computable support volumes: floating
    boxes, tables, bridges, stepped overhangs and L-brackets."""
    fx = {}
    fx["floatbox-a"] = box_mesh((1.0, 1.0, 1.0), (0.0, 0.0, 0.5))
    fx["floatbox-b"] = box_mesh((2.0, 1.0, 0.6), (0.0, 0.0, 1.1))
    fx["floatbox-c"] = box_mesh((0.8, 1.7, 1.3), (0.0, 0.0, 0.25))
    fx["tabletop-a"] = extrude_profile(tabletop_profile(1.0, 1.2, 2.5, 0.4), 0.9)
    fx["tabletop-b"] = extrude_profile(tabletop_profile(0.6, 0.9, 3.1, 0.5), 1.3)
    fx["bridge-a"] = extrude_profile(bridge_profile(3.0, 0.5, 1.0, 0.5), 1.1)
    fx["bridge-b"] = extrude_profile(bridge_profile(4.0, 0.8, 1.6, 0.4), 0.7)
    fx["steps-a"] = refine_mesh(
        extrude_profile(steps_profile(0.6, [(1.2, 0.5), (1.8, 1.0)], 1.5), 0.8), 2
    )
    fx["steps-b"] = refine_mesh(
        extrude_profile(
            steps_profile(0.5, [(0.9, 0.4), (1.3, 0.8), (1.7, 1.2)], 1.6), 1.0
        ),
        2,
    )
    fx["ell-a"] = extrude_profile(ell_profile(0.5, 1.5, 0.8, 1.4), 0.7)
    fx["ell-b"] = extrude_profile(ell_profile(0.7, 2.2, 1.1, 1.8), 1.2)
    return fx


def random_soup(rng, n_faces=400, lo=-1.0, hi=1.0):
    """Triangle soup for ray-cast stress tests; not watertight."""
    base = rng.uniform(lo, hi, (n_faces, 3))
    east = base + rng.normal(0.0, 0.25, (n_faces, 3))
    west = base + rng.normal(0.0, 0.25, (n_faces, 3))
    verts = np.concatenate([base, east, west], axis=0)
    faces = np.arange(3 * n_faces, dtype=np.int64).reshape(3, n_faces).T
    return make_mesh(verts, faces, source_name="soup")
