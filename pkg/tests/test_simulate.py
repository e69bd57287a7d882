import math

import numpy as np
import pytest

from supportsim import (
    GeometryError,
    PrintSetup,
    classify_faces,
    make_mesh,
    prism_volume,
    simulate,
    support_columns,
    tetra_volume,
)
from supportsim.shapes import (
    box_mesh,
    combine,
    cone_mesh,
    ell_profile,
    extrude_profile,
    icosphere,
    bridge_profile,
    refine_mesh,
    steps_profile,
    tabletop_profile,
)
from supportsim.simulate import BED_TERMINATION, _prism_volumes_batch

from conftest import oracle_fixtures, pyramid45, rotated_z

DEFAULT = PrintSetup()

# per-depth NSV of each conftest fixture, worked out from the profile
# rectangles (overhang footprint x drop height over total section area)
ANALYTIC_NSV = {
    "floatbox-a": 0.5,
    "floatbox-b": 1.1 / 0.6,
    "floatbox-c": 0.25 / 1.3,
    "tabletop-a": (2.5 - 1.0) * 1.2 / (1.0 * 1.2 + 2.5 * 0.4),
    "tabletop-b": (3.1 - 0.6) * 0.9 / (0.6 * 0.9 + 3.1 * 0.5),
    "bridge-a": (3.0 - 1.0) * 1.0 / (2 * 0.5 * 1.0 + 3.0 * 0.5),
    "bridge-b": (4.0 - 1.6) * 1.6 / (2 * 0.8 * 1.6 + 4.0 * 0.4),
    "steps-a": (0.6 * 0.5 + 0.6 * 1.0) / (0.6 * 1.5 + 0.6 * 1.0 + 0.6 * 0.5),
    "steps-b": (0.4 * 0.4 + 0.4 * 0.8 + 0.4 * 1.2)
    / (0.5 * 1.6 + 0.4 * 1.2 + 0.4 * 0.8 + 0.4 * 0.4),
    "ell-a": (1.0 * 0.8) / (0.5 * 1.4 + 1.0 * 0.6),
    "ell-b": (1.5 * 1.1) / (0.7 * 1.8 + 1.5 * 0.7),
}


class TestClassification:
    def test_cube_faces(self):
        cls = classify_faces(box_mesh(), DEFAULT)
        normals = box_mesh().face_normals
        np.testing.assert_array_equal(cls.risky, normals[:, 2] < -0.9)
        assert cls.risky_count == 2
        assert cls.risky_area == pytest.approx(1.0)
        assert cls.safe.sum() == 10

    def test_45_degree_faces_are_safe_at_45(self):
        # lateral faces sit exactly on the threshold; boundary counts as safe
        cls = classify_faces(pyramid45(), DEFAULT)
        assert cls.risky_count == 0

    def test_45_degree_faces_risky_at_30(self):
        cls = classify_faces(pyramid45(), PrintSetup(alpha_max_degrees=30.0))
        assert cls.risky_count == 4

    def test_larger_alpha_never_adds_risk(self):
        mesh = icosphere(8, radius=1.0, center=(0, 0, 1.5))
        prev = None
        for alpha in (15.0, 30.0, 45.0, 60.0, 75.0):
            risky = classify_faces(mesh, PrintSetup(alpha_max_degrees=alpha)).risky
            if prev is not None:
                assert not (risky & ~prev).any()  # risky set only shrinks
            prev = risky

    def test_cone_lateral_faces(self):
        cone = cone_mesh(radius=1.0, height=1.0, segments=32)
        assert classify_faces(cone, PrintSetup(alpha_max_degrees=30.0)).risky_count == 32
        assert classify_faces(cone, PrintSetup(alpha_max_degrees=60.0)).risky_count == 0

    def test_degenerate_faces_excluded(self):
        mesh = make_mesh(
            [[0, 0, 1], [1, 0, 1], [2, 0, 1], [0, 1, 1]],
            [[0, 1, 2], [0, 3, 1]],  # first is a zero-area sliver
        )
        cls = classify_faces(mesh, DEFAULT)
        assert cls.degenerate.tolist() == [True, False]
        assert not cls.risky[0]
        assert cls.risky[1]  # downward-facing triangle


class TestPrismVolumes:
    def test_tetra_volume_unit(self):
        v = tetra_volume([0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1])
        assert v == pytest.approx(1.0 / 6.0, rel=1e-15)

    def test_tetra_volume_orientation_free(self):
        a = tetra_volume([0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1])
        b = tetra_volume([0, 0, 0], [0, 1, 0], [1, 0, 0], [0, 0, 1])
        assert a == b

    def test_straight_prism(self):
        top = [[0, 0, 2], [1, 0, 2], [0, 1, 2]]
        bottom = [[0, 0, 0], [1, 0, 0], [0, 1, 0]]
        assert prism_volume(top, bottom) == pytest.approx(1.0, rel=1e-14)

    def test_collapsed_prism_is_zero(self):
        top = [[0, 0, 1], [1, 0, 1], [0, 1, 1]]
        assert prism_volume(top, top) == 0.0

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(3)
        tops = rng.uniform(-1, 1, size=(50, 3, 3))
        tops[:, :, 2] += 3.0
        bottoms = tops.copy()
        bottoms[:, :, 2] = rng.uniform(-1, 1, size=(50, 3))
        batch = _prism_volumes_batch(tops, bottoms)
        for k in range(50):
            assert batch[k] == pytest.approx(
                prism_volume(tops[k], bottoms[k]), rel=1e-12, abs=1e-15
            )


class TestSimulate:
    def test_fixture_nsv_matches_analytic(self):
        for name, mesh in oracle_fixtures().items():
            report = simulate(mesh, DEFAULT)
            assert report.nsv == pytest.approx(
                ANALYTIC_NSV[name], rel=1e-12
            ), name
            assert report.watertight, name

    def test_floating_cube_exact(self):
        report = simulate(box_mesh((1, 1, 1), (0, 0, 0.5)), DEFAULT)
        assert report.mesh_volume == pytest.approx(1.0, rel=1e-15)
        assert report.support_volume == pytest.approx(0.5, rel=1e-9)
        assert report.risky_count == 2
        assert report.column_count == 2

    def test_grounded_cube_zero(self):
        report = simulate(box_mesh(), DEFAULT)
        assert report.support_volume == 0.0
        assert report.nsv == 0.0
        assert report.risky_count == 2  # bottom face is risky, just at height 0
        assert report.column_count == 0

    def test_pyramid_nsv_exactly_two(self):
        report = simulate(pyramid45(), PrintSetup(alpha_max_degrees=30.0))
        assert report.nsv == pytest.approx(2.0, rel=1e-12)
        assert report.support_volume == pytest.approx(8.0 / 3.0, rel=1e-12)

    def test_no_risky_faces_short_circuits(self):
        report = simulate(pyramid45(), DEFAULT)
        assert report.support_volume == 0.0
        assert report.column_count == 0
        assert report.risky_count == 0

    def test_rotation_about_build_axis_is_invariant(self):
        mesh = oracle_fixtures()["tabletop-a"]
        base = simulate(mesh, DEFAULT).nsv
        for deg in (15.0, 30.0, 77.5, 222.0):
            nsv = simulate(rotated_z(mesh, deg), DEFAULT).nsv
            assert nsv == pytest.approx(base, abs=1e-9)

    def test_explicit_bvh_matches_auto(self):
        from supportsim import build_bvh

        mesh = oracle_fixtures()["steps-a"]
        auto = simulate(mesh, DEFAULT)
        forced = simulate(mesh, DEFAULT, bvh=build_bvh(mesh, leaf_size=2))
        assert forced.support_volume == auto.support_volume

    def test_open_mesh_flagged_not_watertight(self):
        floating = make_mesh(
            [[0, 0, 1], [1, 0, 1], [0, 1, 1], [0, 0, 2]],
            [[0, 2, 1], [0, 1, 3], [1, 2, 3], [2, 0, 3]],
        )
        report = simulate(floating, DEFAULT)
        assert report.watertight  # closed tetrahedron
        open_mesh = make_mesh(floating.vertices, floating.faces[:3])
        report2 = simulate(open_mesh, DEFAULT)
        assert not report2.watertight

    def test_requires_print_frame(self):
        with pytest.raises(GeometryError, match="print frame"):
            simulate(box_mesh(), PrintSetup(direction=(1.0, 0.0, 0.0)))

    def test_rejects_mesh_below_bed(self):
        with pytest.raises(GeometryError, match="below the bed"):
            simulate(box_mesh((1, 1, 1), (0, 0, -0.5)), DEFAULT)

    def test_rejects_zero_volume(self):
        # two opposite-winding copies of one triangle: closed but flat
        pillow = make_mesh(
            [[0, 0, 1], [1, 0, 1], [0, 1, 1]], [[0, 1, 2], [0, 2, 1]]
        )
        with pytest.raises(GeometryError, match="zero-volume"):
            simulate(pillow, DEFAULT)


class TestSupportColumns:
    def test_floating_cube_columns(self):
        cols = support_columns(box_mesh((1, 1, 1), (0, 0, 0.5)), DEFAULT)
        assert len(cols) == 2
        total = sum(c.volume for c in cols)
        assert total == pytest.approx(0.5, rel=1e-9)
        for c in cols:
            assert c.terminations == (BED_TERMINATION,) * 3
            assert c.top[:, 2] == pytest.approx(0.5)
            assert c.bottom[:, 2] == pytest.approx(0.0)
            np.testing.assert_allclose(c.top[:, :2], c.bottom[:, :2], atol=1e-8)

    def test_stacked_boxes_terminate_on_lower_face(self):
        lower = box_mesh((2.0, 2.0, 0.5), (0.0, 0.0, 0.0))
        upper = box_mesh((1.0, 1.0, 0.5), (0.5, 0.5, 1.0))
        mesh = combine([lower, upper])
        cols = [c for c in support_columns(mesh, DEFAULT) if c.volume > 0]
        assert len(cols) == 2
        for c in cols:
            assert c.face_id >= 12  # a face of the upper box
            for term in c.terminations:
                assert 0 <= term < 12  # landed on the lower box
                assert mesh.face_normals[term][2] == pytest.approx(1.0)
            assert c.bottom[:, 2] == pytest.approx(0.5, abs=1e-9)
            assert c.volume == pytest.approx(0.25, rel=1e-6)
        report = simulate(mesh, DEFAULT)
        assert report.nsv == pytest.approx(0.5 / 2.5, rel=1e-9)
        assert report.column_count == 2
        assert report.risky_count == 4

    def test_bridge_deck_columns_reach_bed(self):
        mesh = extrude_profile(bridge_profile(3.0, 0.5, 1.0, 0.5), 1.1)
        cols = [c for c in support_columns(mesh, DEFAULT) if c.volume > 0]
        assert cols
        assert {t for c in cols for t in c.terminations} == {BED_TERMINATION}

    def test_empty_when_nothing_risky(self):
        assert support_columns(pyramid45(), DEFAULT) == []
