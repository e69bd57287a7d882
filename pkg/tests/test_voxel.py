import numpy as np
import pytest

from supportsim import (
    GeometryError,
    PrintSetup,
    make_mesh,
    simulate,
    voxel_support_oracle,
)
from supportsim.shapes import box_mesh, extrude_profile, icosphere, tabletop_profile
from supportsim.voxel import MAX_RESOLUTION, MIN_RESOLUTION

DEFAULT = PrintSetup()


class TestGridValues:
    def test_floating_cube_frozen_counts(self):
        # grid spans z in [0, 1.5]; the 0.5 gap holds floor(0.5 / (1.5/n))
        # whole cells per column
        mesh = box_mesh((1.0, 1.0, 1.0), (0.0, 0.0, 0.5))
        assert voxel_support_oracle(mesh, DEFAULT, 16) == 0.46875
        assert voxel_support_oracle(mesh, DEFAULT, 64) == 0.4921875

    def test_floating_cube_converges_to_half(self):
        mesh = box_mesh((1.0, 1.0, 1.0), (0.0, 0.0, 0.5))
        errs = [
            abs(voxel_support_oracle(mesh, DEFAULT, n) - 0.5) for n in (16, 64, 256)
        ]
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 0.01

    def test_grounded_cube_no_support(self):
        assert voxel_support_oracle(box_mesh(), DEFAULT, 32) == 0.0

    def test_gap_under_safe_faces_not_counted(self):
        # tent-bottomed block floating at z=1: its undersides slope at 45
        # degrees, so the air below is support only when alpha makes them
        # risky; the mesh hangs in the air either way
        profile = np.array(
            [[0.0, 2.0], [1.0, 1.0], [2.0, 2.0], [2.0, 3.0], [0.0, 3.0]]
        )
        mesh = extrude_profile(profile, 1.0)
        assert voxel_support_oracle(mesh, PrintSetup(alpha_max_degrees=80.0), 64) == 0.0
        strict = voxel_support_oracle(mesh, PrintSetup(alpha_max_degrees=20.0), 64)
        assert strict > 1.0  # V undersides risky: roughly 3 units of air

    def test_agrees_with_simulation_on_curved_mesh(self):
        sphere = icosphere(8, radius=0.8, center=(0.0, 0.0, 1.5))
        vox = voxel_support_oracle(sphere, DEFAULT, 128)
        sim = simulate(sphere, DEFAULT).support_volume
        assert vox == pytest.approx(sim, rel=0.02)

    def test_agrees_with_simulation_on_table(self):
        mesh = extrude_profile(tabletop_profile(1.0, 1.2, 2.5, 0.4), 0.9)
        vox = voxel_support_oracle(mesh, DEFAULT, 128)
        sim = simulate(mesh, DEFAULT).support_volume
        assert vox == pytest.approx(sim, rel=0.02)


class TestPreconditions:
    def test_resolution_bounds(self):
        mesh = box_mesh()
        with pytest.raises(ValueError, match=f"\\[{MIN_RESOLUTION}, {MAX_RESOLUTION}\\]"):
            voxel_support_oracle(mesh, DEFAULT, MIN_RESOLUTION - 1)
        with pytest.raises(ValueError):
            voxel_support_oracle(mesh, DEFAULT, MAX_RESOLUTION + 1)
        voxel_support_oracle(mesh, DEFAULT, MIN_RESOLUTION)  # boundary ok

    def test_requires_watertight(self):
        open_mesh = make_mesh(
            [[0, 0, 1], [1, 0, 1], [0, 1, 1]], [[0, 2, 1]]
        )
        with pytest.raises(GeometryError, match="watertight"):
            voxel_support_oracle(open_mesh, DEFAULT, 32)

    def test_requires_print_frame(self):
        with pytest.raises(GeometryError, match="print frame"):
            voxel_support_oracle(box_mesh(), PrintSetup(direction=(0, 1, 0)), 32)

    def test_rejects_flat_bbox(self):
        # zero extent along x: the grid cannot cover any volume
        pillow = make_mesh(
            [[0, 0, 1], [0, 1, 1], [0, 0, 2]], [[0, 1, 2], [0, 2, 1]]
        )
        with pytest.raises(GeometryError, match="bounding box"):
            voxel_support_oracle(pillow, DEFAULT, 32)
