"""Support-structure simulation and preference alignment toolkit.

Estimates how much support material a mesh needs when 3D printed (risky
faces, support columns, normalized support volume), derives preference
pairs from those scores and exercises an offset preference loss on a toy
seeded design policy.
"""

from .backend import NUMBA_AVAILABLE, USING_NUMBA, active_backend
from .errors import DivergenceError, GeometryError, ParseError
from .mesh import (
    PrintSetup,
    TriangleMesh,
    ValidationReport,
    load_mesh,
    make_mesh,
    parse_obj,
    parse_stl,
    signed_volume,
    transform_to_print_frame,
    validate,
    write_ply_colored,
    write_stl,
)
from .metrics import (
    ComparisonResult,
    DatasetScores,
    dataset_scores,
    nsv_star,
    nsv_weighted,
    sec,
)
from .preference import (
    AlignmentConfig,
    PairEnumeration,
    PolicyLogProbs,
    PreferencePair,
    SampleRecord,
    compute_offset,
    dpo_loss,
    enumerate_pairs,
    logit_margin,
    loss_gradients,
    odpo_loss,
    pair_logprobs,
)
from .raycast import BvhIndex, RayHit, brute_force_first_hit, build_bvh, cast_rays, ray_first_hit
from .simulate import (
    FaceClassification,
    SupportColumn,
    SupportReport,
    classify_faces,
    prism_volume,
    simulate,
    support_columns,
    tetra_volume,
)
from .toyalign import (
    GaussianPolicy,
    ToyAlignmentResult,
    TrajectoryPoint,
    heldout_sec,
    prompt_geometry,
    run_toy_alignment,
)
from .voxel import voxel_support_oracle

__version__ = "0.1.0"

__all__ = [
    "AlignmentConfig",
    "BvhIndex",
    "ComparisonResult",
    "DatasetScores",
    "DivergenceError",
    "FaceClassification",
    "GaussianPolicy",
    "GeometryError",
    "NUMBA_AVAILABLE",
    "PairEnumeration",
    "ParseError",
    "PolicyLogProbs",
    "PreferencePair",
    "PrintSetup",
    "RayHit",
    "SampleRecord",
    "SupportColumn",
    "SupportReport",
    "ToyAlignmentResult",
    "TrajectoryPoint",
    "TriangleMesh",
    "USING_NUMBA",
    "ValidationReport",
    "active_backend",
    "brute_force_first_hit",
    "build_bvh",
    "cast_rays",
    "classify_faces",
    "compute_offset",
    "dataset_scores",
    "dpo_loss",
    "enumerate_pairs",
    "heldout_sec",
    "load_mesh",
    "logit_margin",
    "loss_gradients",
    "make_mesh",
    "nsv_star",
    "nsv_weighted",
    "odpo_loss",
    "pair_logprobs",
    "parse_obj",
    "parse_stl",
    "prism_volume",
    "prompt_geometry",
    "ray_first_hit",
    "run_toy_alignment",
    "sec",
    "signed_volume",
    "simulate",
    "support_columns",
    "tetra_volume",
    "transform_to_print_frame",
    "validate",
    "voxel_support_oracle",
    "write_ply_colored",
    "write_stl",
]
