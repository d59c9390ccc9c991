"""camtraj: camera trajectory toolkit.

Pose parsing, pixel-wise Plucker ray embeddings, trajectory synthesis,
fidelity metrics, a deterministic multi-scale trajectory encoder, and NPY
tensor serialization, wired together by the ``camtraj`` CLI.
"""

from .geometry import (
    CameraPose,
    Convention,
    Extrinsics,
    Intrinsics,
    Trajectory,
    as_convention,
    compose,
    invert_extrinsics,
    orthonormalize,
    relativize,
    rotation_about_axis,
)
from .metrics import AlignmentReport, evaluate, normalize_scale, rot_err, trans_err
from .plucker import camera_center, plucker_map, plucker_sequence, ray_direction
from .pose_io import (
    PoseFile,
    PoseRecord,
    parse_pose_file,
    parse_trajectory_spec,
    serialize_pose_file,
    to_trajectory,
    trajectory_from_json,
    trajectory_to_json,
)
from .synth import (
    MotionDirective,
    MotionKind,
    SynthesisPlan,
    compose_motions,
    scale_intensity,
    synth_intrinsic_motion,
    synth_pan,
    synth_rotation,
    synthesize,
)
from .encoder import (
    EncoderConfig,
    MultiScaleCameraFeatures,
    encoder_forward,
    fuse,
    pixel_unshuffle,
    shape_schedule,
    temporal_attention_block,
)
from .npyio import read_npy, read_npy_file, write_npy, write_npy_file

__version__ = "0.1.0"

__all__ = [
    "AlignmentReport",
    "CameraPose",
    "Convention",
    "EncoderConfig",
    "Extrinsics",
    "Intrinsics",
    "MotionDirective",
    "MotionKind",
    "MultiScaleCameraFeatures",
    "PoseFile",
    "PoseRecord",
    "SynthesisPlan",
    "Trajectory",
    "as_convention",
    "camera_center",
    "compose",
    "compose_motions",
    "encoder_forward",
    "evaluate",
    "fuse",
    "invert_extrinsics",
    "normalize_scale",
    "orthonormalize",
    "parse_pose_file",
    "parse_trajectory_spec",
    "pixel_unshuffle",
    "plucker_map",
    "plucker_sequence",
    "ray_direction",
    "read_npy",
    "read_npy_file",
    "relativize",
    "rot_err",
    "rotation_about_axis",
    "scale_intensity",
    "serialize_pose_file",
    "shape_schedule",
    "synth_intrinsic_motion",
    "synth_pan",
    "synth_rotation",
    "synthesize",
    "temporal_attention_block",
    "to_trajectory",
    "trajectory_from_json",
    "trajectory_to_json",
    "trans_err",
    "write_npy",
    "write_npy_file",
]
