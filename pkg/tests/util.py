"""Shared random-input builders for the test suite.

Rotations are generated from random unit quaternions, independently of the
library's own rotation construction, so library code never feeds its own
test inputs.
"""

import numpy as np

from camtraj.geometry import (
    CameraPose,
    Convention,
    Extrinsics,
    Intrinsics,
    Trajectory,
)


def quat_to_matrix(q):
    """Unit quaternion (w, x, y, z) to rotation matrix."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def random_rotation(rng):
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    return quat_to_matrix(q)


def random_unit(rng):
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def random_extrinsics(rng, convention=Convention.WORLD_TO_CAMERA, t_scale=1.0):
    return Extrinsics(random_rotation(rng), t_scale * rng.standard_normal(3), convention)


def random_intrinsics(rng, width=64, height=48):
    fx = rng.uniform(0.5, 2.0) * width
    fy = rng.uniform(0.5, 2.0) * height
    cx = rng.uniform(0.3, 0.7) * width
    cy = rng.uniform(0.3, 0.7) * height
    return Intrinsics(fx, fy, cx, cy)


def random_pose(rng, convention=Convention.WORLD_TO_CAMERA, width=64, height=48):
    return CameraPose(random_intrinsics(rng, width, height),
                      random_extrinsics(rng, convention))


def random_trajectory(rng, n=8, convention=Convention.WORLD_TO_CAMERA,
                      width=64, height=48):
    poses = tuple(random_pose(rng, convention, width, height) for _ in range(n))
    return Trajectory(poses, width, height)
