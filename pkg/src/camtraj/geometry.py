"""Rigid-body camera geometry: intrinsics, extrinsics, trajectories.

Extrinsics are explicitly tagged with their convention (world-to-camera or
camera-to-world) and every operation checks the tag instead of guessing.
Rotations are validated on construction: ``R.T @ R == I`` and ``det R == 1``
within 1e-6, max-abs elementwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConventionMismatch, NonUnitAxis, RotationInvalid

ORTHO_TOL = 1e-6
UNIT_TOL = 1e-9


class Convention(Enum):
    """Direction of the rigid map stored in an Extrinsics value."""

    WORLD_TO_CAMERA = "w2c"
    CAMERA_TO_WORLD = "c2w"


def _frozen_array(x, shape) -> np.ndarray:
    a = np.array(x, dtype=np.float64)
    if a.shape != shape:
        raise ValueError(f"expected array of shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("array contains non-finite entries")
    a.setflags(write=False)
    return a


def check_rotation(r: np.ndarray, line: int | None = None) -> None:
    """Raise RotationInvalid unless r is a proper rotation within ORTHO_TOL."""
    err = np.abs(r.T @ r - np.eye(3)).max()
    if err >= ORTHO_TOL:
        raise RotationInvalid(f"R.T @ R deviates from identity by {err:.3e}", line)
    det = float(np.linalg.det(r))
    if abs(det - 1.0) >= ORTHO_TOL:
        raise RotationInvalid(f"det(R) = {det:.9f}, expected 1", line)


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixel units.

    Principal point is unconstrained: synthesized principal-point motion may
    legitimately leave the image bounds.
    """

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        for name in ("fx", "fy", "cx", "cy"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")

    def matrix(self) -> np.ndarray:
        """3x3 calibration matrix K."""
        return np.array([
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])

    def inverse_matrix(self) -> np.ndarray:
        """Closed-form K^-1 (avoids a generic solve)."""
        return np.array([
            [1.0 / self.fx, 0.0, -self.cx / self.fx],
            [0.0, 1.0 / self.fy, -self.cy / self.fy],
            [0.0, 0.0, 1.0],
        ])


@dataclass(frozen=True)
class Extrinsics:
    """A rigid transform (R, t) tagged with its convention.

    Under WORLD_TO_CAMERA the map sends world points x to camera coordinates
    R @ x + t; under CAMERA_TO_WORLD it is the inverse map and t is the camera
    center. Arrays are copied and frozen on construction.
    """

    rotation: np.ndarray
    translation: np.ndarray
    convention: Convention

    def __post_init__(self):
        r = _frozen_array(self.rotation, (3, 3))
        t = _frozen_array(self.translation, (3,))
        check_rotation(r)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        if not isinstance(self.convention, Convention):
            raise TypeError(f"convention must be a Convention, got {self.convention!r}")

    @classmethod
    def identity(cls, convention: Convention) -> "Extrinsics":
        return cls(np.eye(3), np.zeros(3), convention)

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix of the stored map."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def is_identity(self, tol: float = 0.0) -> bool:
        return (np.abs(self.rotation - np.eye(3)).max() <= tol
                and np.abs(self.translation).max() <= tol)


def invert_extrinsics(e: Extrinsics) -> Extrinsics:
    """Invert the rigid map and flip the convention tag.

    (R, t) -> (R.T, -R.T @ t); a w2c becomes the equivalent c2w and vice
    versa, so invert(invert(e)) round-trips.
    """
    other = (Convention.CAMERA_TO_WORLD
             if e.convention is Convention.WORLD_TO_CAMERA
             else Convention.WORLD_TO_CAMERA)
    rt = e.rotation.T
    return Extrinsics(rt, -rt @ e.translation, other)


def compose(a: Extrinsics, b: Extrinsics) -> Extrinsics:
    """Composition applying b first, then a: (R_a @ R_b, R_a @ t_b + t_a).

    Raises:
        ConventionMismatch: if the two tags differ.
    """
    if a.convention is not b.convention:
        raise ConventionMismatch(
            f"cannot compose {a.convention.value} with {b.convention.value}")
    return Extrinsics(a.rotation @ b.rotation,
                      a.rotation @ b.translation + a.translation,
                      a.convention)


def as_convention(e: Extrinsics, convention: Convention) -> Extrinsics:
    """Return e expressed under the requested convention."""
    if e.convention is convention:
        return e
    return invert_extrinsics(e)


def rotation_about_axis(axis, angle_rad: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis.

    Raises:
        NonUnitAxis: if ``axis`` deviates from unit length by more than 1e-9.
    """
    a = np.asarray(axis, dtype=np.float64)
    if a.shape != (3,):
        raise NonUnitAxis(f"axis must be a 3-vector, got shape {a.shape}")
    n = float(np.linalg.norm(a))
    if abs(n - 1.0) > UNIT_TOL:
        raise NonUnitAxis(f"axis norm {n:.12f} deviates from 1 by more than {UNIT_TOL}")
    x, y, z = a
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + math.sin(angle_rad) * k + (1.0 - math.cos(angle_rad)) * (k @ k)


def orthonormalize(e: Extrinsics) -> Extrinsics:
    """Project the rotation onto SO(3) via SVD, keeping translation and tag.

    Intended as an explicit repair step for nearly-valid inputs; construction
    itself never silently re-orthonormalizes.
    """
    u, _, vt = np.linalg.svd(np.asarray(e.rotation))
    r = u @ vt
    if np.linalg.det(r) < 0:
        u = u.copy()
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return Extrinsics(r, e.translation, e.convention)


@dataclass(frozen=True)
class CameraPose:
    """One frame: intrinsics plus tagged extrinsics."""

    intrinsics: Intrinsics
    extrinsics: Extrinsics


@dataclass(frozen=True)
class Trajectory:
    """An ordered pose sequence with shared image dimensions.

    All poses must carry the same extrinsics convention.
    """

    poses: tuple[CameraPose, ...] = field()
    width: int = 0
    height: int = 0

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))
        if len(self.poses) < 1:
            raise ValueError("trajectory needs at least one pose")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dims must be positive, got {self.width}x{self.height}")
        conv = self.poses[0].extrinsics.convention
        for i, p in enumerate(self.poses):
            if p.extrinsics.convention is not conv:
                raise ConventionMismatch(
                    f"pose {i} is {p.extrinsics.convention.value}, pose 0 is {conv.value}")

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def convention(self) -> Convention:
        return self.poses[0].extrinsics.convention


def relativize(traj: Trajectory) -> Trajectory:
    """Re-express every frame relative to frame 0.

    Internally works in world-to-camera convention, where the relative
    transform is E_i @ E_0^-1, then converts back so the output carries the
    input's convention. Frame 0 of the result is exactly the identity, and a
    trajectory whose first frame is already the identity comes back with its
    extrinsics rebuilt from the same values.
    """
    conv = traj.convention
    w2c = [as_convention(p.extrinsics, Convention.WORLD_TO_CAMERA) for p in traj.poses]
    inv0 = invert_extrinsics(w2c[0])  # tagged c2w; same numbers as E_0^-1
    base = Extrinsics(inv0.rotation, inv0.translation, Convention.WORLD_TO_CAMERA)
    out = []
    for p, e in zip(traj.poses, w2c):
        rel = compose(e, base)
        rel = as_convention(rel, conv)
        out.append(CameraPose(p.intrinsics, rel))
    first = Extrinsics.identity(conv)
    out[0] = CameraPose(traj.poses[0].intrinsics, first)
    return Trajectory(tuple(out), traj.width, traj.height)
