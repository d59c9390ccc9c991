"""Synthetic camera trajectories built from simple motion directives.

All synthesized trajectories are relative: frame 0 is the identity pose and
extrinsics carry the camera-to-world convention, so the translation of frame
i is directly the camera center. Rotation directives spin the camera in
place about a fixed center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import reduce

import numpy as np

from .errors import EmptyDirectives, NonPositiveScale, NonUnitAxis, NonUnitDirection
from .geometry import (
    CameraPose,
    Convention,
    Extrinsics,
    Intrinsics,
    Trajectory,
    compose,
    invert_extrinsics,
    rotation_about_axis,
)

UNIT_TOL = 1e-9


class MotionKind(Enum):
    PAN = "pan"
    ZOOM = "zoom"
    ROTATE = "rotate"
    PRINCIPAL_SHIFT = "principal_shift"
    FOCAL_ZOOM = "focal_zoom"


def _check_unit(vec, exc: type[Exception]) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64)
    if v.shape != (3,):
        raise exc(f"expected a 3-vector, got shape {v.shape}")
    n = float(np.linalg.norm(v))
    if abs(n - 1.0) > UNIT_TOL:
        raise exc(f"norm {n:.12f} deviates from 1 by more than {UNIT_TOL}")
    return v


@dataclass(frozen=True)
class MotionDirective:
    """One validated motion primitive.

    Field use depends on kind: PAN needs a unit ``direction`` plus per-frame
    ``interval`` (scene units); ZOOM is a pan along the view axis (0,0,1)
    with a signed ``interval``; ROTATE stores the unit axis in ``direction``
    and total degrees in ``interval``; PRINCIPAL_SHIFT stores per-frame pixel
    deltas in ``shift``; FOCAL_ZOOM stores its per-frame factor in
    ``interval``.
    """

    kind: MotionKind
    frames: int
    direction: tuple[float, float, float] | None = None
    interval: float | None = None
    shift: tuple[float, float] | None = None

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError(f"frames must be >= 1, got {self.frames}")
        if self.kind is MotionKind.PAN:
            if self.direction is None or self.interval is None:
                raise ValueError("pan needs direction and interval")
            _check_unit(self.direction, NonUnitDirection)
        elif self.kind is MotionKind.ZOOM:
            if self.interval is None:
                raise ValueError("zoom needs interval")
        elif self.kind is MotionKind.ROTATE:
            if self.direction is None or self.interval is None:
                raise ValueError("rotate needs axis and degrees")
            _check_unit(self.direction, NonUnitAxis)
        elif self.kind is MotionKind.PRINCIPAL_SHIFT:
            if self.shift is None or len(self.shift) != 2:
                raise ValueError("principal_shift needs a (dx, dy) pair")
        elif self.kind is MotionKind.FOCAL_ZOOM:
            if self.interval is None:
                raise ValueError("focal_zoom needs scale")
            if not (self.interval > 0 and math.isfinite(self.interval)):
                raise NonPositiveScale(f"focal factor must be positive, got {self.interval}")


@dataclass(frozen=True)
class SynthesisPlan:
    """A validated synthesis request: frame count, image dims, base
    intrinsics, and the directives to compose in order."""

    frames: int
    width: int
    height: int
    intrinsics: Intrinsics
    directives: tuple[MotionDirective, ...]


def synth_pan(direction, interval: float, n: int,
              intrinsics: Intrinsics, width: int, height: int) -> Trajectory:
    """Translate the camera along a fixed unit direction.

    Frame i keeps the identity rotation and sits at center
    ``i * interval * direction``; intrinsics are constant.

    Raises:
        NonUnitDirection: if ``direction`` is not unit length within 1e-9.
    """
    d = _check_unit(direction, NonUnitDirection)
    poses = []
    for i in range(n):
        ext = Extrinsics(np.eye(3), i * interval * d, Convention.CAMERA_TO_WORLD)
        poses.append(CameraPose(intrinsics, ext))
    return Trajectory(tuple(poses), width, height)


def synth_rotation(axis, total_degrees: float, n: int,
                   intrinsics: Intrinsics, width: int, height: int) -> Trajectory:
    """Rotate the camera in place about a fixed unit axis.

    The total angle is spread uniformly: frame i carries
    ``i * total_degrees / (n - 1)``, so the last frame reaches the total
    exactly. Camera center stays at the origin.

    Raises:
        NonUnitAxis: if ``axis`` is not unit length within 1e-9.
        ValueError: if n == 1 with a nonzero total (no increment exists).
    """
    a = _check_unit(axis, NonUnitAxis)
    if n == 1:
        if total_degrees != 0.0:
            raise ValueError("single-frame trajectory cannot spread a nonzero angle")
        step = 0.0
    else:
        step = math.radians(total_degrees) / (n - 1)
    poses = []
    for i in range(n):
        r = rotation_about_axis(a, i * step)
        ext = Extrinsics(r, np.zeros(3), Convention.CAMERA_TO_WORLD)
        poses.append(CameraPose(intrinsics, ext))
    return Trajectory(tuple(poses), width, height)


def synth_intrinsic_motion(kind: MotionKind, param, n: int,
                           intrinsics: Intrinsics, width: int, height: int) -> Trajectory:
    """Animate intrinsics while every frame keeps the identity extrinsics.

    PRINCIPAL_SHIFT moves the principal point by ``param = (dx, dy)`` pixels
    per frame; FOCAL_ZOOM multiplies both focals by ``param ** i`` at frame
    i. The principal point may leave the image bounds.

    Raises:
        NonPositiveScale: for a FOCAL_ZOOM factor <= 0.
        ValueError: for any other kind.
    """
    ident = Extrinsics.identity(Convention.CAMERA_TO_WORLD)
    poses = []
    if kind is MotionKind.PRINCIPAL_SHIFT:
        dx, dy = param
        for i in range(n):
            intr = Intrinsics(intrinsics.fx, intrinsics.fy,
                              intrinsics.cx + i * dx, intrinsics.cy + i * dy)
            poses.append(CameraPose(intr, ident))
    elif kind is MotionKind.FOCAL_ZOOM:
        s = float(param)
        if not (s > 0 and math.isfinite(s)):
            raise NonPositiveScale(f"focal factor must be positive, got {s}")
        for i in range(n):
            f = s ** i
            intr = Intrinsics(intrinsics.fx * f, intrinsics.fy * f,
                              intrinsics.cx, intrinsics.cy)
            poses.append(CameraPose(intr, ident))
    else:
        raise ValueError(f"not an intrinsic motion kind: {kind}")
    return Trajectory(tuple(poses), width, height)


def _directive_extrinsics(d: MotionDirective, i: int) -> Extrinsics:
    """Frame-i extrinsic contribution of one directive (camera-to-world)."""
    if d.kind is MotionKind.PAN:
        vec = np.asarray(d.direction, dtype=np.float64)
        return Extrinsics(np.eye(3), i * d.interval * vec, Convention.CAMERA_TO_WORLD)
    if d.kind is MotionKind.ZOOM:
        return Extrinsics(np.eye(3), np.array([0.0, 0.0, i * d.interval]),
                          Convention.CAMERA_TO_WORLD)
    if d.kind is MotionKind.ROTATE:
        step = 0.0 if d.frames == 1 else math.radians(d.interval) / (d.frames - 1)
        r = rotation_about_axis(np.asarray(d.direction, dtype=np.float64), i * step)
        return Extrinsics(r, np.zeros(3), Convention.CAMERA_TO_WORLD)
    return Extrinsics.identity(Convention.CAMERA_TO_WORLD)


def _directive_intrinsics(d: MotionDirective, i: int, intr: Intrinsics) -> Intrinsics:
    """Apply one directive's frame-i intrinsic action to intr."""
    if d.kind is MotionKind.PRINCIPAL_SHIFT:
        dx, dy = d.shift
        return Intrinsics(intr.fx, intr.fy, intr.cx + i * dx, intr.cy + i * dy)
    if d.kind is MotionKind.FOCAL_ZOOM:
        f = d.interval ** i
        return Intrinsics(intr.fx * f, intr.fy * f, intr.cx, intr.cy)
    return intr


def compose_motions(directives, n: int, intrinsics: Intrinsics,
                    width: int, height: int) -> Trajectory:
    """Compose several directives into one trajectory.

    Frame i's extrinsic is the matrix product of each directive's frame-i
    transform taken in list order (left-associative); intrinsic directives
    apply their shifts and factors in the same order. A single-directive
    list reproduces the corresponding primitive exactly.

    Raises:
        EmptyDirectives: on an empty list.
        ValueError: if any directive's frame count disagrees with n.
    """
    directives = tuple(directives)
    if not directives:
        raise EmptyDirectives("no motion directives given")
    for d in directives:
        if d.frames != n:
            raise ValueError(f"directive frame count {d.frames} != {n}")
    if n == 1 and any(d.kind is MotionKind.ROTATE and d.interval != 0.0
                      for d in directives):
        raise ValueError("single-frame trajectory cannot spread a nonzero angle")
    poses = []
    for i in range(n):
        ext = reduce(compose, [_directive_extrinsics(d, i) for d in directives])
        intr = intrinsics
        for d in directives:
            intr = _directive_intrinsics(d, i, intr)
        poses.append(CameraPose(intr, ext))
    return Trajectory(tuple(poses), width, height)


def synthesize(plan: SynthesisPlan) -> Trajectory:
    """Run a full synthesis plan through compose_motions."""
    return compose_motions(plan.directives, plan.frames, plan.intrinsics,
                           plan.width, plan.height)


def scale_intensity(traj: Trajectory, k: float) -> Trajectory:
    """Scale camera centers by k about frame 0's center.

    Rotations, intrinsics, dims, and the convention tag are untouched;
    ``k = 0`` legitimately collapses every center onto frame 0's. Scaling by
    a then b equals scaling once by a*b up to roundoff.
    """
    if not math.isfinite(k):
        raise ValueError(f"scale factor must be finite, got {k}")
    c2w0 = (traj.poses[0].extrinsics
            if traj.convention is Convention.CAMERA_TO_WORLD
            else invert_extrinsics(traj.poses[0].extrinsics))
    c0 = c2w0.translation
    poses = []
    for p in traj.poses:
        e = p.extrinsics
        if traj.convention is Convention.CAMERA_TO_WORLD:
            c = e.translation
            new_c = c0 + k * (c - c0)
            new_e = Extrinsics(e.rotation, new_c, e.convention)
        else:
            c = -e.rotation.T @ e.translation
            new_c = c0 + k * (c - c0)
            new_e = Extrinsics(e.rotation, -e.rotation @ new_c, e.convention)
        poses.append(CameraPose(p.intrinsics, new_e))
    return Trajectory(tuple(poses), traj.width, traj.height)
