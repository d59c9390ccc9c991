"""Reading and writing camera pose data.

Two text formats live here:

* the 19-field whitespace-separated pose-list format (one URL line, then one
  line per frame: timestamp, normalized intrinsics, two zero distortion
  coefficients, and a row-major 3x4 world-to-camera matrix);
* JSON documents for full trajectories and for synthesis plans.

Parsing is strict and every failure carries a 1-based line number or a
/-separated JSON path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    FieldCountError,
    IndexOutOfRange,
    IntrinsicsInvalid,
    NonMonotonicTimestamp,
    NonPositiveScale,
    NonUnitAxis,
    NonUnitDirection,
    NonZeroDistortion,
    NumericError,
    RotationInvalid,
    SchemaError,
)
from .geometry import (
    CameraPose,
    Convention,
    Extrinsics,
    Intrinsics,
    Trajectory,
    check_rotation,
)
from .synth import MotionDirective, MotionKind, SynthesisPlan

POSE_FIELDS = 19


@dataclass(frozen=True)
class PoseRecord:
    """One data line: timestamp in microseconds, normalized intrinsics,
    and a row-major 3x4 world-to-camera matrix."""

    timestamp: int
    fx_n: float
    fy_n: float
    cx_n: float
    cy_n: float
    w2c: np.ndarray  # (3, 4), read-only

    def w2c_extrinsics(self) -> Extrinsics:
        return Extrinsics(self.w2c[:, :3], self.w2c[:, 3], Convention.WORLD_TO_CAMERA)


@dataclass(frozen=True)
class PoseFile:
    url: str
    records: tuple[PoseRecord, ...]


def _parse_record(line_no: int, fields: list[str]) -> PoseRecord:
    if len(fields) != POSE_FIELDS:
        raise FieldCountError(line_no, len(fields))
    try:
        timestamp = int(fields[0])
    except ValueError:
        raise NumericError(line_no, 1, fields[0]) from None
    values = []
    for col, text in enumerate(fields[1:], start=2):
        try:
            v = float(text)
        except ValueError:
            raise NumericError(line_no, col, text) from None
        if not np.isfinite(v):
            raise NumericError(line_no, col, text)
        values.append(v)
    fx_n, fy_n, cx_n, cy_n, k1, k2 = values[:6]
    if k1 != 0.0 or k2 != 0.0:
        raise NonZeroDistortion(line_no, k1, k2)
    if fx_n <= 0 or fy_n <= 0:
        raise IntrinsicsInvalid(f"normalized focals must be positive, got {fx_n} {fy_n}", line_no)
    if not (0.0 <= cx_n <= 1.0 and 0.0 <= cy_n <= 1.0):
        raise IntrinsicsInvalid(
            f"normalized principal point must lie in [0,1], got {cx_n} {cy_n}", line_no)
    w2c = np.array(values[6:], dtype=np.float64).reshape(3, 4)
    check_rotation(w2c[:, :3], line=line_no)
    w2c.setflags(write=False)
    return PoseRecord(timestamp, fx_n, fy_n, cx_n, cy_n, w2c)


def parse_pose_file(data: bytes | str) -> PoseFile:
    """Parse the pose-list text format.

    Line 1 is an opaque URL. Each following non-empty line must hold exactly
    19 whitespace-separated fields; timestamps must strictly increase.

    Raises:
        FieldCountError, NumericError, NonZeroDistortion, IntrinsicsInvalid,
        RotationInvalid, NonMonotonicTimestamp: all carrying the offending
        1-based line number.
        ValueError: on an empty document (no URL line).
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    lines = text.split("\n")
    if not lines or lines[0].strip() == "" and len(lines) == 1:
        raise ValueError("empty pose file: missing URL line")
    url = lines[0].strip()
    records: list[PoseRecord] = []
    prev_ts: int | None = None
    for line_no, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        rec = _parse_record(line_no, raw.split())
        if prev_ts is not None and rec.timestamp <= prev_ts:
            raise NonMonotonicTimestamp(line_no, rec.timestamp, prev_ts)
        prev_ts = rec.timestamp
        records.append(rec)
    return PoseFile(url, tuple(records))


def serialize_pose_file(pf: PoseFile) -> str:
    """Render a PoseFile back to text.

    Floats use 17 significant digits, which reparses to the same float64
    exactly; fields are single-space separated, lines newline-terminated.
    """
    out = [pf.url]
    for r in pf.records:
        nums = [r.fx_n, r.fy_n, r.cx_n, r.cy_n, 0.0, 0.0, *r.w2c.reshape(-1)]
        out.append(" ".join([str(r.timestamp)] + [f"{v:.17g}" for v in nums]))
    return "\n".join(out) + "\n"


def to_trajectory(pf: PoseFile, width: int, height: int,
                  frame_indices) -> Trajectory:
    """Select records by index and denormalize intrinsics to pixels.

    fx and cx scale by width, fy and cy by height. Indices must be in range
    and the selection non-empty; order is taken as given.

    Raises:
        IndexOutOfRange: on an empty selection or an out-of-range index.
    """
    indices = list(frame_indices)
    if not indices:
        raise IndexOutOfRange("frame selection is empty")
    poses = []
    for i in indices:
        if not 0 <= i < len(pf.records):
            raise IndexOutOfRange(
                f"index {i} out of range for {len(pf.records)} records")
        r = pf.records[i]
        intr = Intrinsics(fx=r.fx_n * width, fy=r.fy_n * height,
                          cx=r.cx_n * width, cy=r.cy_n * height)
        poses.append(CameraPose(intr, r.w2c_extrinsics()))
    return Trajectory(tuple(poses), width, height)


# --- trajectory JSON --------------------------------------------------------

_CONVENTION_NAMES = {
    "w2c": Convention.WORLD_TO_CAMERA,
    "c2w": Convention.CAMERA_TO_WORLD,
}


def trajectory_to_json(traj: Trajectory) -> str:
    """Serialize a trajectory to the canonical JSON interchange form."""
    doc = {
        "convention": traj.convention.value,
        "width": traj.width,
        "height": traj.height,
        "poses": [
            {
                "fx": p.intrinsics.fx, "fy": p.intrinsics.fy,
                "cx": p.intrinsics.cx, "cy": p.intrinsics.cy,
                "R": [float(v) for v in p.extrinsics.rotation.reshape(-1)],
                "t": [float(v) for v in p.extrinsics.translation],
            }
            for p in traj.poses
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise SchemaError(f"{path}/{key}", "required key missing")
    return obj[key]


def _as_number(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(path, f"expected a number, got {type(v).__name__}")
    return float(v)


def _as_int(v, path: str, minimum: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(path, f"expected an integer, got {type(v).__name__}")
    if minimum is not None and v < minimum:
        raise SchemaError(path, f"must be >= {minimum}, got {v}")
    return v


def _as_vector(v, n: int, path: str) -> list[float]:
    if not isinstance(v, list) or len(v) != n:
        raise SchemaError(path, f"expected a list of {n} numbers")
    return [_as_number(x, f"{path}/{i}") for i, x in enumerate(v)]


def trajectory_from_json(text: str) -> Trajectory:
    """Parse the canonical trajectory JSON form.

    Raises:
        SchemaError: with a /-separated path on any structural problem,
        including rotation blocks that fail the orthonormality check.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError("/", f"invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise SchemaError("/", "top level must be an object")
    conv_name = _require(doc, "convention", "")
    if conv_name not in _CONVENTION_NAMES:
        raise SchemaError("/convention", f"must be one of {sorted(_CONVENTION_NAMES)}")
    conv = _CONVENTION_NAMES[conv_name]
    width = _as_int(_require(doc, "width", ""), "/width", minimum=1)
    height = _as_int(_require(doc, "height", ""), "/height", minimum=1)
    raw_poses = _require(doc, "poses", "")
    if not isinstance(raw_poses, list) or not raw_poses:
        raise SchemaError("/poses", "expected a non-empty list")
    poses = []
    for i, rp in enumerate(raw_poses):
        path = f"/poses/{i}"
        if not isinstance(rp, dict):
            raise SchemaError(path, "expected an object")
        try:
            intr = Intrinsics(
                fx=_as_number(_require(rp, "fx", path), f"{path}/fx"),
                fy=_as_number(_require(rp, "fy", path), f"{path}/fy"),
                cx=_as_number(_require(rp, "cx", path), f"{path}/cx"),
                cy=_as_number(_require(rp, "cy", path), f"{path}/cy"),
            )
        except ValueError as e:
            raise SchemaError(path, str(e)) from None
        r = np.array(_as_vector(_require(rp, "R", path), 9, f"{path}/R")).reshape(3, 3)
        t = np.array(_as_vector(_require(rp, "t", path), 3, f"{path}/t"))
        try:
            ext = Extrinsics(r, t, conv)
        except (RotationInvalid, ValueError) as e:
            raise SchemaError(f"{path}/R", str(e)) from None
        poses.append(CameraPose(intr, ext))
    return Trajectory(tuple(poses), width, height)


# --- synthesis plan JSON ----------------------------------------------------

_MOTION_KINDS = {
    "pan": MotionKind.PAN,
    "zoom": MotionKind.ZOOM,
    "rotate": MotionKind.ROTATE,
    "principal_shift": MotionKind.PRINCIPAL_SHIFT,
    "focal_zoom": MotionKind.FOCAL_ZOOM,
}


def _parse_motion(rm, path: str, frames: int) -> MotionDirective:
    try:
        return _parse_motion_inner(rm, path, frames)
    except (NonUnitDirection, NonUnitAxis, NonPositiveScale, ValueError) as e:
        raise SchemaError(path, str(e)) from None


def _parse_motion_inner(rm, path: str, frames: int) -> MotionDirective:
    if not isinstance(rm, dict):
        raise SchemaError(path, "expected an object")
    kind_name = _require(rm, "kind", path)
    if kind_name not in _MOTION_KINDS:
        raise SchemaError(f"{path}/kind", f"must be one of {sorted(_MOTION_KINDS)}")
    kind = _MOTION_KINDS[kind_name]
    if kind is MotionKind.PAN:
        direction = _as_vector(_require(rm, "direction", path), 3, f"{path}/direction")
        interval = _as_number(_require(rm, "interval", path), f"{path}/interval")
        return MotionDirective(kind=kind, frames=frames,
                               direction=tuple(direction), interval=interval)
    if kind is MotionKind.ZOOM:
        interval = _as_number(_require(rm, "interval", path), f"{path}/interval")
        return MotionDirective(kind=kind, frames=frames, interval=interval)
    if kind is MotionKind.ROTATE:
        axis = _as_vector(_require(rm, "axis", path), 3, f"{path}/axis")
        degrees = _as_number(_require(rm, "degrees", path), f"{path}/degrees")
        return MotionDirective(kind=kind, frames=frames,
                               direction=tuple(axis), interval=degrees)
    if kind is MotionKind.PRINCIPAL_SHIFT:
        per_frame = _as_vector(_require(rm, "per_frame", path), 2, f"{path}/per_frame")
        return MotionDirective(kind=kind, frames=frames, shift=tuple(per_frame))
    # FOCAL_ZOOM
    scale = _as_number(_require(rm, "scale", path), f"{path}/scale")
    return MotionDirective(kind=kind, frames=frames, interval=scale)


def parse_trajectory_spec(text: str) -> SynthesisPlan:
    """Parse a synthesis-plan JSON document.

    The document carries frames/width/height/intrinsics plus either a single
    "motion" object or a "motions" list to be composed in order.

    Raises:
        SchemaError: with a /-separated path on any structural problem.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError("/", f"invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise SchemaError("/", "top level must be an object")
    frames = _as_int(_require(doc, "frames", ""), "/frames", minimum=1)
    width = _as_int(_require(doc, "width", ""), "/width", minimum=1)
    height = _as_int(_require(doc, "height", ""), "/height", minimum=1)
    raw_intr = _require(doc, "intrinsics", "")
    if not isinstance(raw_intr, dict):
        raise SchemaError("/intrinsics", "expected an object")
    try:
        intr = Intrinsics(
            fx=_as_number(_require(raw_intr, "fx", "/intrinsics"), "/intrinsics/fx"),
            fy=_as_number(_require(raw_intr, "fy", "/intrinsics"), "/intrinsics/fy"),
            cx=_as_number(_require(raw_intr, "cx", "/intrinsics"), "/intrinsics/cx"),
            cy=_as_number(_require(raw_intr, "cy", "/intrinsics"), "/intrinsics/cy"),
        )
    except ValueError as e:
        raise SchemaError("/intrinsics", str(e)) from None
    if "motion" in doc and "motions" in doc:
        raise SchemaError("/", "give either 'motion' or 'motions', not both")
    if "motion" in doc:
        directives = (_parse_motion(doc["motion"], "/motion", frames),)
    elif "motions" in doc:
        raw = doc["motions"]
        if not isinstance(raw, list) or not raw:
            raise SchemaError("/motions", "expected a non-empty list")
        directives = tuple(_parse_motion(m, f"/motions/{i}", frames)
                           for i, m in enumerate(raw))
    else:
        raise SchemaError("/", "missing 'motion' or 'motions'")
    return SynthesisPlan(frames=frames, width=width, height=height,
                         intrinsics=intr, directives=directives)
