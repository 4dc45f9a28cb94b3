"""Core domain types for multi-person pose sequences plus JSON (de)serialization.

The document schema handled by :func:`load_sequence` / :func:`save_predictions`::

    {
      "name": str,
      "frames": [
        {
          "index": int,              # strictly increasing within a sequence
          "width": int, "height": int,
          "poses": [
            {
              "det_score": float,              # [0, 1]
              "track_id": int | null,          # non-negative, set after tracking
              "bbox": [x1, y1, x2, y2] | null,
              "keypoints": [                   # exactly one entry per joint
                {"joint": str, "x": float, "y": float,
                 "confidence": float, "present": bool}
              ]
            }
          ]
        }
      ]
    }

Boxes are stored as bare corner coordinates; a box score is not part of the
document and is reconstituted from the owning pose's ``det_score`` on load.
Unannotated or pruned keypoints are carried with ``present: false`` so the
15 joint slots keep stable indices.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Iterator


class Joint(enum.Enum):
    """The 15 tracked body landmarks, in canonical slot order."""

    NOSE = "nose"
    HEAD_BOTTOM = "head_bottom"
    HEAD_TOP = "head_top"
    LEFT_SHOULDER = "left_shoulder"
    RIGHT_SHOULDER = "right_shoulder"
    LEFT_ELBOW = "left_elbow"
    RIGHT_ELBOW = "right_elbow"
    LEFT_WRIST = "left_wrist"
    RIGHT_WRIST = "right_wrist"
    LEFT_HIP = "left_hip"
    RIGHT_HIP = "right_hip"
    LEFT_KNEE = "left_knee"
    RIGHT_KNEE = "right_knee"
    LEFT_ANKLE = "left_ankle"
    RIGHT_ANKLE = "right_ankle"

    @property
    def index(self) -> int:
        return _JOINT_INDEX[self]


JOINTS: tuple[Joint, ...] = tuple(Joint)
JOINT_NAMES: tuple[str, ...] = tuple(j.value for j in JOINTS)
_JOINT_INDEX = {j: i for i, j in enumerate(JOINTS)}
_JOINT_BY_NAME = {j.value: j for j in JOINTS}


class EvalGroup(enum.Enum):
    """Scoring groups; values are the column labels used in reports."""

    HEAD = "Head"
    SHOULDER = "Shou"
    ELBOW = "Elb"
    WRIST = "Wri"
    HIP = "Hip"
    KNEE = "Knee"
    ANKLE = "Ankl"


GROUPS: tuple[EvalGroup, ...] = tuple(EvalGroup)

_GROUP_OF: dict[Joint, EvalGroup] = {
    Joint.NOSE: EvalGroup.HEAD,
    Joint.HEAD_BOTTOM: EvalGroup.HEAD,
    Joint.HEAD_TOP: EvalGroup.HEAD,
    Joint.LEFT_SHOULDER: EvalGroup.SHOULDER,
    Joint.RIGHT_SHOULDER: EvalGroup.SHOULDER,
    Joint.LEFT_ELBOW: EvalGroup.ELBOW,
    Joint.RIGHT_ELBOW: EvalGroup.ELBOW,
    Joint.LEFT_WRIST: EvalGroup.WRIST,
    Joint.RIGHT_WRIST: EvalGroup.WRIST,
    Joint.LEFT_HIP: EvalGroup.HIP,
    Joint.RIGHT_HIP: EvalGroup.HIP,
    Joint.LEFT_KNEE: EvalGroup.KNEE,
    Joint.RIGHT_KNEE: EvalGroup.KNEE,
    Joint.LEFT_ANKLE: EvalGroup.ANKLE,
    Joint.RIGHT_ANKLE: EvalGroup.ANKLE,
}


def joint_group(joint: Joint) -> EvalGroup:
    """Scoring group a joint belongs to; total and deterministic."""
    return _GROUP_OF[joint]


def group_joints(group: EvalGroup) -> tuple[Joint, ...]:
    """All joints mapped to ``group``, in canonical order."""
    return tuple(j for j in JOINTS if _GROUP_OF[j] is group)


class SequenceError(ValueError):
    """A sequence document violates the schema; the message names the path."""


def _require_finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise ValueError(f"{what} must be finite, got {value!r}")
    return value


@dataclass(frozen=True, slots=True)
class BBox:
    """Axis-aligned box in pixel coordinates with a detection score."""

    x1: float
    y1: float
    x2: float
    y2: float
    score: float = 0.0

    def __post_init__(self) -> None:
        for name in ("x1", "y1", "x2", "y2", "score"):
            _require_finite(getattr(self, name), f"BBox.{name}")
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise ValueError(f"BBox corners out of order: {self}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))


@dataclass(frozen=True, slots=True)
class Keypoint:
    """One joint observation: pixel position, confidence and presence flag."""

    joint: Joint
    x: float
    y: float
    confidence: float
    present: bool = True

    def __post_init__(self) -> None:
        _require_finite(self.x, f"{self.joint.value}.x")
        _require_finite(self.y, f"{self.joint.value}.y")
        _require_finite(self.confidence, f"{self.joint.value}.confidence")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(
                f"{self.joint.value}.confidence must be within [0, 1], "
                f"got {self.confidence!r}"
            )


@dataclass(frozen=True, slots=True)
class Pose:
    """A human candidate: one keypoint slot per joint plus detection metadata."""

    keypoints: tuple[Keypoint, ...]
    det_score: float = 1.0
    bbox: BBox | None = None
    track_id: int | None = None

    def __post_init__(self) -> None:
        if len(self.keypoints) != len(JOINTS):
            raise ValueError(f"expected {len(JOINTS)} keypoints, got {len(self.keypoints)}")
        for slot, kp in zip(JOINTS, self.keypoints):
            if kp.joint is not slot:
                raise ValueError(f"keypoint slot {slot.value} holds {kp.joint.value}")
        _require_finite(self.det_score, "Pose.det_score")
        if not 0.0 <= self.det_score <= 1.0:
            raise ValueError(f"Pose.det_score must be within [0, 1], got {self.det_score!r}")
        if self.track_id is not None and self.track_id < 0:
            raise ValueError(f"Pose.track_id must be non-negative, got {self.track_id!r}")

    def keypoint(self, joint: Joint) -> Keypoint:
        return self.keypoints[joint.index]

    def present_joints(self) -> tuple[Joint, ...]:
        return tuple(kp.joint for kp in self.keypoints if kp.present)


@dataclass(frozen=True, slots=True)
class Frame:
    """All poses observed at one frame index."""

    index: int
    width: int
    height: int
    poses: tuple[Pose, ...] = ()

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"Frame.index must be non-negative, got {self.index!r}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"Frame size must be positive, got {self.width}x{self.height}")


@dataclass(frozen=True, slots=True)
class Sequence:
    """A named, ordered run of frames sharing one image size."""

    name: str
    frames: tuple[Frame, ...] = ()

    def __post_init__(self) -> None:
        previous = -1
        for frame in self.frames:
            if frame.index <= previous:
                raise ValueError(
                    f"frame indices must be strictly increasing, "
                    f"got {frame.index} after {previous}"
                )
            previous = frame.index
        sizes = {(f.width, f.height) for f in self.frames}
        if len(sizes) > 1:
            raise ValueError(f"frames disagree on image size: {sorted(sizes)}")

    def iter_poses(self) -> Iterator[tuple[Frame, Pose]]:
        for frame in self.frames:
            for pose in frame.poses:
                yield frame, pose


def strip_track_ids(seq: Sequence) -> Sequence:
    """Copy of ``seq`` with every pose's track id cleared."""
    return replace(
        seq,
        frames=tuple(
            replace(f, poses=tuple(replace(p, track_id=None) for p in f.poses))
            for f in seq.frames
        ),
    )


# ---------------------------------------------------------------------------
# document parsing


def _as_mapping(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise SequenceError(f"{path}: expected object, got {type(value).__name__}")
    return value


def _as_list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise SequenceError(f"{path}: expected array, got {type(value).__name__}")
    return value


def _get(doc: dict, key: str, path: str) -> Any:
    if key not in doc:
        raise SequenceError(f"{path}.{key}: missing field")
    return doc[key]


def _as_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SequenceError(f"{path}: expected integer, got {value!r}")
    return value


def _as_float(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SequenceError(f"{path}: expected number, got {value!r}")
    out = float(value)
    if not math.isfinite(out):
        raise SequenceError(f"{path}: must be finite, got {value!r}")
    return out


def _as_bool(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        raise SequenceError(f"{path}: expected boolean, got {value!r}")
    return value


def _parse_keypoints(items: Any, path: str) -> tuple[Keypoint, ...]:
    entries = _as_list(items, path)
    if len(entries) != len(JOINTS):
        raise SequenceError(f"{path}: expected {len(JOINTS)} keypoints, got {len(entries)}")
    slots: dict[Joint, Keypoint] = {}
    for k, raw in enumerate(entries):
        kp_path = f"{path}[{k}]"
        obj = _as_mapping(raw, kp_path)
        name = _get(obj, "joint", kp_path)
        joint = _JOINT_BY_NAME.get(name)
        if joint is None:
            raise SequenceError(f"{kp_path}.joint: unknown joint {name!r}")
        if joint in slots:
            raise SequenceError(f"{kp_path}.joint: duplicate joint {name!r}")
        confidence = _as_float(_get(obj, "confidence", kp_path), f"{kp_path}.confidence")
        if not 0.0 <= confidence <= 1.0:
            raise SequenceError(
                f"{kp_path}.confidence: must be within [0, 1], got {confidence!r}"
            )
        slots[joint] = Keypoint(
            joint=joint,
            x=_as_float(_get(obj, "x", kp_path), f"{kp_path}.x"),
            y=_as_float(_get(obj, "y", kp_path), f"{kp_path}.y"),
            confidence=confidence,
            present=_as_bool(_get(obj, "present", kp_path), f"{kp_path}.present"),
        )
    return tuple(slots[j] for j in JOINTS)


def _parse_pose(raw: Any, path: str) -> Pose:
    obj = _as_mapping(raw, path)
    det_score = _as_float(_get(obj, "det_score", path), f"{path}.det_score")
    if not 0.0 <= det_score <= 1.0:
        raise SequenceError(f"{path}.det_score: must be within [0, 1], got {det_score!r}")
    track_id = _get(obj, "track_id", path)
    if track_id is not None:
        track_id = _as_int(track_id, f"{path}.track_id")
        if track_id < 0:
            raise SequenceError(f"{path}.track_id: must be non-negative, got {track_id}")
    raw_bbox = _get(obj, "bbox", path)
    bbox = None
    if raw_bbox is not None:
        coords = _as_list(raw_bbox, f"{path}.bbox")
        if len(coords) != 4:
            raise SequenceError(f"{path}.bbox: expected 4 coordinates, got {len(coords)}")
        x1, y1, x2, y2 = (
            _as_float(v, f"{path}.bbox[{i}]") for i, v in enumerate(coords)
        )
        if x2 < x1 or y2 < y1:
            raise SequenceError(f"{path}.bbox: corners out of order")
        bbox = BBox(x1, y1, x2, y2, score=det_score)
    keypoints = _parse_keypoints(_get(obj, "keypoints", path), f"{path}.keypoints")
    return Pose(keypoints=keypoints, det_score=det_score, bbox=bbox, track_id=track_id)


def sequence_from_dict(doc: Any, path: str = "$") -> Sequence:
    """Validate a decoded document and build a :class:`Sequence`."""
    obj = _as_mapping(doc, path)
    name = _get(obj, "name", path)
    if not isinstance(name, str):
        raise SequenceError(f"{path}.name: expected string, got {name!r}")
    frames: list[Frame] = []
    previous_index = -1
    size: tuple[int, int] | None = None
    for i, raw_frame in enumerate(_as_list(_get(obj, "frames", path), f"{path}.frames")):
        frame_path = f"{path}.frames[{i}]"
        frame_obj = _as_mapping(raw_frame, frame_path)
        index = _as_int(_get(frame_obj, "index", frame_path), f"{frame_path}.index")
        if index <= previous_index:
            raise SequenceError(
                f"{frame_path}.index: must be strictly greater than previous "
                f"({index} after {previous_index})"
            )
        previous_index = index
        width = _as_int(_get(frame_obj, "width", frame_path), f"{frame_path}.width")
        height = _as_int(_get(frame_obj, "height", frame_path), f"{frame_path}.height")
        if width <= 0 or height <= 0:
            raise SequenceError(f"{frame_path}: image size must be positive")
        if size is None:
            size = (width, height)
        elif (width, height) != size:
            raise SequenceError(
                f"{frame_path}: image size {width}x{height} differs from {size[0]}x{size[1]}"
            )
        poses = tuple(
            _parse_pose(raw_pose, f"{frame_path}.poses[{j}]")
            for j, raw_pose in enumerate(
                _as_list(_get(frame_obj, "poses", frame_path), f"{frame_path}.poses")
            )
        )
        frames.append(Frame(index=index, width=width, height=height, poses=poses))
    return Sequence(name=name, frames=tuple(frames))


def load_sequence(text: str) -> Sequence:
    """Parse and validate a sequence document; raise :class:`SequenceError` otherwise."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SequenceError(f"$: not valid JSON ({exc})") from exc
    return sequence_from_dict(doc)


def sequence_to_dict(seq: Sequence) -> dict:
    """Schema-conformant plain-data view of ``seq``."""
    return {
        "name": seq.name,
        "frames": [
            {
                "index": frame.index,
                "width": frame.width,
                "height": frame.height,
                "poses": [
                    {
                        "det_score": pose.det_score,
                        "track_id": pose.track_id,
                        "bbox": (
                            None
                            if pose.bbox is None
                            else [pose.bbox.x1, pose.bbox.y1, pose.bbox.x2, pose.bbox.y2]
                        ),
                        "keypoints": [
                            {
                                "joint": kp.joint.value,
                                "x": kp.x,
                                "y": kp.y,
                                "confidence": kp.confidence,
                                "present": kp.present,
                            }
                            for kp in pose.keypoints
                        ],
                    }
                    for pose in frame.poses
                ],
            }
            for frame in seq.frames
        ],
    }


def save_predictions(seq: Sequence) -> str:
    """Serialize ``seq`` to the sequence document format."""
    return json.dumps(sequence_to_dict(seq), indent=2)
