"""Frame-to-frame pose association with unique, temporally consistent ids.

Association combines box overlap with a Gaussian keypoint-distance kernel; the
score is pluggable in the sense that everything downstream only consumes the
cost matrix, so a motion- or appearance-based similarity can be dropped in.
Unmatched ids survive a configurable retention window and are then discarded;
ids are never reused within a sequence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import bbox_from_keypoints, iou
from .model import (
    GROUPS,
    JOINTS,
    EvalGroup,
    Pose,
    Sequence,
    joint_group,
)

_METHODS = ("greedy", "hungarian")


class TrackingError(ValueError):
    """A tracking precondition was violated."""


@dataclass(frozen=True, slots=True)
class TrackerConfig:
    """Similarity weights, acceptance threshold, retention and solver choice.

    ``kappa`` is the keypoint-kernel width as a fraction of the box scale:
    a single float applies uniformly, a 15-tuple sets it per joint.
    """

    w_iou: float = 1.0
    w_pose: float = 1.0
    similarity_min: float = 0.3
    retention_window: int = 8
    method: str = "hungarian"
    keypoint_drop_threshold: float = 0.0
    kappa: float | tuple[float, ...] = 0.1

    def __post_init__(self) -> None:
        if self.w_iou < 0.0 or self.w_pose < 0.0 or self.w_iou + self.w_pose <= 0.0:
            raise ValueError("similarity weights must be non-negative with positive sum")
        if not 0.0 <= self.similarity_min <= 1.0:
            raise ValueError(f"similarity_min must be within [0, 1], got {self.similarity_min!r}")
        if self.retention_window < 1:
            raise ValueError(f"retention_window must be >= 1, got {self.retention_window!r}")
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}, got {self.method!r}")
        if not 0.0 <= self.keypoint_drop_threshold <= 1.0:
            raise ValueError("keypoint_drop_threshold must be within [0, 1]")
        if isinstance(self.kappa, (list, tuple)):
            object.__setattr__(self, "kappa", tuple(float(k) for k in self.kappa))
            if len(self.kappa) != len(JOINTS):
                raise ValueError(f"per-joint kappa needs {len(JOINTS)} entries")
            if any(k <= 0.0 for k in self.kappa):
                raise ValueError("kappa entries must be positive")
        elif self.kappa <= 0.0:
            raise ValueError(f"kappa must be positive, got {self.kappa!r}")

    def kappa_for(self, joint) -> float:
        if isinstance(self.kappa, tuple):
            return self.kappa[joint.index]
        return self.kappa


@dataclass(slots=True)
class _Track:
    pose: Pose
    last_frame: int


@dataclass(slots=True)
class TrackerState:
    """Live id table: monotone id counter plus last pose/frame per active id."""

    next_id: int = 0
    active: dict[int, _Track] = field(default_factory=dict)

    def expire(self, frame_index: int, retention_window: int) -> None:
        dead = [
            tid
            for tid, track in self.active.items()
            if frame_index - track.last_frame > retention_window
        ]
        for tid in dead:
            del self.active[tid]

    def fresh_id(self) -> int:
        tid = self.next_id
        self.next_id += 1
        return tid


def prune_keypoints(pose: Pose, threshold: float) -> Pose:
    """Mark keypoints below the confidence threshold as absent; nothing else changes."""
    return replace(
        pose,
        keypoints=tuple(
            replace(kp, present=False) if kp.confidence < threshold else kp
            for kp in pose.keypoints
        ),
    )


def prune_sequence_keypoints(seq: Sequence, threshold: float) -> Sequence:
    return replace(
        seq,
        frames=tuple(
            replace(f, poses=tuple(prune_keypoints(p, threshold) for p in f.poses))
            for f in seq.frames
        ),
    )


@dataclass(frozen=True, slots=True)
class RetentionTable:
    """Percentage of keypoints surviving pruning, per group and overall."""

    per_group: dict[EvalGroup, float]
    total: float


def retention_stats(seqs: list[Sequence], threshold: float) -> RetentionTable:
    """Survival percentages of present keypoints at a confidence threshold.

    A group with no keypoints at all reports the vacuous 100.0; an input with
    no keypoints anywhere is an error.
    """
    before = {g: 0 for g in GROUPS}
    kept = {g: 0 for g in GROUPS}
    for seq in seqs:
        for _, pose in seq.iter_poses():
            for kp in pose.keypoints:
                if not kp.present:
                    continue
                group = joint_group(kp.joint)
                before[group] += 1
                if kp.confidence >= threshold:
                    kept[group] += 1
    total_before = sum(before.values())
    if total_before == 0:
        raise TrackingError("no present keypoints to compute retention over")
    per_group = {
        g: (100.0 * kept[g] / before[g]) if before[g] else 100.0 for g in GROUPS
    }
    total = 100.0 * sum(kept.values()) / total_before
    return RetentionTable(per_group=per_group, total=total)


def _pose_box(pose: Pose):
    return pose.bbox if pose.bbox is not None else bbox_from_keypoints(pose)


def pose_similarity(a: Pose, b: Pose, config: TrackerConfig = TrackerConfig()) -> float:
    """Blend of box IoU and a keypoint-distance kernel, in [0, 1].

    The kernel is exp(-d^2 / (2 (s * kappa)^2)) averaged over joints present in
    both poses, with s the square root of the first pose's box area; the IoU
    and kernel terms are combined with the configured weights.
    """
    box_a = _pose_box(a)
    box_b = _pose_box(b)
    overlap = iou(box_a, box_b)
    common = [
        j
        for j in JOINTS
        if a.keypoints[j.index].present and b.keypoints[j.index].present
    ]
    if common:
        size = math.sqrt(box_a.area)
        total = 0.0
        for j in common:
            ka = a.keypoints[j.index]
            kb = b.keypoints[j.index]
            d2 = (ka.x - kb.x) ** 2 + (ka.y - kb.y) ** 2
            scale = size * config.kappa_for(j)
            denom = 2.0 * scale * scale
            if denom > 0.0:
                total += math.exp(-d2 / denom)
            else:
                total += 1.0 if d2 == 0.0 else 0.0
        kp_sim = total / len(common)
    else:
        kp_sim = 0.0
    return (config.w_iou * overlap + config.w_pose * kp_sim) / (config.w_iou + config.w_pose)


def solve_assignment(cost, method: str = "hungarian") -> list[tuple[int, int]]:
    """Match rows to columns minimizing cost.

    ``hungarian`` returns a minimum-total-cost maximum matching; ``greedy``
    repeatedly takes the globally smallest remaining cost (ties by row, then
    column) and removes its row and column.  Pairs come back sorted by row.
    """
    matrix = np.asarray(cost, dtype=float)
    if matrix.size == 0:
        return []
    if matrix.ndim != 2:
        raise ValueError(f"cost must be 2-D, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("cost matrix contains non-finite entries")
    if method == "hungarian":
        rows, cols = linear_sum_assignment(matrix)
        return sorted(zip(rows.tolist(), cols.tolist()))
    if method == "greedy":
        n, m = matrix.shape
        free_rows = set(range(n))
        free_cols = set(range(m))
        pairs: list[tuple[int, int]] = []
        while free_rows and free_cols:
            best = min(
                ((matrix[r, c], r, c) for r in free_rows for c in free_cols),
                key=lambda t: (t[0], t[1], t[2]),
            )
            _, r, c = best
            pairs.append((r, c))
            free_rows.remove(r)
            free_cols.remove(c)
        return sorted(pairs)
    raise ValueError(f"unknown assignment method {method!r}")


def track_sequence(seq: Sequence, config: TrackerConfig = TrackerConfig()) -> Sequence:
    """Assign track ids across frames.

    The first frame's poses receive fresh ids in input order.  Each later
    frame is matched against the active tracks on cost ``1 - similarity``;
    pairs reaching ``similarity_min`` keep the track's id, everything else
    gets a fresh id.  Tracks unmatched for more than ``retention_window``
    frames (by frame index) are discarded first.
    """
    state = TrackerState()
    frames_out = []
    for frame in seq.frames:
        for pose in frame.poses:
            if pose.track_id is not None:
                raise TrackingError(
                    f"frame {frame.index}: pose already carries track_id {pose.track_id}"
                )
        state.expire(frame.index, config.retention_window)
        track_ids = list(state.active)
        assigned: dict[int, int] = {}
        if track_ids and frame.poses:
            similarity = [
                [
                    pose_similarity(state.active[tid].pose, pose, config)
                    for pose in frame.poses
                ]
                for tid in track_ids
            ]
            cost = 1.0 - np.asarray(similarity)
            for row, col in solve_assignment(cost, config.method):
                if similarity[row][col] >= config.similarity_min:
                    assigned[col] = track_ids[row]
        new_poses = []
        for idx, pose in enumerate(frame.poses):
            tid = assigned.get(idx)
            if tid is None:
                tid = state.fresh_id()
            tracked = replace(pose, track_id=tid)
            state.active[tid] = _Track(pose=tracked, last_frame=frame.index)
            new_poses.append(tracked)
        frames_out.append(replace(frame, poses=tuple(new_poses)))
    return replace(seq, frames=tuple(frames_out))
