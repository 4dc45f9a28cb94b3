"""End-to-end pipeline: candidate pruning, NMS, fusion, tracking, scoring.

Stages run in order: drop low-likelihood candidates, infer missing boxes,
suppress overlapping boxes, optionally fuse a second model's predictions for
the surviving candidates, assign track ids, prune low-confidence keypoints,
then score single-frame AP and tracking metrics against ground truth.

Threshold sweeps rerun the pipeline per value; rows carry AP/MOTA totals for
the keypoint axis and detection precision/recall for the box axis.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from . import ensemble as ensemble_mod
from .ensemble import Route, default_expert_map, validate_expert_map
from .geometry import (
    DegenerateGeometryError,
    PRResult,
    bbox_from_keypoints,
    detection_pr,
    iou as geometry_iou,
    prune_candidates,
)
from .metrics import ApReport, MotReport, PckhThreshold, evaluate_ap, evaluate_mot
from .model import JOINTS, Frame, Joint, Pose, Sequence
from .tracker import TrackerConfig, prune_sequence_keypoints, track_sequence

log = logging.getLogger(__name__)

SWEEP_AXES = ("bbox_threshold", "keypoint_threshold")


class PipelineContractError(ValueError):
    """Pipeline inputs violate a cross-file contract (alignment, pairing)."""


@dataclass(frozen=True, slots=True)
class PipelineConfig:
    """All thresholds and sub-configurations for one pipeline run."""

    candidate_drop_threshold: float = 0.0
    nms_iou_threshold: float = 0.7
    ensemble_mode: str = "none"
    expert_map: dict[Joint, Route] = field(default_factory=default_expert_map)
    keypoint_drop_threshold: float = 0.0
    bbox_enlarge: float = 0.20
    detection_iou_threshold: float = 0.4
    tracker: TrackerConfig = TrackerConfig()
    pckh: PckhThreshold = PckhThreshold()

    def __post_init__(self) -> None:
        for name in (
            "candidate_drop_threshold",
            "nms_iou_threshold",
            "keypoint_drop_threshold",
            "detection_iou_threshold",
        ):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be within [0, 1], got {value!r}")
        if self.ensemble_mode not in ("none", "average", "expert"):
            raise ValueError(f"unknown ensemble mode {self.ensemble_mode!r}")
        validate_expert_map(self.expert_map)

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "candidate_drop_threshold": self.candidate_drop_threshold,
            "nms_iou_threshold": self.nms_iou_threshold,
            "ensemble_mode": self.ensemble_mode,
            "expert_map": {j.value: r.value for j, r in self.expert_map.items()},
            "keypoint_drop_threshold": self.keypoint_drop_threshold,
            "bbox_enlarge": self.bbox_enlarge,
            "detection_iou_threshold": self.detection_iou_threshold,
            "tracker": {
                "w_iou": self.tracker.w_iou,
                "w_pose": self.tracker.w_pose,
                "similarity_min": self.tracker.similarity_min,
                "retention_window": self.tracker.retention_window,
                "method": self.tracker.method,
                "keypoint_drop_threshold": self.tracker.keypoint_drop_threshold,
                "kappa": self.tracker.kappa,
            },
            "pckh": {
                "factor": self.pckh.factor,
                "min_head_size": self.pckh.min_head_size,
                "bbox_diag_fraction": self.pckh.bbox_diag_fraction,
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        doc = dict(doc)
        schema = doc.pop("schema", 1)
        if schema != 1:
            raise ValueError(f"unsupported config schema {schema!r}")
        doc.pop("synth", None)  # generator section, consumed by the synth command
        try:
            if "expert_map" in doc:
                by_name = {j.value: j for j in JOINTS}
                doc["expert_map"] = {
                    by_name[name]: Route(route) for name, route in doc["expert_map"].items()
                }
            if "tracker" in doc:
                doc["tracker"] = TrackerConfig(**doc["tracker"])
            if "pckh" in doc:
                doc["pckh"] = PckhThreshold(**doc["pckh"])
            return cls(**doc)
        except (TypeError, KeyError) as exc:
            raise ValueError(f"bad pipeline config: {exc}") from exc


@dataclass(frozen=True, slots=True)
class PipelineResult:
    tracked: tuple[Sequence, ...]
    ap: ApReport
    mot: MotReport


def _with_box(pose: Pose, enlarge: float) -> Pose | None:
    if pose.bbox is not None:
        return pose
    try:
        return replace(pose, bbox=bbox_from_keypoints(pose, enlarge))
    except DegenerateGeometryError:
        return None


def _detect_frame(
    frame: Frame, b_frame: Frame | None, config: PipelineConfig
) -> tuple[Pose, ...]:
    """Candidate pruning, box inference and NMS for one frame, plus fusion."""
    if b_frame is not None and len(b_frame.poses) != len(frame.poses):
        raise PipelineContractError(
            f"frame {frame.index}: second model has {len(b_frame.poses)} poses, "
            f"expected {len(frame.poses)}"
        )
    survivors: list[tuple[int, Pose]] = []
    for i, pose in enumerate(frame.poses):
        if pose.det_score < config.candidate_drop_threshold:
            continue
        boxed = _with_box(pose, config.bbox_enlarge)
        if boxed is None:
            log.warning("frame %d: dropping pose %d with no inferable box", frame.index, i)
            continue
        survivors.append((i, boxed))
    # greedy NMS replayed over (original index, pose) pairs so the surviving
    # indices can select the matching poses of a second model; identical to
    # geometry.nms_boxes on the survivor list
    order = sorted(
        range(len(survivors)), key=lambda k: (-survivors[k][1].det_score, survivors[k][0])
    )
    selected: list[tuple[int, Pose]] = []
    for k in order:
        i, pose = survivors[k]
        if all(
            geometry_iou(pose.bbox, other.bbox) <= config.nms_iou_threshold
            for _, other in selected
        ):
            selected.append((i, pose))
    if b_frame is None or config.ensemble_mode == "none":
        return tuple(p for _, p in selected)
    fused = []
    for i, pose in selected:
        other = _with_box(b_frame.poses[i], config.bbox_enlarge)
        if other is None:
            log.warning("frame %d: second model pose %d has no box; using first model", frame.index, i)
            fused.append(pose)
        elif config.ensemble_mode == "average":
            fused.append(ensemble_mod.fuse_average(pose, other))
        else:
            fused.append(ensemble_mod.fuse_expert(pose, other, config.expert_map))
    return tuple(fused)


def _pair_by_name(
    seqs: list[Sequence], others: list[Sequence] | None, what: str
) -> list[tuple[Sequence, Sequence | None]]:
    if others is None:
        return [(s, None) for s in seqs]
    if len(others) != len(seqs):
        raise PipelineContractError(
            f"{what}: got {len(others)} sequences, expected {len(seqs)}"
        )
    by_name = {s.name: s for s in others}
    pairs = []
    for seq in seqs:
        if seq.name not in by_name:
            raise PipelineContractError(f"{what}: no sequence named {seq.name!r}")
        pairs.append((seq, by_name[seq.name]))
    return pairs


def run_pipeline(
    det_seqs: list[Sequence],
    gt_seqs: list[Sequence],
    config: PipelineConfig = PipelineConfig(),
    det_b_seqs: list[Sequence] | None = None,
) -> PipelineResult:
    """Run detection post-processing, tracking and scoring end to end."""
    if det_b_seqs is not None and config.ensemble_mode == "none":
        raise PipelineContractError(
            "second model predictions supplied but ensemble_mode is 'none'"
        )
    if det_b_seqs is None and config.ensemble_mode != "none":
        log.warning("ensemble_mode %s configured without second model predictions", config.ensemble_mode)
    tracked = []
    for det, det_b in _pair_by_name(det_seqs, det_b_seqs, "second model predictions"):
        if det_b is not None and tuple(f.index for f in det_b.frames) != tuple(
            f.index for f in det.frames
        ):
            raise PipelineContractError(
                f"sequence {det.name!r}: second model frame indices do not align"
            )
        frames = []
        for fi, frame in enumerate(det.frames):
            b_frame = det_b.frames[fi] if det_b is not None else None
            frames.append(replace(frame, poses=_detect_frame(frame, b_frame, config)))
        processed = replace(det, frames=tuple(frames))
        tracked_seq = track_sequence(processed, config.tracker)
        tracked.append(
            prune_sequence_keypoints(tracked_seq, config.keypoint_drop_threshold)
        )
    ap = evaluate_ap(tracked, gt_seqs, config.pckh)
    mot = evaluate_mot(tracked, gt_seqs, config.pckh)
    return PipelineResult(tracked=tuple(tracked), ap=ap, mot=mot)


def detection_pr_at(
    det_seqs: list[Sequence],
    gt_seqs: list[Sequence],
    threshold: float,
    config: PipelineConfig = PipelineConfig(),
) -> PRResult:
    """Frame-wise detection precision/recall with candidates pruned at ``threshold``.

    Boxes come from the poses themselves (inferred from keypoints when
    absent); counts are summed over all frames of all aligned sequences.
    """
    tp = fp = fn = 0
    for det, gt in _pair_by_name(det_seqs, gt_seqs, "ground truth"):
        assert gt is not None
        for det_frame, gt_frame in zip(det.frames, gt.frames):
            det_boxes = [
                p.bbox
                for p in (
                    _with_box(q, config.bbox_enlarge)
                    for q in prune_candidates(list(det_frame.poses), threshold)
                )
                if p is not None
            ]
            gt_boxes = [
                p.bbox
                for p in (_with_box(q, config.bbox_enlarge) for q in gt_frame.poses)
                if p is not None
            ]
            result = detection_pr(det_boxes, gt_boxes, config.detection_iou_threshold)
            tp += result.tp
            fp += result.fp
            fn += result.fn
    return PRResult(tp=tp, fp=fp, fn=fn)


@dataclass(frozen=True, slots=True)
class SweepRow:
    """One sweep point; exactly one of the metric pairs is populated."""

    value: float
    ap_total: float | None = None
    mota_total: float | None = None
    precision: float | None = None
    recall: float | None = None

    def to_dict(self) -> dict:
        out: dict = {"value": self.value}
        for name in ("ap_total", "mota_total", "precision", "recall"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        return out


def _keypoint_sweep_point(args) -> SweepRow:
    det_seqs, gt_seqs, config, value = args
    result = run_pipeline(det_seqs, gt_seqs, replace(config, keypoint_drop_threshold=value))
    return SweepRow(value=value, ap_total=result.ap.total, mota_total=result.mot.mota_total)


def _bbox_sweep_point(args) -> SweepRow:
    det_seqs, gt_seqs, config, value = args
    pr = detection_pr_at(det_seqs, gt_seqs, value, config)
    return SweepRow(value=value, precision=100.0 * pr.precision, recall=100.0 * pr.recall)


def sweep(
    det_seqs: list[Sequence],
    gt_seqs: list[Sequence],
    config: PipelineConfig,
    axis: str,
    values: list[float],
    jobs: int = 1,
) -> list[SweepRow]:
    """Rerun the pipeline per threshold value along one axis.

    Points are independent, so they may run in parallel; rows always come
    back in the order the values were given.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    if len(values) < 2:
        raise ValueError(f"need at least 2 sweep values, got {len(values)}")
    point = _keypoint_sweep_point if axis == "keypoint_threshold" else _bbox_sweep_point
    payloads = [(det_seqs, gt_seqs, config, v) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(point, payloads))
    return [point(p) for p in payloads]


def sweep_csv(axis: str, rows: list[SweepRow]) -> str:
    if axis == "keypoint_threshold":
        lines = ["threshold,AP,MOTA"]
        lines += [f"{r.value:.4f},{r.ap_total:.4f},{r.mota_total:.4f}" for r in rows]
    else:
        lines = ["threshold,precision,recall"]
        lines += [f"{r.value:.4f},{r.precision:.4f},{r.recall:.4f}" for r in rows]
    return "\n".join(lines) + "\n"
