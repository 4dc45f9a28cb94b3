"""Shared fixtures and pose-building helpers for the test suite."""
from __future__ import annotations

import time

import pytest
from hypothesis import settings

from topdown.model import BBox, Frame, JOINTS, Joint, Keypoint, Pose, Sequence
from topdown.geometry import bbox_from_keypoints
from topdown import synth

settings.register_profile("suite", deadline=None)
settings.load_profile("suite")

_SESSION_START = time.monotonic()
_SUITE_BUDGET_S = 120.0

_TEMPLATE = synth.load_skeleton_template()


def template_pose(
    center: tuple[float, float],
    scale: float = 100.0,
    confidence: float = 1.0,
    det_score: float = 1.0,
    track_id: int | None = None,
    with_bbox: bool = True,
) -> Pose:
    """Fully present stick-figure pose anchored at ``center``."""
    keypoints = tuple(
        Keypoint(
            joint=j,
            x=center[0] + _TEMPLATE[j][0] * scale,
            y=center[1] + _TEMPLATE[j][1] * scale,
            confidence=confidence,
        )
        for j in JOINTS
    )
    pose = Pose(keypoints=keypoints, det_score=det_score, track_id=track_id)
    if with_bbox:
        from dataclasses import replace

        pose = replace(pose, bbox=bbox_from_keypoints(pose))
    return pose


def points_pose(
    points: dict[Joint, tuple[float, float]],
    confidence: float = 1.0,
    det_score: float = 1.0,
    bbox: BBox | None = None,
    track_id: int | None = None,
    confidences: dict[Joint, float] | None = None,
) -> Pose:
    """Pose with only the given joints present; the rest are absent placeholders."""
    keypoints = []
    for j in JOINTS:
        if j in points:
            conf = confidences.get(j, confidence) if confidences else confidence
            keypoints.append(Keypoint(joint=j, x=points[j][0], y=points[j][1], confidence=conf))
        else:
            keypoints.append(Keypoint(joint=j, x=0.0, y=0.0, confidence=0.0, present=False))
    return Pose(keypoints=tuple(keypoints), det_score=det_score, bbox=bbox, track_id=track_id)


def one_frame_sequence(poses: list[Pose], name: str = "seq", size=(2000, 2000)) -> Sequence:
    return Sequence(
        name=name, frames=(Frame(index=0, width=size[0], height=size[1], poses=tuple(poses)),)
    )


@pytest.fixture(scope="session")
def benchmark_out() -> synth.SynthOutput:
    """The corrupted calibrated benchmark used by sweep-shape checks."""
    return synth.generate(synth.calibrated_benchmark_spec())


@pytest.fixture(scope="session")
def retention_out() -> synth.SynthOutput:
    """Large clean benchmark for retention statistics (>= 10^4 keypoints per group)."""
    spec = synth.calibrated_benchmark_spec(
        n_persons=5, n_frames=800, seed=11, fp_rate=0.0, p_miss=0.0
    )
    return synth.generate(spec)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    elapsed = time.monotonic() - _SESSION_START
    status = "PASS" if elapsed < _SUITE_BUDGET_S else "FAIL"
    terminalreporter.write_line(
        f"ACCEPTANCE criterion 10 [{status}]: "
        f"full suite wall time {elapsed:.1f}s (budget {_SUITE_BUDGET_S:.0f}s)"
    )
