"""Pruning, retention stats, similarity, assignment solvers and id assignment."""
from __future__ import annotations

import itertools
import random
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import points_pose, template_pose
from topdown.metrics import evaluate_mot
from topdown.model import Frame, JOINTS, Joint, Keypoint, Pose, Sequence
from topdown.tracker import (
    RetentionTable,
    TrackerConfig,
    TrackingError,
    pose_similarity,
    prune_keypoints,
    retention_stats,
    solve_assignment,
    track_sequence,
)


def _pose_with_confidences(confs: list[float]) -> Pose:
    points = {j: (10.0 * i, 5.0 * i) for i, j in enumerate(JOINTS[: len(confs)])}
    return points_pose(points, confidences=dict(zip(JOINTS, confs)))


def test_prune_keypoints_example():
    pose = _pose_with_confidences([0.9, 0.6, 0.4])
    pruned = prune_keypoints(pose, 0.5)
    assert pruned.keypoints[0].present and pruned.keypoints[1].present
    assert not pruned.keypoints[2].present


def test_prune_keypoints_zero_threshold_is_identity():
    pose = _pose_with_confidences([0.9, 0.6, 0.4])
    assert prune_keypoints(pose, 0.0) == pose


@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=15))
def test_prune_keypoints_monotone_and_nondestructive(confs):
    pose = _pose_with_confidences(confs)
    high = prune_keypoints(pose, 0.85)
    low = prune_keypoints(pose, 0.70)
    kept_high = {kp.joint for kp in high.keypoints if kp.present}
    kept_low = {kp.joint for kp in low.keypoints if kp.present}
    assert kept_high <= kept_low
    for original, pruned in zip(pose.keypoints, low.keypoints):
        if pruned.present:
            assert (pruned.x, pruned.y, pruned.confidence) == (
                original.x,
                original.y,
                original.confidence,
            )


def _sequence_of(poses_per_frame: list[list[Pose]], name="seq", size=(2000, 2000)) -> Sequence:
    return Sequence(
        name=name,
        frames=tuple(
            Frame(index=i, width=size[0], height=size[1], poses=tuple(poses))
            for i, poses in enumerate(poses_per_frame)
        ),
    )


def test_retention_all_confident_is_100():
    seq = _sequence_of([[template_pose((200, 200), confidence=1.0)]])
    table = retention_stats([seq], 0.7)
    assert table.total == 100.0
    assert all(v == 100.0 for v in table.per_group.values())


def test_retention_hand_count():
    # 4 present keypoints, 2 below the threshold: 50% kept
    points = {
        Joint.NOSE: (0, 0),
        Joint.HEAD_TOP: (0, 5),
        Joint.LEFT_WRIST: (5, 5),
        Joint.RIGHT_WRIST: (9, 9),
    }
    pose = points_pose(
        points,
        confidences={
            Joint.NOSE: 0.9,
            Joint.HEAD_TOP: 0.8,
            Joint.LEFT_WRIST: 0.2,
            Joint.RIGHT_WRIST: 0.1,
        },
    )
    table = retention_stats([_sequence_of([[pose]])], 0.5)
    assert table.total == 50.0


def test_retention_requires_keypoints():
    empty = points_pose({})
    with pytest.raises(TrackingError):
        retention_stats([_sequence_of([[empty]])], 0.5)


# ---------------------------------------------------------------------------
# similarity


def test_similarity_identity_is_one():
    pose = template_pose((300, 300))
    assert pose_similarity(pose, pose) == pytest.approx(1.0)


def test_similarity_far_poses_vanishes():
    a = template_pose((100, 100))
    b = template_pose((1900, 1900))
    assert pose_similarity(a, b) < 0.05


def test_similarity_symmetric_for_equal_areas():
    rng = random.Random(0)
    for _ in range(100):
        center = (rng.uniform(0, 500), rng.uniform(0, 500))
        shift = (rng.uniform(-40, 40), rng.uniform(-40, 40))
        a = template_pose(center, scale=80.0)
        b = template_pose((center[0] + shift[0], center[1] + shift[1]), scale=80.0)
        assert pose_similarity(a, b) == pytest.approx(pose_similarity(b, a), abs=1e-12)


def test_similarity_requires_a_box():
    with pytest.raises(ValueError):
        pose_similarity(points_pose({}), template_pose((0, 0)))


def test_per_joint_kappa_matches_uniform_scalar():
    a = template_pose((100, 100))
    b = template_pose((112, 104))
    uniform = TrackerConfig(kappa=0.1)
    per_joint = TrackerConfig(kappa=[0.1] * len(JOINTS))
    assert pose_similarity(a, b, per_joint) == pose_similarity(a, b, uniform)
    widened = TrackerConfig(kappa=[0.5] * len(JOINTS))
    assert pose_similarity(a, b, widened) > pose_similarity(a, b, uniform)
    with pytest.raises(ValueError):
        TrackerConfig(kappa=[0.1] * 3)
    with pytest.raises(ValueError):
        TrackerConfig(kappa=-0.1)


# ---------------------------------------------------------------------------
# assignment


def _bruteforce_min_cost(matrix: np.ndarray) -> float:
    n, m = matrix.shape
    best = None
    if n <= m:
        for cols in itertools.permutations(range(m), n):
            cost = sum(matrix[r, c] for r, c in enumerate(cols))
            best = cost if best is None else min(best, cost)
    else:
        for rows in itertools.permutations(range(n), m):
            cost = sum(matrix[r, c] for c, r in enumerate(rows))
            best = cost if best is None else min(best, cost)
    return best


def _total(matrix, pairs):
    return sum(matrix[r, c] for r, c in pairs)


def test_assignment_two_by_two_example():
    matrix = np.array([[1.0, 2.0], [3.0, 1.0]])
    pairs = solve_assignment(matrix, "hungarian")
    assert pairs == [(0, 0), (1, 1)]
    assert _total(matrix, pairs) == 2.0


def test_assignment_single_cell():
    assert solve_assignment([[7.0]], "hungarian") == [(0, 0)]
    assert solve_assignment([[7.0]], "greedy") == [(0, 0)]


def test_assignment_empty():
    assert solve_assignment(np.zeros((0, 3)), "hungarian") == []
    assert solve_assignment(np.zeros((0, 3)), "greedy") == []


def test_greedy_tie_break_by_row_then_column():
    matrix = np.zeros((2, 2))
    assert solve_assignment(matrix, "greedy") == [(0, 0), (1, 1)]


def test_hungarian_optimal_and_no_worse_than_greedy():
    rng = np.random.default_rng(10)
    for _ in range(300):
        n, m = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        # dyadic costs make brute-force sums exact
        matrix = rng.integers(0, 2048, size=(n, m)) / 2048.0
        hung = solve_assignment(matrix, "hungarian")
        greedy = solve_assignment(matrix, "greedy")
        assert len(hung) == len(greedy) == min(n, m)
        assert _total(matrix, hung) == _bruteforce_min_cost(matrix)
        assert _total(matrix, hung) <= _total(matrix, greedy)


def test_assignment_rejects_bad_input():
    with pytest.raises(ValueError):
        solve_assignment(np.array([[np.inf]]), "hungarian")
    with pytest.raises(ValueError):
        solve_assignment(np.zeros((2, 2)), "other")


# ---------------------------------------------------------------------------
# sequence tracking


def _moving_person(n_frames: int, start=(200.0, 300.0), step=(1.0, 0.0)) -> list[Pose]:
    return [
        template_pose((start[0] + i * step[0], start[1] + i * step[1]))
        for i in range(n_frames)
    ]


def test_single_person_keeps_one_id():
    poses = _moving_person(10)
    seq = _sequence_of([[p] for p in poses])
    tracked = track_sequence(seq)
    ids = {frame.poses[0].track_id for frame in tracked.frames}
    assert ids == {0}


def test_first_frame_ids_in_input_order():
    seq = _sequence_of([[template_pose((200, 200)), template_pose((800, 200))]])
    tracked = track_sequence(seq)
    assert [p.track_id for p in tracked.frames[0].poses] == [0, 1]


def _gapped_sequence(gap: int) -> Sequence:
    """A person present at frames 0..1, absent for `gap` frames, then back."""
    frames = []
    pose = template_pose((300, 300))
    for i in range(2):
        frames.append(Frame(index=i, width=2000, height=2000, poses=(pose,)))
    for i in range(2, 2 + gap):
        frames.append(Frame(index=i, width=2000, height=2000, poses=()))
    frames.append(Frame(index=2 + gap, width=2000, height=2000, poses=(pose,)))
    return Sequence(name="gap", frames=tuple(frames))


def test_retention_window_keeps_id_within_window():
    # last seen at index 1, absent for 2 frames, back at index 4: distance 3
    config = TrackerConfig(retention_window=3)
    tracked = track_sequence(_gapped_sequence(gap=2), config)
    assert tracked.frames[-1].poses[0].track_id == 0


def test_retention_window_expiry_gives_fresh_id():
    config = TrackerConfig(retention_window=2)
    tracked = track_sequence(_gapped_sequence(gap=config.retention_window + 1), config)
    assert tracked.frames[-1].poses[0].track_id == 1


def test_retention_window_one_with_gap_two_cannot_continue():
    config = TrackerConfig(retention_window=1)
    tracked = track_sequence(_gapped_sequence(gap=1), config)  # index distance 2
    assert tracked.frames[-1].poses[0].track_id == 1


def test_tracking_rejects_preassigned_ids():
    seq = _sequence_of([[template_pose((200, 200), track_id=5)]])
    with pytest.raises(TrackingError):
        track_sequence(seq)


def test_ids_unique_within_frames_and_never_reused():
    rng = random.Random(1)
    frames = []
    for i in range(30):
        poses = []
        for person in range(3):
            if rng.random() < 0.3:
                continue  # drop out for a while
            poses.append(template_pose((150 + 400 * person + i, 300)))
        frames.append(poses)
    tracked = track_sequence(_sequence_of(frames), TrackerConfig(retention_window=2))
    seen_ids = []
    for frame in tracked.frames:
        ids = [p.track_id for p in frame.poses]
        assert len(ids) == len(set(ids))
        seen_ids.extend(ids)
    # monotone id issue: a discarded id never comes back with a later first use
    first_use = {}
    for frame in tracked.frames:
        for p in frame.poses:
            first_use.setdefault(p.track_id, frame.index)
    assert sorted(first_use, key=first_use.get) == sorted(first_use)


def test_tracking_is_deterministic():
    from topdown.model import save_predictions
    from topdown import synth

    out = synth.generate(synth.calibrated_benchmark_spec(n_frames=30))
    once = track_sequence(out.det)
    twice = track_sequence(out.det)
    assert once == twice
    assert save_predictions(once).encode() == save_predictions(twice).encode()


def test_greedy_and_hungarian_both_track_simple_scenes():
    poses = _moving_person(8)
    seq = _sequence_of([[p] for p in poses])
    for method in ("greedy", "hungarian"):
        tracked = track_sequence(seq, TrackerConfig(method=method))
        assert {f.poses[0].track_id for f in tracked.frames} == {0}


def test_greedy_equals_hungarian_on_unambiguous_scenes():
    """With well-separated persons both solvers produce identical tracks."""
    from topdown import synth

    for seed in (4, 5, 6):
        out = synth.generate(
            synth.calibrated_benchmark_spec(n_persons=3, n_frames=20, seed=seed, fp_rate=0.5)
        )
        greedy = track_sequence(out.det, TrackerConfig(method="greedy"))
        hungarian = track_sequence(out.det, TrackerConfig(method="hungarian"))
        assert greedy == hungarian


def test_crossing_persons_with_separated_lanes_have_zero_switches():
    """Two persons cross in x but live in distinct lanes: no id switches."""
    n = 50
    gt_frames = []
    for i in range(n):
        a = template_pose((100.0 + 8.0 * i, 200.0), track_id=0)
        b = template_pose((700.0 - 8.0 * i, 420.0), track_id=1)
        gt_frames.append([a, b])
    gt = _sequence_of(gt_frames, name="cross")
    det = _sequence_of(
        [[replace(p, track_id=None) for p in poses] for poses in gt_frames], name="cross"
    )
    tracked = track_sequence(det)
    report = evaluate_mot([tracked], [gt])
    assert report.total_counts.idsw == 0
    assert report.mota_total == 100.0
