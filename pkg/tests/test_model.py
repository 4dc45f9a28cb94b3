"""Domain types, the group partition, and document round-trips."""
from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from topdown.model import (
    BBox,
    EvalGroup,
    Frame,
    GROUPS,
    JOINTS,
    Joint,
    Keypoint,
    Pose,
    Sequence,
    SequenceError,
    group_joints,
    joint_group,
    load_sequence,
    save_predictions,
    sequence_to_dict,
)


def test_fifteen_joints_seven_groups():
    assert len(JOINTS) == 15
    assert len(GROUPS) == 7


def test_joint_group_examples():
    assert joint_group(Joint.LEFT_ANKLE) is EvalGroup.ANKLE
    assert joint_group(Joint.HEAD_TOP) is EvalGroup.HEAD


def test_group_mapping_is_a_partition():
    seen: list[Joint] = []
    for group in GROUPS:
        members = group_joints(group)
        expected = 3 if group is EvalGroup.HEAD else 2
        assert len(members) == expected
        seen.extend(members)
    assert sorted(seen, key=lambda j: j.index) == list(JOINTS)


# ---------------------------------------------------------------------------
# strategies


@st.composite
def poses(draw) -> Pose:
    keypoints = []
    for joint in JOINTS:
        keypoints.append(
            Keypoint(
                joint=joint,
                x=draw(st.floats(-1000, 5000, allow_nan=False)),
                y=draw(st.floats(-1000, 5000, allow_nan=False)),
                confidence=draw(st.floats(0, 1, allow_nan=False)),
                present=draw(st.booleans()),
            )
        )
    det_score = draw(st.floats(0, 1, allow_nan=False))
    bbox = None
    if draw(st.booleans()):
        x1 = draw(st.floats(-100, 500, allow_nan=False))
        y1 = draw(st.floats(-100, 500, allow_nan=False))
        # box scores are not serialized; they reload as det_score
        bbox = BBox(
            x1,
            y1,
            x1 + draw(st.floats(0, 300, allow_nan=False)),
            y1 + draw(st.floats(0, 300, allow_nan=False)),
            score=det_score,
        )
    track_id = draw(st.one_of(st.none(), st.integers(0, 99)))
    return Pose(keypoints=tuple(keypoints), det_score=det_score, bbox=bbox, track_id=track_id)


@st.composite
def sequences(draw) -> Sequence:
    width = draw(st.integers(10, 1000))
    height = draw(st.integers(10, 1000))
    n_frames = draw(st.integers(0, 3))
    indices = sorted(draw(st.sets(st.integers(0, 50), min_size=n_frames, max_size=n_frames)))
    frames = []
    for index in indices:
        frame_poses = draw(st.lists(poses(), max_size=3))
        frames.append(Frame(index=index, width=width, height=height, poses=tuple(frame_poses)))
    name = draw(st.text(alphabet="abcdefghij_0123456789", min_size=1, max_size=10))
    return Sequence(name=name, frames=tuple(frames))


@given(sequences())
def test_roundtrip_load_of_save_is_identity(seq):
    assert load_sequence(save_predictions(seq)) == seq


@given(sequences())
def test_roundtrip_save_of_load_preserves_document(seq):
    doc = json.dumps(sequence_to_dict(seq))
    assert save_predictions(load_sequence(doc)) == save_predictions(seq)
    assert json.loads(doc) == sequence_to_dict(load_sequence(doc))


def test_empty_sequence_document():
    doc = json.loads(save_predictions(Sequence(name="empty")))
    assert doc == {"name": "empty", "frames": []}


def test_track_id_passthrough(tmp_path):
    from conftest import template_pose

    seq = Sequence(
        name="ids",
        frames=(
            Frame(index=0, width=640, height=480, poses=(template_pose((200, 200), track_id=3),)),
        ),
    )
    doc = json.loads(save_predictions(seq))
    assert doc["frames"][0]["poses"][0]["track_id"] == 3


def _valid_doc() -> dict:
    from conftest import template_pose

    seq = Sequence(
        name="doc",
        frames=(
            Frame(index=0, width=640, height=480, poses=(template_pose((200, 200)),)),
            Frame(index=1, width=640, height=480, poses=(template_pose((210, 200)),)),
        ),
    )
    return sequence_to_dict(seq)


def _corrupt_confidence(doc):
    doc["frames"][0]["poses"][0]["keypoints"][2]["confidence"] = 1.5
    return "frames[0].poses[0].keypoints[2].confidence"


def _corrupt_missing_det_score(doc):
    del doc["frames"][1]["poses"][0]["det_score"]
    return "frames[1].poses[0].det_score"


def _corrupt_duplicate_frame_index(doc):
    doc["frames"][1]["index"] = 0
    return "frames[1].index"


def _corrupt_joint_name(doc):
    doc["frames"][0]["poses"][0]["keypoints"][0]["joint"] = "left_eye"
    return "keypoints[0].joint"


def _corrupt_duplicate_joint(doc):
    doc["frames"][0]["poses"][0]["keypoints"][1]["joint"] = "nose"
    return "keypoints[1].joint"


def _corrupt_keypoint_count(doc):
    doc["frames"][0]["poses"][0]["keypoints"].pop()
    return "frames[0].poses[0].keypoints"


def _corrupt_negative_track_id(doc):
    doc["frames"][0]["poses"][0]["track_id"] = -2
    return "track_id"


def _corrupt_bbox_arity(doc):
    doc["frames"][0]["poses"][0]["bbox"] = [1.0, 2.0, 3.0]
    return "bbox"


def _corrupt_nonfinite_x(doc):
    doc["frames"][0]["poses"][0]["keypoints"][4]["x"] = "oops"
    return "keypoints[4].x"


def _corrupt_width_mismatch(doc):
    doc["frames"][1]["width"] = 999
    return "frames[1]"


def _corrupt_missing_name(doc):
    del doc["name"]
    return "name"


@pytest.mark.parametrize(
    "corrupt",
    [
        _corrupt_confidence,
        _corrupt_missing_det_score,
        _corrupt_duplicate_frame_index,
        _corrupt_joint_name,
        _corrupt_duplicate_joint,
        _corrupt_keypoint_count,
        _corrupt_negative_track_id,
        _corrupt_bbox_arity,
        _corrupt_nonfinite_x,
        _corrupt_width_mismatch,
        _corrupt_missing_name,
    ],
)
def test_loader_rejects_single_field_corruptions(corrupt):
    doc = _valid_doc()
    expected_path_part = corrupt(doc)
    with pytest.raises(SequenceError) as excinfo:
        load_sequence(json.dumps(doc))
    assert expected_path_part in str(excinfo.value)


def test_loader_rejects_malformed_json():
    with pytest.raises(SequenceError):
        load_sequence("{not json")


def test_confidence_range_error_names_offending_keypoint():
    doc = _valid_doc()
    doc["frames"][0]["poses"][0]["keypoints"][7]["confidence"] = 2.0
    with pytest.raises(SequenceError, match=r"frames\[0\].poses\[0\].keypoints\[7\]"):
        load_sequence(json.dumps(doc))


def test_type_invariants():
    with pytest.raises(ValueError):
        Keypoint(joint=Joint.NOSE, x=0.0, y=0.0, confidence=1.5)
    with pytest.raises(ValueError):
        Keypoint(joint=Joint.NOSE, x=float("nan"), y=0.0, confidence=0.5)
    with pytest.raises(ValueError):
        BBox(5.0, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        Frame(index=-1, width=10, height=10)
    good = Frame(index=0, width=10, height=10)
    with pytest.raises(ValueError):
        Sequence(name="x", frames=(good, good))
