import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fallcast.ingest import TrackedSequence
from fallcast.skeleton import (
    NECK,
    NUM_KEYPOINTS,
    R_SHOULDER,
    R_WRIST,
    Keypoint,
    SkeletonFrame,
    coco_topology,
)
from fallcast.vectorize import (
    POSE_DIM,
    is_classifiable,
    is_valid_pose_vector,
    renormalize,
    vectorize_frame,
    vectorize_sequence,
)

TOP = coco_topology()


def frame_with_coords(coords, detected=None, frame_index=1):
    detected = detected if detected is not None else [True] * NUM_KEYPOINTS
    kps = tuple(
        Keypoint(float(x), float(y), True) if det else Keypoint.missing()
        for (x, y), det in zip(coords, detected)
    )
    return SkeletonFrame(kps, frame_index, 0)


def distinct_coords(rng):
    return [(rng.uniform(0, 300), rng.uniform(0, 240)) for _ in range(NUM_KEYPOINTS)]


def test_three_four_five_normalization():
    coords = distinct_coords(np.random.default_rng(0))
    coords[NECK] = (0.0, 0.0)
    coords[R_SHOULDER] = (3.0, 4.0)
    v = vectorize_frame(frame_with_coords(coords), TOP)
    assert v[0] == pytest.approx(0.6)
    assert v[1] == pytest.approx(0.8)


def test_undetected_endpoint_gives_zero_subvector():
    coords = distinct_coords(np.random.default_rng(1))
    detected = [True] * NUM_KEYPOINTS
    detected[R_WRIST] = False
    coords[R_WRIST] = (0.0, 0.0)
    v = vectorize_frame(frame_with_coords(coords, detected), TOP)
    # connection 4 is r_elbow -> r_wrist
    assert v[8] == 0.0 and v[9] == 0.0


def test_coincident_endpoints_give_zero_subvector():
    coords = distinct_coords(np.random.default_rng(2))
    coords[R_SHOULDER] = coords[NECK]
    v = vectorize_frame(frame_with_coords(coords), TOP)
    assert v[0] == 0.0 and v[1] == 0.0


def test_subvector_norms_are_unit_or_zero():
    rng = np.random.default_rng(3)
    for _ in range(50):
        detected = list(rng.uniform(size=NUM_KEYPOINTS) > 0.2)
        coords = distinct_coords(rng)
        coords = [(x, y) if det else (0.0, 0.0) for (x, y), det in zip(coords, detected)]
        v = vectorize_frame(frame_with_coords(coords, detected), TOP)
        assert is_valid_pose_vector(v)


def shift_frame(frame, dx, dy):
    kps = tuple(
        Keypoint(k.x + dx, k.y + dy, True) if k.detected else k
        for k in frame.keypoints
    )
    return dataclasses.replace(frame, keypoints=kps)


def scale_frame(frame, s, cx, cy):
    kps = tuple(
        Keypoint(cx + s * (k.x - cx), cy + s * (k.y - cy), True) if k.detected else k
        for k in frame.keypoints
    )
    return dataclasses.replace(frame, keypoints=kps)


@given(st.integers(0, 10_000),
       st.floats(-1e4, 1e4), st.floats(-1e4, 1e4))
@settings(max_examples=60)
def test_translation_invariance_within_tolerance(seed, dx, dy):
    frame = frame_with_coords(distinct_coords(np.random.default_rng(seed)))
    base = vectorize_frame(frame, TOP)
    moved = vectorize_frame(shift_frame(frame, dx, dy), TOP)
    assert np.max(np.abs(base - moved)) < 1e-9


@given(st.integers(0, 10_000), st.floats(1e-3, 1e3),
       st.floats(-500, 500), st.floats(-500, 500))
@settings(max_examples=60)
def test_scale_invariance_within_tolerance(seed, s, cx, cy):
    frame = frame_with_coords(distinct_coords(np.random.default_rng(seed)))
    base = vectorize_frame(frame, TOP)
    scaled = vectorize_frame(scale_frame(frame, s, cx, cy), TOP)
    assert np.max(np.abs(base - scaled)) < 1e-9


def test_determinism_bit_identical():
    frame = frame_with_coords(distinct_coords(np.random.default_rng(9)))
    assert np.array_equal(vectorize_frame(frame, TOP), vectorize_frame(frame, TOP))


def test_vectorize_sequence_preserves_alignment():
    rng = np.random.default_rng(4)
    frames = tuple(
        frame_with_coords(distinct_coords(rng), frame_index=i + 1) for i in range(25)
    )
    seq = TrackedSequence(0, frames, "clip")
    out = vectorize_sequence(seq, TOP)
    assert out.vectors.shape == (25, POSE_DIM)
    assert out.frame_indices == tuple(range(1, 26))
    assert out.source_id == "clip"


def test_vectorize_empty_sequence():
    out = vectorize_sequence(TrackedSequence(0, (), "clip"), TOP)
    assert out.vectors.shape == (0, POSE_DIM)


def test_is_classifiable_boundary():
    body = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13]

    def with_n_detected(n):
        detected = [False] * NUM_KEYPOINTS
        for i in body[:n]:
            detected[i] = True
        coords = distinct_coords(np.random.default_rng(5))
        coords = [(x, y) if det else (0.0, 0.0) for (x, y), det in zip(coords, detected)]
        return frame_with_coords(coords, detected)

    assert is_classifiable(with_n_detected(13))
    assert is_classifiable(with_n_detected(8))
    assert not is_classifiable(with_n_detected(7))


def test_renormalize_restores_unit_norms_and_keeps_zeros():
    v = np.zeros(POSE_DIM)
    v[0:2] = (3.0, 4.0)
    v[2:4] = (1e-8, -1e-8)  # below threshold: stays zero
    out = renormalize(v)
    assert out[0] == pytest.approx(0.6)
    assert out[1] == pytest.approx(0.8)
    assert out[2] == 0.0 and out[3] == 0.0
    assert is_valid_pose_vector(out)
