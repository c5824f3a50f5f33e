"""Direction-vector pose representation.

A pose becomes 24 numbers: 12 unit direction vectors, one per topology
connection, laid out as (x, y) pairs in connection order. The representation
keeps orientation (the salient fall cue) while dropping absolute position and
scale. Connections touching an undetected keypoint, and zero-length
connections, map to (0, 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ingest import TrackedSequence
from .skeleton import SkeletonFrame, SkeletonTopology, detected_body_count

POSE_DIM = 24

# A frame needs at least this many detected body keypoints to be classified;
# anything below is prejudged "unknown".
MIN_CLASSIFIABLE_KEYPOINTS = 8

# Sub-vectors with norm below this are treated as "no direction available".
ZERO_SUBVECTOR_EPS = 1e-6


@dataclass(frozen=True)
class PoseVectorSequence:
    """Per-frame pose vectors for one tracked person.

    ``vectors`` has shape (n, 24) and is aligned with ``frame_indices``.
    Treat instances as read-only.
    """

    vectors: np.ndarray
    frame_indices: tuple[int, ...]
    track_id: int
    source_id: str

    def __post_init__(self) -> None:
        if len(self.vectors) != len(self.frame_indices):
            raise ValueError("vectors and frame_indices must have equal length")

    def __len__(self) -> int:
        return len(self.frame_indices)


def vectorize_frame(frame: SkeletonFrame, topology: SkeletonTopology) -> np.ndarray:
    """Turn one skeleton into its 24-number direction representation."""
    out = np.zeros(POSE_DIM, dtype=np.float64)
    for p, (l, r) in enumerate(topology.connections):
        a = frame.keypoints[l]
        b = frame.keypoints[r]
        if not (a.detected and b.detected):
            continue
        dx = b.x - a.x
        dy = b.y - a.y
        norm = math.hypot(dx, dy)
        if norm == 0.0:
            continue
        out[2 * p] = dx / norm
        out[2 * p + 1] = dy / norm
    return out


def vectorize_sequence(seq: TrackedSequence, topology: SkeletonTopology) -> PoseVectorSequence:
    """Vectorize every frame of a tracked sequence, keeping alignment."""
    if seq.frames:
        vectors = np.stack([vectorize_frame(f, topology) for f in seq.frames])
    else:
        vectors = np.zeros((0, POSE_DIM), dtype=np.float64)
    return PoseVectorSequence(
        vectors=vectors,
        frame_indices=tuple(f.frame_index for f in seq.frames),
        track_id=seq.track_id,
        source_id=seq.source_id,
    )


def is_classifiable(frame: SkeletonFrame) -> bool:
    """True when the frame has enough detected body keypoints to classify."""
    return detected_body_count(frame) >= MIN_CLASSIFIABLE_KEYPOINTS


def subvectors(vector: np.ndarray) -> np.ndarray:
    """View a 24-number pose vector as 12 rows of (x, y)."""
    return np.asarray(vector).reshape(12, 2)


def renormalize(vector: np.ndarray) -> np.ndarray:
    """Scale each sub-vector back to unit length.

    Sub-vectors with norm below ``ZERO_SUBVECTOR_EPS`` stay (0, 0). Used on
    forecast outputs before they are handed to the classifier, which trains
    on unit-norm inputs.
    """
    sub = subvectors(np.asarray(vector, dtype=np.float64)).copy()
    norms = np.linalg.norm(sub, axis=1)
    keep = norms >= ZERO_SUBVECTOR_EPS
    sub[keep] /= norms[keep, None]
    sub[~keep] = 0.0
    return sub.reshape(POSE_DIM)


def is_valid_pose_vector(vector: np.ndarray, tol: float = 1e-9) -> bool:
    """Check the sub-vector norm invariant: every norm is 1 or exactly 0."""
    v = np.asarray(vector)
    if v.shape != (POSE_DIM,):
        return False
    norms = np.linalg.norm(subvectors(v), axis=1)
    return bool(np.all((np.abs(norms - 1.0) <= tol) | (norms == 0.0)))


def write_vector_table(path, seq: PoseVectorSequence) -> None:
    """Dump a pose-vector sequence as a flat table: frame_index plus 24 columns."""
    with open(path, "w", encoding="utf-8") as fh:
        cols = ",".join(f"v{i}" for i in range(POSE_DIM))
        fh.write(f"frame_index,{cols}\n")
        for idx, row in zip(seq.frame_indices, seq.vectors):
            values = ",".join(repr(float(x)) for x in row)
            fh.write(f"{idx},{values}\n")
