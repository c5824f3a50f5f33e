"""Canonical skeleton types and the fixed 12-connection body topology.

All downstream modules share the 18-keypoint layout defined here. The five
face keypoints (nose, eyes, ears) ride along in the data format but never
take part in body geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

# Keypoint slot indices, fixed order. Right side precedes left within each pair.
NOSE = 0
NECK = 1
R_SHOULDER = 2
L_SHOULDER = 3
R_ELBOW = 4
L_ELBOW = 5
R_WRIST = 6
L_WRIST = 7
R_HIP = 8
L_HIP = 9
R_KNEE = 10
L_KNEE = 11
R_ANKLE = 12
L_ANKLE = 13
R_EYE = 14
L_EYE = 15
R_EAR = 16
L_EAR = 17

NUM_KEYPOINTS = 18

KEYPOINT_NAMES = (
    "nose", "neck",
    "r_shoulder", "l_shoulder", "r_elbow", "l_elbow", "r_wrist", "l_wrist",
    "r_hip", "l_hip", "r_knee", "l_knee", "r_ankle", "l_ankle",
    "r_eye", "l_eye", "r_ear", "l_ear",
)

FACE_KEYPOINTS = frozenset({NOSE, R_EYE, L_EYE, R_EAR, L_EAR})
BODY_KEYPOINTS = tuple(i for i in range(NUM_KEYPOINTS) if i not in FACE_KEYPOINTS)
NUM_BODY_KEYPOINTS = len(BODY_KEYPOINTS)  # 13

NUM_CONNECTIONS = 12


@dataclass(frozen=True)
class Keypoint:
    """One 2D landmark in image coordinates (pixels, y grows downward)."""

    x: float
    y: float
    detected: bool

    def __post_init__(self) -> None:
        # Undetected keypoints carry no geometry at all.
        if not self.detected and (self.x != 0.0 or self.y != 0.0):
            raise ValueError("undetected keypoint must have coordinates (0, 0)")

    @staticmethod
    def missing() -> "Keypoint":
        return Keypoint(0.0, 0.0, False)


@dataclass(frozen=True)
class SkeletonFrame:
    """One person's 18 keypoints at one video frame.

    ``track_id`` is -1 until the skeleton has been associated to a track.
    """

    keypoints: tuple[Keypoint, ...]
    frame_index: int
    track_id: int = -1

    def __post_init__(self) -> None:
        if len(self.keypoints) != NUM_KEYPOINTS:
            raise ValueError(
                f"skeleton frame needs exactly {NUM_KEYPOINTS} keypoints, "
                f"got {len(self.keypoints)}"
            )
        if self.frame_index < 1:
            raise ValueError(f"frame_index must be >= 1, got {self.frame_index}")


@dataclass(frozen=True)
class SkeletonTopology:
    """Ordered (proximal, distal) index pairs forming a tree rooted at the neck."""

    connections: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if len(self.connections) != NUM_CONNECTIONS:
            raise ValueError(f"topology needs exactly {NUM_CONNECTIONS} connections")


def coco_topology() -> SkeletonTopology:
    """The fixed body tree: limbs chained off the neck, right before left.

    Slot order (shoulders, elbows, wrists, hips, knees, ankles) determines the
    layout of every pose vector, so it must never change between training and
    inference.
    """
    return SkeletonTopology(connections=(
        (NECK, R_SHOULDER),
        (NECK, L_SHOULDER),
        (R_SHOULDER, R_ELBOW),
        (L_SHOULDER, L_ELBOW),
        (R_ELBOW, R_WRIST),
        (L_ELBOW, L_WRIST),
        (NECK, R_HIP),
        (NECK, L_HIP),
        (R_HIP, R_KNEE),
        (L_HIP, L_KNEE),
        (R_KNEE, R_ANKLE),
        (L_KNEE, L_ANKLE),
    ))


def detected_body_count(frame: SkeletonFrame) -> int:
    """Number of detected keypoints among the 13 body keypoints.

    Face keypoints never influence the count.
    """
    return sum(1 for i in BODY_KEYPOINTS if frame.keypoints[i].detected)
