"""Keypoint file parsing, track association, and sequence segmentation.

The on-disk format is one JSON document per video::

    {
      "source_id": "video_001",            # optional, defaults to file stem
      "frames": [
        {"frame_index": 1,
         "people": [
           {"keypoints": [x1, y1, c1, ..., x18, y18, c18],
            "track_id": 0}                  # optional
         ]},
        ...
      ]
    }

Confidence c > 0 marks a keypoint detected; the confidence value itself is
discarded. When every person entry in the file carries a ``track_id``, those
identities are trusted and greedy association is skipped.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .skeleton import NUM_KEYPOINTS, Keypoint, SkeletonFrame, detected_body_count

# Greedy association: accept a match at or above this box overlap.
IOU_MATCH_THRESHOLD = 0.3
# An unmatched track stays open for at most this many frames.
TRACK_PERSISTENCE_FRAMES = 10
# A run of at least this many missing/discarded frames splits a sequence.
SEQUENCE_BREAK_GAP = 10
# Segments shorter than this are dropped.
MIN_SEQUENCE_FRAMES = 10


class ParseError(ValueError):
    """The keypoint document is structurally malformed."""


class FormatError(ParseError):
    """The document parses but violates the keypoint format contract."""


@dataclass(frozen=True)
class DetectionBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError("detection box must have min <= max on both axes")

    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


@dataclass(frozen=True)
class TrackedSequence:
    """One person's skeletons over time, strictly increasing frame_index."""

    track_id: int
    frames: tuple[SkeletonFrame, ...]
    source_id: str

    def __post_init__(self) -> None:
        for prev, cur in zip(self.frames, self.frames[1:]):
            if cur.frame_index <= prev.frame_index:
                raise ValueError("frame_index must be strictly increasing")
        for f in self.frames:
            if f.track_id != self.track_id:
                raise ValueError("all frames must share the sequence track_id")

    def __len__(self) -> int:
        return len(self.frames)


def detection_box(frame: SkeletonFrame) -> DetectionBox | None:
    """Extent of the detected keypoints, or None when nothing is detected."""
    xs = [k.x for k in frame.keypoints if k.detected]
    ys = [k.y for k in frame.keypoints if k.detected]
    if not xs:
        return None
    return DetectionBox(min(xs), min(ys), max(xs), max(ys))


def box_iou(a: DetectionBox, b: DetectionBox) -> float:
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area() + b.area() - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def _keypoints_from_numbers(numbers, frame_index: int) -> tuple[Keypoint, ...]:
    if len(numbers) != 3 * NUM_KEYPOINTS:
        raise FormatError(
            f"frame {frame_index}: person entry must hold exactly "
            f"{3 * NUM_KEYPOINTS} numbers, got {len(numbers)}"
        )
    kps = []
    for m in range(NUM_KEYPOINTS):
        x, y, c = numbers[3 * m], numbers[3 * m + 1], numbers[3 * m + 2]
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in (x, y, c)):
            raise FormatError(f"frame {frame_index}: keypoint values must be numbers")
        if c > 0:
            kps.append(Keypoint(float(x), float(y), True))
        else:
            kps.append(Keypoint.missing())
    return tuple(kps)


def parse_pose_frames(file_bytes) -> list[tuple[int, list[SkeletonFrame]]]:
    """Parse a keypoint document into per-frame skeleton lists.

    Skeletons keep ``track_id`` from the file when present, -1 otherwise.
    Raises ParseError naming the byte offset for malformed JSON, FormatError
    naming the frame for contract violations.
    """
    if isinstance(file_bytes, bytes):
        text = file_bytes.decode("utf-8")
    else:
        text = file_bytes
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed keypoint document at byte {e.pos}: {e.msg}") from e

    if not isinstance(doc, dict) or not isinstance(doc.get("frames"), list):
        raise FormatError("keypoint document must be an object with a 'frames' list")

    out: list[tuple[int, list[SkeletonFrame]]] = []
    last_index = 0
    for entry in doc["frames"]:
        if not isinstance(entry, dict) or "frame_index" not in entry:
            raise FormatError("every frame entry needs a 'frame_index'")
        frame_index = entry["frame_index"]
        if not isinstance(frame_index, int) or frame_index < 1:
            raise FormatError(f"frame_index must be a positive integer, got {frame_index!r}")
        if frame_index <= last_index:
            raise FormatError(
                f"frame {frame_index}: frame entries must be ordered by increasing frame_index"
            )
        last_index = frame_index
        people = entry.get("people", [])
        if not isinstance(people, list):
            raise FormatError(f"frame {frame_index}: 'people' must be a list")
        skeletons = []
        for person in people:
            if not isinstance(person, dict) or not isinstance(person.get("keypoints"), list):
                raise FormatError(f"frame {frame_index}: person entries need a 'keypoints' list")
            tid = person.get("track_id", -1)
            if not isinstance(tid, int) or isinstance(tid, bool):
                raise FormatError(f"frame {frame_index}: track_id must be an integer")
            kps = _keypoints_from_numbers(person["keypoints"], frame_index)
            skeletons.append(SkeletonFrame(kps, frame_index, tid))
        out.append((frame_index, skeletons))
    return out


def parse_source_id(file_bytes, fallback: str = "") -> str:
    if isinstance(file_bytes, bytes):
        file_bytes = file_bytes.decode("utf-8")
    try:
        doc = json.loads(file_bytes)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed keypoint document at byte {e.pos}: {e.msg}") from e
    sid = doc.get("source_id") if isinstance(doc, dict) else None
    return sid if isinstance(sid, str) and sid else fallback


@dataclass
class _OpenTrack:
    track_id: int
    frames: list[SkeletonFrame]
    last_box: DetectionBox | None
    last_seen: int


def associate_tracks(
    frames: list[tuple[int, list[SkeletonFrame]]], source_id: str = ""
) -> list[TrackedSequence]:
    """Greedy frame-to-frame association by bounding-box overlap.

    Detections match the open track of highest IoU (at or above
    ``IOU_MATCH_THRESHOLD``); everything else starts a new track. Tracks
    unseen for more than ``TRACK_PERSISTENCE_FRAMES`` frames close. Every
    input skeleton ends up in exactly one track.
    """
    open_tracks: list[_OpenTrack] = []
    closed: list[_OpenTrack] = []
    next_id = 0

    for frame_index, skeletons in frames:
        still_open = []
        for t in open_tracks:
            if frame_index - t.last_seen > TRACK_PERSISTENCE_FRAMES:
                closed.append(t)
            else:
                still_open.append(t)
        open_tracks = still_open

        boxes = [detection_box(s) for s in skeletons]
        candidates = []
        for ti, t in enumerate(open_tracks):
            if t.last_box is None:
                continue
            for di, box in enumerate(boxes):
                if box is None:
                    continue
                iou = box_iou(t.last_box, box)
                if iou >= IOU_MATCH_THRESHOLD:
                    candidates.append((iou, ti, di))
        # Highest overlap first; track then detection order breaks ties.
        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))

        used_tracks: set[int] = set()
        used_dets: set[int] = set()
        assignment: dict[int, int] = {}
        for iou, ti, di in candidates:
            if ti in used_tracks or di in used_dets:
                continue
            used_tracks.add(ti)
            used_dets.add(di)
            assignment[di] = ti

        for di, skel in enumerate(skeletons):
            if di in assignment:
                t = open_tracks[assignment[di]]
            else:
                t = _OpenTrack(next_id, [], None, frame_index)
                next_id += 1
                open_tracks.append(t)
            t.frames.append(dataclasses.replace(skel, track_id=t.track_id))
            t.last_box = boxes[di]
            t.last_seen = frame_index

    all_tracks = sorted(closed + open_tracks, key=lambda t: t.track_id)
    return [
        TrackedSequence(t.track_id, tuple(t.frames), source_id)
        for t in all_tracks
        if t.frames
    ]


def segment_sequences(track: TrackedSequence) -> list[TrackedSequence]:
    """Split a track into usable segments.

    Frames with zero detected body keypoints are discarded. Any run of at
    least ``SEQUENCE_BREAK_GAP`` consecutive missing-or-discarded frames
    splits the track, and segments shorter than ``MIN_SEQUENCE_FRAMES``
    frames are dropped.
    """
    kept = [f for f in track.frames if detected_body_count(f) > 0]
    segments: list[list[SkeletonFrame]] = []
    current: list[SkeletonFrame] = []
    for f in kept:
        if current and f.frame_index - current[-1].frame_index - 1 >= SEQUENCE_BREAK_GAP:
            segments.append(current)
            current = []
        current.append(f)
    if current:
        segments.append(current)
    return [
        TrackedSequence(track.track_id, tuple(seg), track.source_id)
        for seg in segments
        if len(seg) >= MIN_SEQUENCE_FRAMES
    ]


def load_tracked_sequences(path) -> list[TrackedSequence]:
    """Read one keypoint file and return its tracks (before segmentation).

    When every person entry carries a track_id the stored identities are
    used directly; otherwise greedy association runs.
    """
    path = Path(path)
    data = path.read_bytes()
    source_id = parse_source_id(data, fallback=path.stem)
    frames = parse_pose_frames(data)

    all_have_ids = True
    any_people = False
    for _, skeletons in frames:
        for s in skeletons:
            any_people = True
            if s.track_id < 0:
                all_have_ids = False
    if any_people and all_have_ids:
        by_id: dict[int, list[SkeletonFrame]] = {}
        for _, skeletons in frames:
            for s in skeletons:
                by_id.setdefault(s.track_id, []).append(s)
        return [
            TrackedSequence(tid, tuple(fs), source_id)
            for tid, fs in sorted(by_id.items())
        ]
    return associate_tracks(frames, source_id)


def load_segments(path) -> list[TrackedSequence]:
    """Parse, associate, and segment one keypoint file."""
    segments = []
    for track in load_tracked_sequences(path):
        segments.extend(segment_sequences(track))
    return segments


def write_pose_file(path, sequences, source_id: str, include_track_ids: bool = False) -> None:
    """Write tracked sequences back out in the keypoint file format."""
    by_frame: dict[int, list[SkeletonFrame]] = {}
    for seq in sequences:
        for f in seq.frames:
            by_frame.setdefault(f.frame_index, []).append(f)
    frames_doc = []
    for frame_index in sorted(by_frame):
        people = []
        for skel in by_frame[frame_index]:
            numbers: list[float] = []
            for kp in skel.keypoints:
                numbers.extend([kp.x, kp.y, 1.0 if kp.detected else 0.0])
            person = {"keypoints": numbers}
            if include_track_ids:
                person["track_id"] = skel.track_id
            people.append(person)
        frames_doc.append({"frame_index": frame_index, "people": people})
    doc = {"source_id": source_id, "frames": frames_doc}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")
