"""Frame-stamp annotations, per-frame and per-clip labeling, and splitting.

Each video carries three frame stamps: falling start (S_fs), falling end
(S_fe), and getting up (S_gu); all zero when no fall occurs. Three labeling
principles map the stamps to per-frame fall intervals; the default (P3)
labels fall only while the actor is already down.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classifier import FallLabel

CLIP_LEN = 75  # 3 seconds at 25 fps


class Principle(enum.Enum):
    """Which stamp interval counts as fall."""

    P1 = "p1"  # falling proceeding only: [S_fs, S_fe]
    P2 = "p2"  # falling through getting up: [S_fs, S_gu]
    P3 = "p3"  # fallen state only: [S_fe, S_gu] (default)


class ClipLabel(enum.Enum):
    FALL = "fall"
    NO_FALL = "no_fall"
    EXCLUDED = "excluded"


@dataclass(frozen=True)
class VideoAnnotation:
    s_fs: int
    s_fe: int
    s_gu: int
    n_frames: int

    def __post_init__(self) -> None:
        if self.n_frames < 1:
            raise ValueError("n_frames must be positive")
        stamps = (self.s_fs, self.s_fe, self.s_gu)
        if stamps == (0, 0, 0):
            return
        if not (1 <= self.s_fs <= self.s_fe <= self.s_gu <= self.n_frames):
            raise ValueError(
                f"stamps must satisfy 1 <= S_fs <= S_fe <= S_gu <= n_frames, got {stamps}"
            )

    @property
    def has_fall(self) -> bool:
        return self.s_fs != 0


def fall_interval(ann: VideoAnnotation, principle: Principle) -> tuple[int, int] | None:
    """Closed frame interval labeled fall, or None for no-fall videos."""
    if not ann.has_fall:
        return None
    if principle == Principle.P1:
        return ann.s_fs, ann.s_fe
    if principle == Principle.P2:
        return ann.s_fs, ann.s_gu
    return ann.s_fe, ann.s_gu


def frame_labels(ann: VideoAnnotation, principle: Principle = Principle.P3) -> list[FallLabel]:
    """Per-frame labels for frames 1..n_frames (index 0 is frame 1)."""
    labels = [FallLabel.NO_FALL] * ann.n_frames
    interval = fall_interval(ann, principle)
    if interval is not None:
        lo, hi = interval
        for i in range(lo, hi + 1):
            labels[i - 1] = FallLabel.FALL
    return labels


def frame_label(ann: VideoAnnotation, frame_index: int,
                principle: Principle = Principle.P3) -> FallLabel:
    interval = fall_interval(ann, principle)
    if interval is not None and interval[0] <= frame_index <= interval[1]:
        return FallLabel.FALL
    return FallLabel.NO_FALL


def clip_label(s_l: int, s_r: int, ann: VideoAnnotation) -> ClipLabel:
    """Label a 75-frame clip [s_l, s_r].

    Fall when the clip covers the whole falling proceeding and ends while
    the actor is still down; no-fall when it ends before the fall starts or
    begins after getting up; anything in between (a partially covered fall)
    is excluded.
    """
    if s_r - s_l != CLIP_LEN:
        raise ValueError(f"clips must satisfy s_r - s_l = {CLIP_LEN}, got {s_r - s_l}")
    if s_l <= ann.s_fs and ann.s_fe <= s_r <= ann.s_gu:
        return ClipLabel.FALL
    if s_r <= ann.s_fs or s_l >= ann.s_gu:
        return ClipLabel.NO_FALL
    return ClipLabel.EXCLUDED


def split(samples, ratio: float = 0.7, seed: int = 0, grouped: bool = True,
          key=None):
    """Seeded shuffle split; grouped mode keeps each source video whole.

    ``key`` extracts the grouping id (defaults to the ``source_id``
    attribute). The train side targets floor(ratio * n) samples.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("cannot split an empty sample list")
    rng = np.random.default_rng(seed)
    target = math.floor(ratio * len(samples))
    if not grouped:
        order = rng.permutation(len(samples))
        train = [samples[i] for i in order[:target]]
        test = [samples[i] for i in order[target:]]
        return train, test

    if key is None:
        key = lambda s: s.source_id
    groups: dict[str, list] = {}
    for s in samples:
        groups.setdefault(key(s), []).append(s)
    names = list(groups)
    rng.shuffle(names)
    train: list = []
    test: list = []
    for name in names:
        side = train if len(train) < target else test
        side.extend(groups[name])
    return train, test


# ---------------------------------------------------------------------------
# Annotation files: one CSV record per video.

ANNOTATION_FIELDS = ("source_id", "s_fs", "s_fe", "s_gu", "n_frames")


def write_annotations(path, annotations: dict[str, VideoAnnotation]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ANNOTATION_FIELDS)
        for source_id in sorted(annotations):
            ann = annotations[source_id]
            writer.writerow([source_id, ann.s_fs, ann.s_fe, ann.s_gu, ann.n_frames])


def read_annotations(path) -> dict[str, VideoAnnotation]:
    path = Path(path)
    out: dict[str, VideoAnnotation] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != list(ANNOTATION_FIELDS):
            raise ValueError(f"{path.name}: expected header {','.join(ANNOTATION_FIELDS)}")
        for row in reader:
            if not row:
                continue
            if len(row) != 5:
                raise ValueError(f"{path.name}: annotation rows need 5 fields, got {row}")
            source_id = row[0]
            try:
                s_fs, s_fe, s_gu, n_frames = (int(v) for v in row[1:])
            except ValueError as e:
                raise ValueError(f"{path.name}: non-integer stamp in row {row}") from e
            out[source_id] = VideoAnnotation(s_fs, s_fe, s_gu, n_frames)
    return out
