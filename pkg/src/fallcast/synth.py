"""Synthetic 2D skeleton motion, the desk-scale stand-in for real footage.

A scripted stick figure (25 fps, image coordinates, y down) performs one of
four motions: standing idle, walking, falling then lying, or falling, lying
and getting back up. Falls are preceded by a visible destabilization lean so
that an observer of the pre-fall frames has something to forecast from, and
the collapse itself accelerates quadratically, lasting about 1.3 seconds.
Gaussian pixel noise and random per-keypoint occlusion are applied last.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dataset import VideoAnnotation
from .ingest import TrackedSequence
from .skeleton import (
    L_ANKLE, L_EAR, L_ELBOW, L_EYE, L_HIP, L_KNEE, L_SHOULDER, L_WRIST,
    NECK, NOSE, NUM_KEYPOINTS,
    R_ANKLE, R_EAR, R_ELBOW, R_EYE, R_HIP, R_KNEE, R_SHOULDER, R_WRIST,
    Keypoint, SkeletonFrame,
)

FPS = 25

# Fall phase lengths (frames).
PRE_FALL_IDLE = 45
DESTAB_FRAMES = 50     # slow lean, the learnable precursor of the collapse
COLLAPSE_FRAMES = 32   # ~1.28 s, matching a realistic falling duration
STIR_FRAMES = 55       # arm stirring while lying, the precursor of getting up
RISE_FRAMES = 36
POST_RISE_IDLE = 15
MIN_LYING_FRAMES = 10
MIN_STILL_LYING = 15   # lying frames before the stir begins

LEAN_MAX = math.radians(15.0)

# Stick-figure segment lengths in pixels at scale 1.
TORSO = 46.0
SHOULDER_HALF = 17.0
HIP_HALF = 9.0
UPPER_ARM = 26.0
FOREARM = 24.0
THIGH = 32.0
SHIN = 30.0
HIP_HEIGHT = 61.5
HEAD_RISE = 16.0


class MotionKind(enum.Enum):
    UPRIGHT_IDLE = "upright_idle"
    WALK = "walk"
    FALL_AND_LIE = "fall_and_lie"
    FALL_AND_RISE = "fall_and_rise"


FALL_KINDS = (MotionKind.FALL_AND_LIE, MotionKind.FALL_AND_RISE)


@dataclass(frozen=True)
class MotionScript:
    kind: MotionKind
    duration: int
    noise_std: float = 0.0
    occlusion_rate: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.duration < 1:
            raise ValueError("duration must be positive")
        if not 0.0 <= self.occlusion_rate <= 1.0:
            raise ValueError("occlusion_rate must lie in [0, 1]")
        if self.noise_std < 0.0:
            raise ValueError("noise_std must be non-negative")
        if self.kind == MotionKind.FALL_AND_LIE:
            needed = PRE_FALL_IDLE + DESTAB_FRAMES + COLLAPSE_FRAMES + MIN_LYING_FRAMES
            if self.duration < needed:
                raise ValueError(f"fall_and_lie needs at least {needed} frames")
        if self.kind == MotionKind.FALL_AND_RISE:
            needed = (PRE_FALL_IDLE + DESTAB_FRAMES + COLLAPSE_FRAMES
                      + MIN_STILL_LYING + STIR_FRAMES + RISE_FRAMES + POST_RISE_IDLE)
            if self.duration < needed:
                raise ValueError(f"fall_and_rise needs at least {needed} frames")


@dataclass(frozen=True)
class _Phases:
    """1-based frame boundaries of the fall phases (inclusive starts)."""

    destab_start: int
    collapse_start: int
    lying_start: int
    rise_start: int | None  # None when the actor never gets up


def _phases(script: MotionScript) -> _Phases | None:
    if script.kind not in FALL_KINDS:
        return None
    destab_start = PRE_FALL_IDLE + 1
    collapse_start = destab_start + DESTAB_FRAMES
    lying_start = collapse_start + COLLAPSE_FRAMES
    if script.kind == MotionKind.FALL_AND_LIE:
        return _Phases(destab_start, collapse_start, lying_start, None)
    rise_start = script.duration - POST_RISE_IDLE - RISE_FRAMES + 1
    return _Phases(destab_start, collapse_start, lying_start, rise_start)


def _fall_tilt(frame_index: int, phases: _Phases) -> float:
    """Body tilt from vertical, in radians, for fall-kind frames."""
    if frame_index < phases.destab_start:
        return 0.0
    if frame_index < phases.collapse_start:
        k = frame_index - phases.destab_start + 1
        return LEAN_MAX * k / DESTAB_FRAMES
    if frame_index < phases.lying_start:
        s = (frame_index - phases.collapse_start + 1) / COLLAPSE_FRAMES
        return LEAN_MAX + (math.pi / 2 - LEAN_MAX) * s * s
    if phases.rise_start is None or frame_index < phases.rise_start:
        return math.pi / 2
    k = frame_index - phases.rise_start + 1
    if k <= RISE_FRAMES:
        remain = (RISE_FRAMES - k) / RISE_FRAMES
        return (math.pi / 2) * remain * remain
    return 0.0


def _build_points(leg_r: float, leg_l: float, shin_r: float, shin_l: float,
                  arm_r: float, arm_l: float, bob: float) -> np.ndarray:
    """Joint positions in the local frame: ground at origin, up is -y."""
    pts = np.zeros((NUM_KEYPOINTS, 2))
    hip_c = np.array([0.0, -HIP_HEIGHT + bob])
    pts[R_HIP] = hip_c + (HIP_HALF, 0.0)
    pts[L_HIP] = hip_c + (-HIP_HALF, 0.0)

    for hip, knee, ankle, a, b in (
        (R_HIP, R_KNEE, R_ANKLE, leg_r, shin_r),
        (L_HIP, L_KNEE, L_ANKLE, leg_l, shin_l),
    ):
        pts[knee] = pts[hip] + THIGH * np.array([math.sin(a), math.cos(a)])
        pts[ankle] = pts[knee] + SHIN * np.array([math.sin(b), math.cos(b)])

    neck = hip_c + np.array([0.0, -TORSO])
    pts[NECK] = neck
    pts[R_SHOULDER] = neck + (SHOULDER_HALF, 2.0)
    pts[L_SHOULDER] = neck + (-SHOULDER_HALF, 2.0)

    for sho, elbow, wrist, c in (
        (R_SHOULDER, R_ELBOW, R_WRIST, arm_r),
        (L_SHOULDER, L_ELBOW, L_WRIST, arm_l),
    ):
        pts[elbow] = pts[sho] + UPPER_ARM * np.array([math.sin(c), math.cos(c)])
        bend = c + 0.25
        pts[wrist] = pts[elbow] + FOREARM * np.array([math.sin(bend), math.cos(bend)])

    pts[NOSE] = neck + (0.0, -HEAD_RISE)
    pts[R_EYE] = pts[NOSE] + (5.0, -5.0)
    pts[L_EYE] = pts[NOSE] + (-5.0, -5.0)
    pts[R_EAR] = pts[NOSE] + (8.0, -2.0)
    pts[L_EAR] = pts[NOSE] + (-8.0, -2.0)
    return pts


def synth_motion(script: MotionScript) -> tuple[TrackedSequence, VideoAnnotation]:
    """Generate one scripted sequence plus its frame-stamp annotation.

    Identical scripts produce identical output.
    """
    rng = np.random.default_rng(script.seed)
    scale = 1.0 + rng.uniform(-0.3, 0.3)
    facing = 1.0 if rng.uniform() < 0.5 else -1.0
    x0 = rng.uniform(90.0, 230.0)
    y0 = rng.uniform(180.0, 225.0)
    sway_phase = rng.uniform(0.0, 2.0 * math.pi)
    walk_phase = rng.uniform(0.0, 2.0 * math.pi)
    walk_period = rng.uniform(24.0, 30.0)
    walk_speed = 2.0 * scale

    phases = _phases(script)
    frames = []
    for t in range(script.duration):
        frame_index = t + 1
        sway = 0.04 * math.sin(2.0 * math.pi * t / 90.0 + sway_phase)
        leg_r = leg_l = 0.0
        shin_r = shin_l = 0.0
        arm_r = 0.06 * math.sin(2.0 * math.pi * t / 70.0 + sway_phase)
        arm_l = -arm_r
        bob = 0.0
        ground_x = x0

        if script.kind == MotionKind.WALK:
            phi = 2.0 * math.pi * t / walk_period + walk_phase
            leg_r = 0.45 * math.sin(phi)
            leg_l = 0.45 * math.sin(phi + math.pi)
            shin_r = leg_r - 0.5 * max(0.0, math.sin(phi - 0.9))
            shin_l = leg_l - 0.5 * max(0.0, math.sin(phi - 0.9 + math.pi))
            arm_r = 0.35 * math.sin(phi + math.pi)
            arm_l = 0.35 * math.sin(phi)
            bob = 1.5 * math.sin(2.0 * phi)
            ground_x = x0 + facing * walk_speed * t
        else:
            shin_r = leg_r
            shin_l = leg_l

        tilt = sway
        if phases is not None:
            tilt = sway + _fall_tilt(frame_index, phases)
            if (phases.rise_start is not None
                    and phases.rise_start - STIR_FRAMES <= frame_index < phases.rise_start):
                # stirring while down: arm movement announces the getting-up
                k = frame_index - (phases.rise_start - STIR_FRAMES)
                arm_r += 0.35 * math.sin(2.0 * math.pi * k / 16.0)
                arm_l += 0.35 * math.sin(2.0 * math.pi * k / 16.0 + math.pi / 2)

        pts = _build_points(leg_r, leg_l, shin_r, shin_l, arm_r, arm_l, bob)
        theta = facing * tilt
        rot = np.array([[math.cos(theta), -math.sin(theta)],
                        [math.sin(theta), math.cos(theta)]])
        world = (pts * scale) @ rot.T + np.array([ground_x, y0])

        noise = rng.normal(0.0, script.noise_std, size=(NUM_KEYPOINTS, 2))
        occluded = rng.uniform(size=NUM_KEYPOINTS) < script.occlusion_rate
        world = world + noise

        keypoints = tuple(
            Keypoint.missing() if occluded[m]
            else Keypoint(float(world[m, 0]), float(world[m, 1]), True)
            for m in range(NUM_KEYPOINTS)
        )
        frames.append(SkeletonFrame(keypoints, frame_index, track_id=0))

    seq = TrackedSequence(track_id=0, frames=tuple(frames), source_id="")
    ann = _annotation(script, phases)
    return seq, ann


def _annotation(script: MotionScript, phases: _Phases | None) -> VideoAnnotation:
    if phases is None:
        return VideoAnnotation(0, 0, 0, script.duration)
    s_fs = phases.collapse_start
    s_fe = phases.lying_start - 1  # last collapse frame reaches full lying tilt
    # Getting-up stamp: the last fully fallen frame (the whole video when the
    # actor never rises).
    s_gu = script.duration if phases.rise_start is None else phases.rise_start - 1
    return VideoAnnotation(s_fs, s_fe, s_gu, script.duration)


ALL_KINDS = (MotionKind.UPRIGHT_IDLE, MotionKind.WALK,
             MotionKind.FALL_AND_LIE, MotionKind.FALL_AND_RISE)


def generate_corpus(count: int, seed: int = 0, noise_std: float = 1.0,
                    occlusion_rate: float = 0.02,
                    kinds: tuple[MotionKind, ...] = ALL_KINDS,
                    duration_range: tuple[int, int] = (255, 310),
                    ) -> list[tuple[str, TrackedSequence, VideoAnnotation]]:
    """A corpus of sequences cycling through ``kinds`` (balanced by count).

    Per-sequence seeds derive from the corpus seed, so the corpus is fully
    reproducible and any subrange is stable.
    """
    if count < 1:
        raise ValueError("count must be positive")
    master = np.random.default_rng([seed, 0xC0FFEE])
    out = []
    for i in range(count):
        kind = kinds[i % len(kinds)]
        duration = int(master.integers(duration_range[0], duration_range[1] + 1))
        script = MotionScript(
            kind=kind, duration=duration, noise_std=noise_std,
            occlusion_rate=occlusion_rate, seed=int(master.integers(0, 2**31 - 1)),
        )
        seq, ann = synth_motion(script)
        source_id = f"synth_{i:04d}_{kind.value}"
        seq = TrackedSequence(seq.track_id, seq.frames, source_id)
        out.append((source_id, seq, ann))
    return out
