"""End-to-end inference: forecast-then-classify and classify-directly modes.

A forecast verdict for frame i uses only the observation window that ends
t_pred frames earlier, so every fall verdict is issued t_pred frames ahead
of the frame it describes. The direct mode classifies each frame's own pose
vector and serves as the non-anticipating baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classifier import (
    ClassifierParams,
    EvalMetrics,
    FallLabel,
    classify,
    evaluate,
    prejudge_or_classify_vector,
)
from .predictor import PredictorConfig, PredictorParams, predict_batch
from .skeleton import coco_topology
from .vectorize import is_classifiable, renormalize, vectorize_sequence

BASIS_FORECAST = "forecast"
BASIS_DIRECT = "direct"


@dataclass(frozen=True)
class PipelineConfig:
    predictor: PredictorParams
    classifier: ClassifierParams
    config: PredictorConfig
    emit_unknowns: bool = False

    def __post_init__(self) -> None:
        if (self.predictor.encoder.hidden_size != self.config.hidden_size
                or self.predictor.encoder.input_size != self.config.package_dim):
            raise ValueError("predictor weights do not match the pipeline configuration")


@dataclass(frozen=True)
class FrameVerdict:
    source_id: str
    track_id: int
    frame_index: int
    label: FallLabel
    p_no_fall: float
    p_fall: float
    basis: str

    def key(self) -> tuple[str, int, int]:
        return (self.source_id, self.track_id, self.frame_index)


def run_forecast_pipeline(cfg: PipelineConfig, segments) -> list[FrameVerdict]:
    """Forecast-based verdicts for every frame with a full observation window.

    For frame i the observed window is [i - t_obs - t_pred + 1, i - t_pred];
    the forecast pose at offset t_pred (frame i itself) is renormalized and
    classified. Frames whose window is incomplete produce no verdict.
    """
    t_obs = cfg.config.t_obs
    t_pred = cfg.config.t_pred
    verdicts: list[FrameVerdict] = []
    topology = coco_topology()
    for seg in segments:
        pose_seq = vectorize_sequence(seg, topology)
        index_of = {fi: pos for pos, fi in enumerate(pose_seq.frame_indices)}
        targets = []
        windows = []
        for fi in pose_seq.frame_indices:
            start = fi - t_pred - t_obs + 1
            positions = [index_of.get(start + k) for k in range(t_obs)]
            if any(p is None for p in positions):
                continue
            targets.append(fi)
            windows.append(pose_seq.vectors[positions])
        if not targets:
            continue
        predicted = predict_batch(cfg.predictor, cfg.config, np.stack(windows))
        for fi, pred in zip(targets, predicted):
            vec = renormalize(pred[-1])
            label, probs = prejudge_or_classify_vector(cfg.classifier, vec)
            p_no_fall, p_fall = (math.nan, math.nan) if probs is None else (probs[0], probs[1])
            verdicts.append(FrameVerdict(
                source_id=seg.source_id, track_id=seg.track_id, frame_index=fi,
                label=label, p_no_fall=float(p_no_fall), p_fall=float(p_fall),
                basis=BASIS_FORECAST,
            ))
    return verdicts


def run_direct_pipeline(cfg: PipelineConfig, segments) -> list[FrameVerdict]:
    """Classify each frame's own pose vector (no anticipation)."""
    verdicts: list[FrameVerdict] = []
    topology = coco_topology()
    for seg in segments:
        pose_seq = vectorize_sequence(seg, topology)
        for frame, vector in zip(seg.frames, pose_seq.vectors):
            if not is_classifiable(frame):
                label, p_no_fall, p_fall = FallLabel.UNKNOWN, math.nan, math.nan
            else:
                label, probs = classify(cfg.classifier, vector)
                p_no_fall, p_fall = float(probs[0]), float(probs[1])
            verdicts.append(FrameVerdict(
                source_id=seg.source_id, track_id=seg.track_id,
                frame_index=frame.frame_index,
                label=label, p_no_fall=p_no_fall, p_fall=p_fall,
                basis=BASIS_DIRECT,
            ))
    return verdicts


@dataclass(frozen=True)
class ModeComparison:
    direct: EvalMetrics
    forecast: EvalMetrics
    n_common: int


def compare_modes(direct, forecast, truth: dict) -> ModeComparison:
    """Evaluate both verdict sets on their common frames.

    ``truth`` maps (source_id, frame_index) to the ground-truth label.
    """
    direct_by_key = {v.key(): v for v in direct}
    forecast_by_key = {v.key(): v for v in forecast}
    common = sorted(k for k in direct_by_key if k in forecast_by_key
                    and (k[0], k[2]) in truth)
    if not common:
        raise ValueError("the verdict sets share no frames with ground truth")
    truth_labels = [truth[(k[0], k[2])] for k in common]
    d_metrics = evaluate([direct_by_key[k].label for k in common], truth_labels)
    f_metrics = evaluate([forecast_by_key[k].label for k in common], truth_labels)
    return ModeComparison(direct=d_metrics, forecast=f_metrics, n_common=len(common))


# ---------------------------------------------------------------------------
# Verdict streams.

VERDICT_HEADER = "source_id,track_id,frame,label,p_fall,basis"


def write_verdicts(path, verdicts, emit_unknowns: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(VERDICT_HEADER + "\n")
        for v in verdicts:
            if v.label == FallLabel.UNKNOWN and not emit_unknowns:
                continue
            fh.write(f"{v.source_id},{v.track_id},{v.frame_index},"
                     f"{v.label.value},{repr(v.p_fall)},{v.basis}\n")


def read_verdicts(path) -> list[FrameVerdict]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != VERDICT_HEADER:
            raise ValueError(f"unexpected verdict header: {header}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            source_id, track_id, frame, label, p_fall, basis = line.split(",")
            p = float(p_fall)
            out.append(FrameVerdict(
                source_id=source_id, track_id=int(track_id), frame_index=int(frame),
                label=FallLabel(label),
                p_no_fall=(1.0 - p) if math.isfinite(p) else math.nan,
                p_fall=p, basis=basis,
            ))
    return out
