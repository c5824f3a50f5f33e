import dataclasses

import pytest

from fallcast.classifier import FallLabel, init_classifier
from fallcast.ingest import TrackedSequence
from fallcast.pipeline import (
    BASIS_DIRECT,
    BASIS_FORECAST,
    PipelineConfig,
    compare_modes,
    read_verdicts,
    run_direct_pipeline,
    run_forecast_pipeline,
    write_verdicts,
)
from fallcast.predictor import PredictorConfig, init_predictor
from fallcast.skeleton import NUM_KEYPOINTS, Keypoint
from fallcast.synth import MotionKind, MotionScript, synth_motion


def pipeline_config(t_obs=25, t_pred=50, n_p=5, hidden=8):
    config = PredictorConfig(t_obs, t_pred, n_p, hidden_size=hidden)
    return PipelineConfig(
        predictor=init_predictor(config, seed=0),
        classifier=init_classifier(seed=0),
        config=config,
    )


def walk_segment(n_frames, seed=0, source_id="clip"):
    seq, _ = synth_motion(MotionScript(MotionKind.WALK, n_frames, 0.5, 0.0, seed=seed))
    return TrackedSequence(seq.track_id, seq.frames, source_id)


def test_forecast_verdict_window_arithmetic():
    cfg = pipeline_config()
    verdicts = run_forecast_pipeline(cfg, [walk_segment(100)])
    assert len(verdicts) == 26
    assert [v.frame_index for v in verdicts] == list(range(75, 101))
    assert all(v.basis == BASIS_FORECAST for v in verdicts)
    assert all(v.frame_index >= 75 for v in verdicts)


def test_forecast_no_verdicts_for_short_segment():
    cfg = pipeline_config()
    assert run_forecast_pipeline(cfg, [walk_segment(74)]) == []


def test_forecast_skips_windows_crossing_index_gaps():
    cfg = pipeline_config()
    seg = walk_segment(120)
    # remove frames 30..38 (gap of 9, segment stays whole)
    kept = tuple(f for f in seg.frames if not 30 <= f.frame_index <= 38)
    gappy = TrackedSequence(seg.track_id, kept, seg.source_id)
    verdicts = run_forecast_pipeline(cfg, [gappy])
    frames = {v.frame_index for v in verdicts}
    # any verdict whose window [i-74, i-50] overlaps the gap must be absent
    for i in range(80, 113):
        assert i not in frames
    assert 79 in frames and 113 in frames and 120 in frames


def test_direct_pipeline_emits_verdict_per_frame():
    cfg = pipeline_config()
    seg = walk_segment(50)
    verdicts = run_direct_pipeline(cfg, [seg])
    assert len(verdicts) == 50
    assert all(v.basis == BASIS_DIRECT for v in verdicts)
    assert all(v.label in (FallLabel.FALL, FallLabel.NO_FALL) for v in verdicts)


def test_direct_pipeline_prejudges_sparse_frames():
    cfg = pipeline_config()
    seg = walk_segment(30)
    sparse = []
    for f in seg.frames:
        kps = list(f.keypoints)
        for i in range(6, NUM_KEYPOINTS):
            kps[i] = Keypoint.missing()
        sparse.append(dataclasses.replace(f, keypoints=tuple(kps)))
    seg2 = TrackedSequence(seg.track_id, tuple(sparse), "sparse")
    verdicts = run_direct_pipeline(cfg, [seg2])
    assert all(v.label == FallLabel.UNKNOWN for v in verdicts)


def test_forecast_precognition_by_truncation():
    """The verdict at frame i only uses frames up to i - t_pred.

    Everything after the observation window is dropped and frame i itself is
    replaced by stale content, so the verdict cannot draw on anything newer
    than frame i - 50.
    """
    cfg = pipeline_config()
    seg = walk_segment(120)
    full = {v.frame_index: v for v in run_forecast_pipeline(cfg, [seg])}
    i = 100
    kept = [f for f in seg.frames if f.frame_index <= i - 50]
    stale = dataclasses.replace(kept[-1], frame_index=i)
    truncated = TrackedSequence(seg.track_id, tuple(kept) + (stale,), seg.source_id)
    trunc = {v.frame_index: v for v in run_forecast_pipeline(cfg, [truncated])}
    assert i in trunc
    assert trunc[i].label == full[i].label
    assert trunc[i].p_fall == full[i].p_fall


def test_pipeline_deterministic():
    cfg = pipeline_config()
    seg = walk_segment(90)
    a = run_forecast_pipeline(cfg, [seg])
    b = run_forecast_pipeline(cfg, [seg])
    assert a == b


def test_compare_modes_identical_verdicts_identical_rows():
    cfg = pipeline_config()
    seg = walk_segment(100)
    direct = run_direct_pipeline(cfg, [seg])
    forecast = run_forecast_pipeline(cfg, [seg])
    truth = {("clip", i): FallLabel.NO_FALL for i in range(1, 101)}
    comparison = compare_modes(direct, direct, truth)
    assert comparison.direct == comparison.forecast
    comparison = compare_modes(direct, forecast, truth)
    assert comparison.n_common == len(forecast)


def test_compare_modes_requires_overlap():
    cfg = pipeline_config()
    direct = run_direct_pipeline(cfg, [walk_segment(30)])
    with pytest.raises(ValueError):
        compare_modes(direct, [], {})


def test_verdict_stream_roundtrip(tmp_path):
    cfg = pipeline_config()
    verdicts = run_forecast_pipeline(cfg, [walk_segment(90)])
    path = tmp_path / "verdicts.csv"
    write_verdicts(path, verdicts)
    loaded = read_verdicts(path)
    assert len(loaded) == len(verdicts)
    for a, b in zip(verdicts, loaded):
        assert a.key() == b.key()
        assert a.label == b.label
        assert a.p_fall == b.p_fall
        assert a.basis == b.basis


def test_verdict_stream_unknown_filter(tmp_path):
    v_known = run_direct_pipeline(pipeline_config(), [walk_segment(20)])
    unknown = dataclasses.replace(v_known[0], label=FallLabel.UNKNOWN,
                                  p_fall=float("nan"), p_no_fall=float("nan"))
    path = tmp_path / "verdicts.csv"
    write_verdicts(path, [unknown] + v_known[1:], emit_unknowns=False)
    assert len(read_verdicts(path)) == len(v_known) - 1
    write_verdicts(path, [unknown] + v_known[1:], emit_unknowns=True)
    assert len(read_verdicts(path)) == len(v_known)
