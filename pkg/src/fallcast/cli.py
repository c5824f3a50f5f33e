"""Command-line surface: data synthesis, training, evaluation, inference.

Every command is deterministic given its flags and seed, accepts a JSON
config file via --config (explicit flags win), and writes a run manifest
next to its outputs. Exit codes: 0 success, 2 input/parse error, 3
configuration error, 4 failed check.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import autograd as ag
from . import nn
from .autograd import Tensor
from .classifier import (
    FallLabel, LabeledPose, evaluate, init_classifier, load_classifier,
    save_classifier, train_classifier,
)
from .dataset import (
    Principle, VideoAnnotation, frame_label, read_annotations, split,
    write_annotations,
)
from .ingest import ParseError, TrackedSequence, load_segments, load_tracked_sequences, write_pose_file
from .pipeline import (
    PipelineConfig, compare_modes, run_direct_pipeline, run_forecast_pipeline,
    write_verdicts,
)
from .predictor import (
    PredictorConfig, forward_seq2seq, init_predictor, load_predictor,
    make_training_windows, mcs, pad_mask, predict_batch, save_predictor,
    train_predictor,
)
from .skeleton import coco_topology, detected_body_count
from .synth import ALL_KINDS, MotionKind, generate_corpus
from .vectorize import POSE_DIM, vectorize_sequence, write_vector_table

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONFIG = 3
EXIT_CHECK = 4

DATA_DIR_ENV = "FALLCAST_DATA_DIR"

GRADCHECK_TOLERANCE = 1e-4


class ConfigError(Exception):
    pass


class CheckFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# Shared helpers.


def _resolve_data_dir(args) -> Path:
    data = getattr(args, "data", None) or os.environ.get(DATA_DIR_ENV)
    if not data:
        raise ConfigError(f"no data directory: pass --data or set {DATA_DIR_ENV}")
    path = Path(data)
    if not path.is_dir():
        raise ConfigError(f"data directory does not exist: {path}")
    return path


def _keypoint_files(data_dir: Path) -> list[Path]:
    base = data_dir / "keypoints"
    if not base.is_dir():
        base = data_dir
    files = sorted(p for p in base.glob("*.json") if p.name != "manifest.json")
    if not files:
        raise ValueError(f"no keypoint files under {base}")
    return files


def _load_all_segments(data_dir: Path) -> list[TrackedSequence]:
    segments: list[TrackedSequence] = []
    for path in _keypoint_files(data_dir):
        segments.extend(load_segments(path))
    if not segments:
        raise ValueError(f"no usable sequences in {data_dir}")
    return segments


def _annotations_path(args, data_dir: Path) -> Path:
    path = Path(args.annotations) if args.annotations else data_dir / "annotations.csv"
    if not path.is_file():
        raise ValueError(f"annotation file not found: {path}")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out_dir: Path, args, started: float,
                    inputs: list[str], outputs: list[str]) -> None:
    config = {k: v for k, v in sorted(vars(args).items())
              if k not in ("func", "config") and not k.startswith("_")}
    manifest = {
        "command": args.command,
        "tool_version": __version__,
        "config": {k: (str(v) if isinstance(v, Path) else v) for k, v in config.items()},
        "seeds": [config.get("seed")] if "seed" in config else [],
        "inputs": inputs,
        "outputs": outputs,
        "wall_clock_s": round(time.monotonic() - started, 3),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _write_loss_curve(path: Path, curve: list[float], steps_per_epoch: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,loss\n")
        for epoch, loss in enumerate(curve):
            fh.write(f"{(epoch + 1) * steps_per_epoch},{repr(float(loss))}\n")


def _labeled_poses(segments, annotations, principle: Principle) -> list[LabeledPose]:
    topology = coco_topology()
    samples = []
    for seg in segments:
        if seg.source_id not in annotations:
            raise ValueError(f"no annotation record for source '{seg.source_id}'")
        ann = annotations[seg.source_id]
        pose_seq = vectorize_sequence(seg, topology)
        for frame, vector in zip(seg.frames, pose_seq.vectors):
            samples.append(LabeledPose(
                vector=vector,
                label=frame_label(ann, frame.frame_index, principle),
                source_id=seg.source_id,
                frame_index=frame.frame_index,
                detected_body_count=detected_body_count(frame),
            ))
    return samples


def _truth_map(segments, annotations, principle: Principle) -> dict:
    truth = {}
    for seg in segments:
        ann = annotations.get(seg.source_id)
        if ann is None:
            raise ValueError(f"no annotation record for source '{seg.source_id}'")
        for frame in seg.frames:
            truth[(seg.source_id, frame.frame_index)] = frame_label(
                ann, frame.frame_index, principle)
    return truth


# ---------------------------------------------------------------------------
# Commands.


def cmd_synth(args) -> int:
    started = time.monotonic()
    out = _out_dir(args)
    kinds = ALL_KINDS
    if args.kinds:
        try:
            kinds = tuple(MotionKind(k.strip()) for k in args.kinds.split(","))
        except ValueError as e:
            raise ConfigError(f"unknown motion kind in --kinds: {e}") from e
    if args.duration_min > args.duration_max:
        raise ConfigError("--duration-min must not exceed --duration-max")
    corpus = generate_corpus(
        count=args.count, seed=args.seed, noise_std=args.noise_std,
        occlusion_rate=args.occlusion, kinds=kinds,
        duration_range=(args.duration_min, args.duration_max),
    )
    kp_dir = out / "keypoints"
    kp_dir.mkdir(exist_ok=True)
    annotations: dict[str, VideoAnnotation] = {}
    outputs = []
    for source_id, seq, ann in corpus:
        path = kp_dir / f"{source_id}.json"
        write_pose_file(path, [seq], source_id)
        annotations[source_id] = ann
        outputs.append(str(path))
    ann_path = out / "annotations.csv"
    write_annotations(ann_path, annotations)
    outputs.append(str(ann_path))
    _write_manifest(out, args, started, inputs=[], outputs=outputs)
    print(f"wrote {len(corpus)} sequences to {kp_dir} and {ann_path}")
    return EXIT_OK


def cmd_train_predictor(args) -> int:
    started = time.monotonic()
    data_dir = _resolve_data_dir(args)
    out = _out_dir(args)

    initial = None
    if args.resume:
        initial, resumed_config, _ = load_predictor(args.resume)
        flags = {"t_obs": args.t_obs, "t_pred": args.t_pred,
                 "n_p": args.np, "hidden_size": args.hidden}
        for key, value in flags.items():
            if value is not None and value != getattr(resumed_config, key):
                raise ConfigError(
                    f"--{key.replace('_', '-')} {value} conflicts with resumed model "
                    f"({key}={getattr(resumed_config, key)})")
        config = resumed_config
    else:
        config = PredictorConfig(
            t_obs=args.t_obs if args.t_obs is not None else 25,
            t_pred=args.t_pred if args.t_pred is not None else 50,
            n_p=args.np if args.np is not None else 5,
            hidden_size=args.hidden if args.hidden is not None else 256,
        )

    segments = _load_all_segments(data_dir)
    topology = coco_topology()
    pose_seqs = [vectorize_sequence(s, topology) for s in segments]
    windows = make_training_windows(pose_seqs, config)
    if not windows:
        raise ValueError(
            f"no training windows: no segment reaches {config.t_obs + config.t_pred} frames")
    if args.overfit:
        windows = windows[:args.overfit]
    elif args.max_windows and len(windows) > args.max_windows:
        keep = np.unique(np.linspace(0, len(windows) - 1, args.max_windows).astype(int))
        windows = [windows[i] for i in keep]

    batch = args.batch if not args.overfit else min(args.batch, len(windows))
    params, curve = train_predictor(
        windows, config, epochs=args.epochs, batch_size=batch,
        seed=args.seed, lr=args.lr, plateau_stop=not args.no_early_stop,
        initial=initial,
    )
    model_path = out / "predictor.json"
    save_predictor(model_path, params, config, seed=args.seed, lr=args.lr)
    loss_path = out / "loss.csv"
    _write_loss_curve(loss_path, curve, steps_per_epoch=math.ceil(len(windows) / batch))
    _write_manifest(out, args, started,
                    inputs=[str(data_dir)], outputs=[str(model_path), str(loss_path)])
    print(f"trained on {len(windows)} windows for {len(curve)} epochs; "
          f"final loss {curve[-1]:.6g}; model at {model_path}")
    return EXIT_OK


def cmd_train_classifier(args) -> int:
    started = time.monotonic()
    data_dir = _resolve_data_dir(args)
    out = _out_dir(args)
    principle = Principle(args.principle)
    annotations = read_annotations(_annotations_path(args, data_dir))
    segments = _load_all_segments(data_dir)
    samples = _labeled_poses(segments, annotations, principle)
    params, curve = train_classifier(
        samples, epochs=args.epochs, batch_size=args.batch,
        seed=args.seed, lr=args.lr,
    )
    model_path = out / "classifier.json"
    save_classifier(model_path, params, seed=args.seed, lr=args.lr,
                    principle=principle.value)
    loss_path = out / "loss.csv"
    usable = sum(1 for s in samples if s.detected_body_count >= 8)
    _write_loss_curve(loss_path, curve, steps_per_epoch=math.ceil(usable / args.batch))
    _write_manifest(out, args, started,
                    inputs=[str(data_dir)], outputs=[str(model_path), str(loss_path)])
    print(f"trained on {usable} labeled poses for {len(curve)} epochs; "
          f"final loss {curve[-1]:.6g}; model at {model_path}")
    return EXIT_OK


def _metrics_row(name: str, scope: str, m) -> str:
    return (f"{name:<10} {scope:<9} {m.accuracy:8.3f} {m.precision:8.3f} "
            f"{m.recall:8.3f} {m.f1:8.3f} {m.unknown_rate:8.3f}")


def _eval_mode(verdicts, truth) -> tuple:
    pairs = [(v.label, truth[(v.source_id, v.frame_index)])
             for v in verdicts if (v.source_id, v.frame_index) in truth]
    if not pairs:
        raise ValueError("no verdict overlaps the annotated frames")
    preds = [p for p, _ in pairs]
    labels = [t for _, t in pairs]
    all_metrics = evaluate(preds, labels)
    known = [(p, t) for p, t in pairs if p != FallLabel.UNKNOWN]
    known_metrics = evaluate([p for p, _ in known], [t for _, t in known]) if known else None
    return all_metrics, known_metrics


def cmd_eval(args) -> int:
    started = time.monotonic()
    data_dir = _resolve_data_dir(args)
    out = _out_dir(args)
    classifier_params, _ = load_classifier(args.classifier)
    annotations = read_annotations(_annotations_path(args, data_dir))
    segments = _load_all_segments(data_dir)
    principle = Principle(args.principle)
    truth = _truth_map(segments, annotations, principle)

    if args.mode in ("forecast", "both"):
        if not args.predictor:
            raise ConfigError("--predictor is required for forecast evaluation")
        predictor_params, config, _ = load_predictor(args.predictor)
    else:
        # direct-only evaluation never invokes the forecaster
        config = PredictorConfig(hidden_size=8)
        predictor_params = init_predictor(config, seed=0)
    cfg = PipelineConfig(
        predictor=predictor_params,
        classifier=classifier_params,
        config=config,
        emit_unknowns=args.emit_unknowns,
    )

    lines = [f"{'mode':<10} {'scope':<9} {'acc':>8} {'prec':>8} {'rec':>8} "
             f"{'f1':>8} {'unk':>8}"]
    rows = []
    outputs = []
    direct = forecast = None
    if args.mode in ("direct", "both"):
        direct = run_direct_pipeline(cfg, segments)
        path = out / "verdicts_direct.csv"
        write_verdicts(path, direct, emit_unknowns=args.emit_unknowns)
        outputs.append(str(path))
        m_all, m_known = _eval_mode(direct, truth)
        lines.append(_metrics_row("direct", "all", m_all))
        rows.append(("direct", "all", m_all))
        if m_known:
            lines.append(_metrics_row("direct", "known", m_known))
            rows.append(("direct", "known", m_known))
    if args.mode in ("forecast", "both"):
        forecast = run_forecast_pipeline(cfg, segments)
        path = out / "verdicts_forecast.csv"
        write_verdicts(path, forecast, emit_unknowns=args.emit_unknowns)
        outputs.append(str(path))
        m_all, m_known = _eval_mode(forecast, truth)
        lines.append(_metrics_row("forecast", "all", m_all))
        rows.append(("forecast", "all", m_all))
        if m_known:
            lines.append(_metrics_row("forecast", "known", m_known))
            rows.append(("forecast", "known", m_known))
    if args.mode == "both":
        comparison = compare_modes(direct, forecast,
                                   {k: v for k, v in truth.items()})
        lines.append(_metrics_row("direct", "common", comparison.direct))
        lines.append(_metrics_row("forecast", "common", comparison.forecast))
        rows.append(("direct", "common", comparison.direct))
        rows.append(("forecast", "common", comparison.forecast))

    report = "\n".join(lines)
    print(report)
    metrics_path = out / "metrics.csv"
    with open(metrics_path, "w", encoding="utf-8") as fh:
        fh.write("mode,scope,accuracy,precision,recall,f1,unknown_rate,tp,fp,fn,tn\n")
        for name, scope, m in rows:
            fh.write(f"{name},{scope},{repr(m.accuracy)},{repr(m.precision)},"
                     f"{repr(m.recall)},{repr(m.f1)},{repr(m.unknown_rate)},"
                     f"{m.tp},{m.fp},{m.fn},{m.tn}\n")
    outputs.append(str(metrics_path))
    _write_manifest(out, args, started, inputs=[str(data_dir)], outputs=outputs)
    return EXIT_OK


def cmd_sweep(args) -> int:
    started = time.monotonic()
    data_dir = _resolve_data_dir(args)
    out = _out_dir(args)
    try:
        combos = []
        for part in args.configs.split(","):
            t_obs, t_pred = part.strip().split(":")
            combos.append((int(t_obs), int(t_pred)))
        np_values = [int(v) for v in args.np_values.split(",")]
    except ValueError as e:
        raise ConfigError(f"bad sweep grid: {e}") from e

    segments = _load_all_segments(data_dir)
    train_segs, test_segs = split(segments, ratio=0.7, seed=args.seed, grouped=True)
    topology = coco_topology()
    train_seqs = [vectorize_sequence(s, topology) for s in train_segs]
    test_seqs = [vectorize_sequence(s, topology) for s in test_segs]

    results = []
    for t_obs, t_pred in combos:
        for n_p in np_values:
            config = PredictorConfig(t_obs=t_obs, t_pred=t_pred, n_p=n_p,
                                     hidden_size=args.hidden)
            windows = make_training_windows(train_seqs, config)
            test_windows = make_training_windows(test_seqs, config)
            if not windows or not test_windows:
                raise ValueError(
                    f"no windows for ({t_obs},{t_pred}): sequences too short")
            if args.max_windows and len(windows) > args.max_windows:
                keep = np.unique(np.linspace(0, len(windows) - 1, args.max_windows).astype(int))
                windows = [windows[i] for i in keep]
            params, _ = train_predictor(windows, config, epochs=args.epochs,
                                        batch_size=args.batch, seed=args.seed,
                                        lr=args.lr)
            obs = np.stack([w[0] for w in test_windows])
            tgt = [w[1] for w in test_windows]
            pred = predict_batch(params, config, obs)
            value = mcs(tgt, list(pred))
            results.append(((t_obs, t_pred), n_p, value))
            print(f"(t_obs={t_obs}, t_pred={t_pred}) n_p={n_p}: MCS={value:.4f}")

    table_path = out / "mcs_sweep.csv"
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write("t_obs,t_pred,n_p,mcs\n")
        for (t_obs, t_pred), n_p, value in results:
            fh.write(f"{t_obs},{t_pred},{n_p},{repr(value)}\n")

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for combo in combos:
        xs = [n_p for c, n_p, _ in results if c == combo]
        ys = [v for c, _, v in results if c == combo]
        ax.plot(xs, ys, marker="o", label=f"({combo[0]}, {combo[1]})")
    ax.set_xlabel("n_p")
    ax.set_ylabel("MCS")
    ax.set_title("Forecast quality by packing width")
    ax.legend()
    fig.tight_layout()
    plot_path = out / "mcs_sweep.svg"
    fig.savefig(plot_path)
    plt.close(fig)

    _write_manifest(out, args, started, inputs=[str(data_dir)],
                    outputs=[str(table_path), str(plot_path)])
    print(f"sweep table at {table_path}, plot at {plot_path}")
    return EXIT_OK


def cmd_infer(args) -> int:
    started = time.monotonic()
    input_path = Path(args.input)
    if not input_path.is_file():
        raise ValueError(f"keypoint file not found: {input_path}")
    classifier_params, _ = load_classifier(args.classifier)
    if args.mode in ("forecast", "both"):
        if not args.predictor:
            raise ConfigError("--predictor is required for forecast inference")
        predictor_params, config, _ = load_predictor(args.predictor)
    else:
        config = PredictorConfig(hidden_size=8)
        predictor_params = init_predictor(config, seed=0)

    segments = load_segments(input_path)
    if not segments:
        raise ValueError(f"no usable sequences in {input_path}")

    cfg = PipelineConfig(
        predictor=predictor_params,
        classifier=classifier_params, config=config,
        emit_unknowns=args.emit_unknowns,
    )
    verdicts = []
    if args.mode in ("direct", "both"):
        verdicts.extend(run_direct_pipeline(cfg, segments))
    if args.mode in ("forecast", "both"):
        verdicts.extend(run_forecast_pipeline(cfg, segments))

    if args.out:
        out = _out_dir(args)
        path = out / "verdicts.csv"
        write_verdicts(path, verdicts, emit_unknowns=args.emit_unknowns)
        _write_manifest(out, args, started,
                        inputs=[str(input_path)], outputs=[str(path)])
        print(f"wrote {path}")
    else:
        from .pipeline import VERDICT_HEADER
        print(VERDICT_HEADER)
        for v in verdicts:
            if v.label == FallLabel.UNKNOWN and not args.emit_unknowns:
                continue
            print(f"{v.source_id},{v.track_id},{v.frame_index},"
                  f"{v.label.value},{repr(v.p_fall)},{v.basis}")
    return EXIT_OK


def _seq2seq_gradcheck(hidden: int, n_p: int, t_obs: int, t_pred: int,
                       seed: int, corrupt: bool) -> float:
    config = PredictorConfig(t_obs=t_obs, t_pred=t_pred, n_p=n_p, hidden_size=hidden)
    rng = np.random.default_rng(seed)
    obs = rng.uniform(-1.0, 1.0, size=(1, t_obs, POSE_DIM))
    tgt = rng.uniform(-1.0, 1.0, size=(t_pred, POSE_DIM))
    k_pred = config.n_pred_steps
    tgt_padded = np.zeros((k_pred * n_p, POSE_DIM))
    tgt_padded[:t_pred] = tgt
    tgt_pkgs = tgt_padded.reshape(k_pred, config.package_dim)
    mask = pad_mask(t_pred, n_p)
    params = init_predictor(config, seed)

    from .predictor import _batch_obs_steps

    def loss_fn(tensors):
        obs_steps = _batch_obs_steps(obs, config)
        single = [Tensor(s.data[:, 0]) for s in obs_steps]
        outputs = forward_seq2seq(tensors, single, k_pred, hidden)
        loss = None
        for j, out_j in enumerate(outputs):
            term = ag.sum_sq_err(out_j, tgt_pkgs[j], mask[j])
            loss = term if loss is None else ag.add(loss, term)
        loss = ag.scale(loss, 1.0 / (t_pred * POSE_DIM))
        if corrupt:
            loss = ag.add(loss, Tensor(0.05 * float(np.sum(tensors["encoder.W_i"].data))))
        return loss

    return nn.grad_check(loss_fn, params.arrays())


def _classifier_gradcheck(seed: int, corrupt: bool) -> float:
    rng = np.random.default_rng(seed)
    vector = rng.uniform(-1.0, 1.0, size=POSE_DIM)
    params = init_classifier(seed)

    from .classifier import _forward_t

    def loss_fn(tensors):
        out = _forward_t(tensors, Tensor(vector))
        loss = ag.cross_entropy(out, 1)
        if corrupt:
            loss = ag.add(loss, Tensor(0.05 * float(np.sum(tensors["layer0.W"].data))))
        return loss

    return nn.grad_check(loss_fn, params.arrays())


def cmd_gradcheck(args) -> int:
    seq_err = _seq2seq_gradcheck(args.hidden, args.np, args.t_obs, args.t_pred,
                                 args.seed, args.corrupt)
    cls_err = _classifier_gradcheck(args.seed, args.corrupt)
    ok = seq_err < GRADCHECK_TOLERANCE and cls_err < GRADCHECK_TOLERANCE
    print(f"seq2seq max relative error:    {seq_err:.3e} "
          f"({'PASS' if seq_err < GRADCHECK_TOLERANCE else 'FAIL'})")
    print(f"classifier max relative error: {cls_err:.3e} "
          f"({'PASS' if cls_err < GRADCHECK_TOLERANCE else 'FAIL'})")
    if not ok:
        raise CheckFailure(f"gradient check failed (tolerance {GRADCHECK_TOLERANCE:g})")
    return EXIT_OK


def cmd_dump_vectors(args) -> int:
    input_path = Path(args.input)
    if not input_path.is_file():
        raise ValueError(f"keypoint file not found: {input_path}")
    tracks = load_tracked_sequences(input_path)
    if not tracks:
        raise ValueError(f"no people in {input_path}")
    topology = coco_topology()
    out_base = Path(args.out) if args.out else input_path.with_suffix(".csv")
    written = []
    for track in tracks:
        seq = vectorize_sequence(track, topology)
        if len(tracks) == 1:
            path = out_base
        else:
            path = out_base.with_name(f"{out_base.stem}_track{track.track_id}{out_base.suffix}")
        write_vector_table(path, seq)
        written.append(str(path))
    print("\n".join(written))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser.


def _add_common_training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lr", type=float, default=0.001, help="Adam learning rate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch", type=int, default=32)


def build_parser(overrides: dict | None = None) -> argparse.ArgumentParser:
    """Build the CLI parser; ``overrides`` become per-subcommand defaults.

    Subcommand parsers resolve their own defaults, so config-file values are
    installed into every subparser that has a matching flag. Explicit flags
    always win. Keys that match no subcommand are ignored (a shared config
    file may cover several commands).
    """
    parser = argparse.ArgumentParser(
        prog="fallcast",
        description="Early fall prediction from 2D body-keypoint sequences.",
    )
    parser.add_argument("--config", help="JSON file of default flag values (flags win)")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic keypoint corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--noise-std", type=float, default=1.0, dest="noise_std")
    p.add_argument("--occlusion", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration-min", type=int, default=255, dest="duration_min")
    p.add_argument("--duration-max", type=int, default=310, dest="duration_max")
    p.add_argument("--kinds", default="", help="comma-separated motion kinds")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-predictor", help="fit the pose forecaster")
    p.add_argument("--data", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--t-obs", type=int, default=None, dest="t_obs")
    p.add_argument("--t-pred", type=int, default=None, dest="t_pred")
    p.add_argument("--np", type=int, default=None, dest="np")
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--overfit", type=int, default=0,
                   help="train on only the first N windows")
    p.add_argument("--max-windows", type=int, default=0, dest="max_windows")
    p.add_argument("--no-early-stop", action="store_true", dest="no_early_stop")
    p.add_argument("--resume", default=None, help="continue from a model file")
    _add_common_training_flags(p)
    p.set_defaults(func=cmd_train_predictor)

    p = sub.add_parser("train-classifier", help="fit the fall classifier")
    p.add_argument("--data", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--annotations", default=None)
    p.add_argument("--principle", choices=["p1", "p2", "p3"], default="p3")
    p.add_argument("--epochs", type=int, default=30)
    _add_common_training_flags(p)
    p.set_defaults(func=cmd_train_classifier)

    p = sub.add_parser("eval", help="evaluate models on an annotated corpus")
    p.add_argument("--data", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--predictor", default=None)
    p.add_argument("--classifier", required=True)
    p.add_argument("--annotations", default=None)
    p.add_argument("--mode", choices=["direct", "forecast", "both"], default="both")
    p.add_argument("--principle", choices=["p1", "p2", "p3"], default="p3")
    p.add_argument("--emit-unknowns", action="store_true", dest="emit_unknowns")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="MCS over packing widths and window configs")
    p.add_argument("--data", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--configs", default="25:25,25:50,10:50",
                   help="comma-separated t_obs:t_pred pairs")
    p.add_argument("--np-values", default="1,5,10", dest="np_values")
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--max-windows", type=int, default=0, dest="max_windows")
    _add_common_training_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("infer", help="verdict stream for one keypoint file")
    p.add_argument("--input", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--predictor", default=None)
    p.add_argument("--mode", choices=["direct", "forecast", "both"], default="forecast")
    p.add_argument("--emit-unknowns", action="store_true", dest="emit_unknowns")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("gradcheck", help="taped gradients vs central differences")
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--np", type=int, default=2, dest="np")
    p.add_argument("--t-obs", type=int, default=4, dest="t_obs")
    p.add_argument("--t-pred", type=int, default=4, dest="t_pred")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corrupt", action="store_true",
                   help="self-test: corrupt the loss so the check must fail")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("dump-vectors", help="pose-vector table for one keypoint file")
    p.add_argument("--input", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_dump_vectors)

    if overrides:
        for sp in sub.choices.values():
            valid = {a.dest for a in sp._actions}
            matched = {k: v for k, v in overrides.items() if k in valid}
            if matched:
                sp.set_defaults(**matched)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)

    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    pre_args, _ = pre.parse_known_args(argv)

    overrides = None
    if pre_args.config:
        try:
            with open(pre_args.config, "r", encoding="utf-8") as fh:
                overrides = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            print(f"error: cannot read config file: {e}", file=sys.stderr)
            return EXIT_CONFIG
        if not isinstance(overrides, dict):
            print("error: config file must hold a JSON object", file=sys.stderr)
            return EXIT_CONFIG

    parser = build_parser(overrides)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckFailure as e:
        print(f"check failed: {e}", file=sys.stderr)
        return EXIT_CHECK
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except BrokenPipeError:
        # the stdout consumer went away (e.g. piped into head)
        try:
            sys.stdout.close()
        except OSError:
            pass
        return EXIT_OK
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
