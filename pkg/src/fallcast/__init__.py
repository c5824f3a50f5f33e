"""Early fall prediction from 2D body-keypoint sequences.

The pipeline: parse per-frame keypoints, associate them into per-person
tracks, turn each skeleton into 12 unit direction vectors, forecast future
pose vectors with a packed seq2seq LSTM, and classify the forecast pose as
fall / no-fall, issuing every fall verdict t_pred frames in advance.
"""

from .classifier import (
    ClassifierParams,
    EvalMetrics,
    FallLabel,
    LabeledPose,
    classify,
    evaluate,
    prejudge_or_classify,
    train_classifier,
)
from .dataset import ClipLabel, Principle, VideoAnnotation, clip_label, frame_labels, split
from .ingest import (
    DetectionBox,
    FormatError,
    ParseError,
    TrackedSequence,
    associate_tracks,
    parse_pose_frames,
    segment_sequences,
)
from .nn import AdamState, LinearParams, LstmCellParams, LstmState, adam_update, grad_check
from .pipeline import (
    FrameVerdict,
    PipelineConfig,
    compare_modes,
    run_direct_pipeline,
    run_forecast_pipeline,
)
from .predictor import (
    PackedSequence,
    PredictorConfig,
    PredictorParams,
    decode,
    encode,
    make_training_windows,
    mcs,
    pack,
    predict,
    train_predictor,
    unpack,
)
from .skeleton import Keypoint, SkeletonFrame, SkeletonTopology, coco_topology, detected_body_count
from .synth import MotionKind, MotionScript, generate_corpus, synth_motion
from .vectorize import PoseVectorSequence, is_classifiable, vectorize_frame, vectorize_sequence

__version__ = "0.1.0"
