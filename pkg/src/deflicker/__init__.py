"""Blind video temporal consistency by per-video generator training.

Given an original clip and a flickering per-frame-processed version, a
convolutional generator is trained from scratch on that single pair; stopped
early, its outputs keep the processed look while dropping the temporal
artifacts.  Dual-head reweighted training handles processed clips that jump
between distinct solution modes.
"""

from .video import VideoClip, load_clip, save_clip, frame_distance_l1
from .flow import (
    FlowSet,
    FlowFormatError,
    backward_warp,
    occlusion_from_flows,
    synth_translation_flows,
    read_flow_file,
    write_flow_file,
)
from .metrics import (
    EmptyMaskError,
    MetricsReport,
    MetricsTrace,
    e_pair,
    e_warp,
    evaluate_clip,
    f_data,
    mean_intensity_trace,
    psnr,
    write_metrics_csv,
)
from .network import (
    Generator,
    GeneratorConfig,
    forward_frame,
    init_generator,
    load_checkpoint,
    loss_gradient,
    parameter_count,
    save_checkpoint,
)
from .reweight import anchored_schedule, compute_confidence, irt_loss
from .training import (
    TrainConfig,
    TrainResult,
    TrainingDivergedError,
    data_term,
    infer_clip,
    select_stop_epoch,
    train,
    write_trace_csv,
)
from .synth import (
    ModeTransform,
    SynthSpec,
    ToyResult,
    apply_multimodal_flicker,
    apply_unimodal_flicker,
    default_mode_pair,
    make_moving_clip,
    make_parallax_clip,
    mode_gap,
    render_mode,
    toy_experiment,
    write_toy_csv,
)

__version__ = "0.1.0"

__all__ = [
    "VideoClip", "load_clip", "save_clip", "frame_distance_l1",
    "FlowSet", "FlowFormatError", "backward_warp", "occlusion_from_flows",
    "synth_translation_flows", "read_flow_file", "write_flow_file",
    "EmptyMaskError", "MetricsReport", "MetricsTrace", "e_pair", "e_warp",
    "evaluate_clip", "f_data", "mean_intensity_trace", "psnr",
    "write_metrics_csv",
    "Generator", "GeneratorConfig", "forward_frame", "init_generator",
    "load_checkpoint", "loss_gradient", "parameter_count", "save_checkpoint",
    "anchored_schedule", "compute_confidence", "irt_loss",
    "TrainConfig", "TrainResult", "TrainingDivergedError", "data_term",
    "infer_clip", "select_stop_epoch", "train", "write_trace_csv",
    "ModeTransform", "SynthSpec", "ToyResult", "apply_multimodal_flicker",
    "apply_unimodal_flicker", "default_mode_pair", "make_moving_clip",
    "make_parallax_clip", "mode_gap", "render_mode", "toy_experiment",
    "write_toy_csv",
]
