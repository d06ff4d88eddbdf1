"""Single-video generator training: fit the network to map each input frame
to its processed counterpart, one frame pair per update step.

The loop performs epochs x T Adam updates with no explicit temporal
regularization; consistency comes from stopping before the per-frame
artifacts are overfitted.  Per-epoch fidelity (and warping error, when
ground-truth flow is available) is recorded so the stopping trade-off can
be inspected after a single run.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import metrics as metrics_mod
from .flow import FlowSet
from .network import Generator, GeneratorConfig, _tensor_to_frame, save_checkpoint
from .reweight import compute_confidence
from .video import VideoClip, clamp01

# One frame pair per update step.
BATCH_SIZE = 1

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8

CHECKPOINT_NAME_FORMAT = "ckpt_epoch_%04d.npz"


class TrainingDivergedError(RuntimeError):
    """Raised when the loss turns non-finite; carries epoch/frame context."""


class deterministic_torch:
    """Pin torch to deterministic algorithms and a single thread.

    Multi-threaded CPU reductions are not bit-stable across runs, which would
    break the bit-reproducibility contract of training.
    """

    def __enter__(self):
        self._was_deterministic = torch.are_deterministic_algorithms_enabled()
        self._threads = torch.get_num_threads()
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)
        return self

    def __exit__(self, *exc):
        torch.use_deterministic_algorithms(self._was_deterministic)
        torch.set_num_threads(self._threads)
        return False


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 25
    irt_enabled: bool = False
    delta: float = 0.02
    anchor_iterations: int | None = None  # None -> one epoch-equivalent (T)
    data_term: object = "l1"  # "l1" | "l2" | callable hook
    seed: int = 0
    frame_order: str = "sequential"  # or "shuffled"
    snapshot_every: int = 5  # 0 disables snapshots

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.frame_order not in ("sequential", "shuffled"):
            raise ValueError(f"unknown frame_order: {self.frame_order}")
        if self.anchor_iterations is not None and self.anchor_iterations < 0:
            raise ValueError("anchor_iterations must be >= 0")
        if self.snapshot_every < 0:
            raise ValueError("snapshot_every must be >= 0")


@dataclass
class TrainResult:
    generator: Generator
    trace: metrics_mod.MetricsTrace
    snapshots: dict = field(default_factory=dict)  # epoch -> main-head VideoClip
    frame_accesses: list = field(default_factory=list)  # per-epoch pair reads
    epoch_losses: list = field(default_factory=list)  # per-epoch mean train loss
    wall_seconds: float = 0.0


def data_term(output: np.ndarray, target: np.ndarray, kind="l1") -> float:
    """Distance between a raw output frame and its target."""
    output = np.asarray(output, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if output.shape != target.shape:
        raise ValueError(f"shape mismatch: {output.shape} vs {target.shape}")
    if callable(kind):
        return float(kind(output, target))
    if kind == "l1":
        return float(np.mean(np.abs(output - target)))
    if kind == "l2":
        return float(np.mean((output - target) ** 2))
    raise ValueError(f"unknown data term: {kind!r}")


def _torch_distance(a: torch.Tensor, b: torch.Tensor, kind) -> torch.Tensor:
    if callable(kind):
        return kind(a, b)
    if kind == "l1":
        return (a - b).abs().mean()
    if kind == "l2":
        return ((a - b) ** 2).mean()
    raise ValueError(f"unknown data term: {kind!r}")


def infer_clip(gen: Generator, clip: VideoClip):
    """Per-frame forward pass, clamped to [0, 1].

    Returns one clip for single-head generators, (main, minor) for dual-head.
    """
    mains, minors = [], []
    with torch.no_grad():
        for t in range(len(clip)):
            x = torch.from_numpy(clip[t].copy()).permute(2, 0, 1).unsqueeze(0).to(gen.dtype)
            main, minor = gen(x)
            mains.append(clamp01(_tensor_to_frame(main)))
            if minor is not None:
                minors.append(clamp01(_tensor_to_frame(minor)))
    main_clip = VideoClip.from_frames(mains)
    if minors:
        return main_clip, VideoClip.from_frames(minors)
    return main_clip


def train(
    input_clip: VideoClip,
    processed: VideoClip,
    net_cfg: GeneratorConfig,
    train_cfg: TrainConfig,
    flows: FlowSet | None = None,
    checkpoint_dir=None,
) -> TrainResult:
    """Fit the generator on one (input, processed) clip pair.

    Deterministic given the seeds in net_cfg/train_cfg.  When flows are
    supplied the per-epoch trace also records the warping error of the
    main-head output under those flows.
    """
    if len(input_clip) != len(processed):
        raise ValueError(
            f"clip length mismatch: {len(input_clip)} vs {len(processed)}"
        )
    if input_clip.frames.shape != processed.frames.shape:
        raise ValueError(
            f"clip shape mismatch: {input_clip.frames.shape} vs "
            f"{processed.frames.shape}"
        )
    if input_clip.channels != net_cfg.in_channels:
        raise ValueError(
            f"clip has {input_clip.channels} channels, generator expects "
            f"{net_cfg.in_channels}"
        )
    if train_cfg.irt_enabled and net_cfg.out_heads != 2:
        raise ValueError("IRT needs a dual-head generator (out_heads=2)")
    if not train_cfg.irt_enabled and net_cfg.out_heads != 1:
        raise ValueError("plain training uses a single-head generator (out_heads=1)")
    if flows is not None and len(flows) != len(input_clip) - 1:
        raise ValueError(
            f"flow set has {len(flows)} pairs, expected {len(input_clip) - 1}"
        )

    t_count = len(input_clip)
    start = time.perf_counter()
    with deterministic_torch():
        gen = Generator(net_cfg)
        optimizer = torch.optim.Adam(
            gen.parameters(),
            lr=train_cfg.learning_rate,
            betas=ADAM_BETAS,
            eps=ADAM_EPS,
        )
        inputs = [
            torch.from_numpy(input_clip[t].copy()).permute(2, 0, 1).unsqueeze(0).to(gen.dtype)
            for t in range(t_count)
        ]
        targets = [
            torch.from_numpy(processed[t].copy()).permute(2, 0, 1).unsqueeze(0).to(gen.dtype)
            for t in range(t_count)
        ]

        masks_short = masks_long = None
        if flows is not None:
            masks_short, masks_long = flows.masks()

        anchor = train_cfg.anchor_iterations
        if anchor is None:
            anchor = t_count if train_cfg.irt_enabled else 0
        if not train_cfg.irt_enabled:
            anchor = 0

        rng = np.random.default_rng(train_cfg.seed)

        def order_stream():
            while True:
                if train_cfg.frame_order == "sequential":
                    yield from range(t_count)
                else:
                    yield from rng.permutation(t_count)

        stream = order_stream()

        trace = metrics_mod.MetricsTrace()
        snapshots = {}
        accesses = []
        epoch_losses = []
        if checkpoint_dir is not None:
            checkpoint_dir = Path(checkpoint_dir)
            checkpoint_dir.mkdir(parents=True, exist_ok=True)

        for e in range(train_cfg.epochs):
            epoch = e + 1
            reads = 0
            loss_sum = 0.0
            for i in range(t_count):
                giter = e * t_count + i
                anchored = train_cfg.irt_enabled and giter < anchor
                t = 0 if anchored else next(stream)
                reads += 1

                main, minor = gen(inputs[t])
                if train_cfg.irt_enabled:
                    if anchored:
                        # Minor head gets no gradient while the main mode is
                        # being pinned to the anchor frame.
                        loss = _torch_distance(main, targets[t], train_cfg.data_term)
                    else:
                        conf = compute_confidence(
                            _tensor_to_frame(main),
                            _tensor_to_frame(minor),
                            _tensor_to_frame(targets[t]),
                            train_cfg.delta,
                        )
                        c = (
                            torch.from_numpy(conf)
                            .to(gen.dtype)
                            .unsqueeze(0)
                            .unsqueeze(0)
                        )
                        loss = _torch_distance(
                            c * main, c * targets[t], train_cfg.data_term
                        ) + _torch_distance(
                            (1 - c) * minor, (1 - c) * targets[t], train_cfg.data_term
                        )
                else:
                    loss = _torch_distance(main, targets[t], train_cfg.data_term)

                if not torch.isfinite(loss):
                    raise TrainingDivergedError(
                        f"non-finite loss at epoch {epoch}, frame {t}"
                    )
                optimizer.zero_grad(set_to_none=True)
                loss.backward()
                optimizer.step()
                loss_sum += float(loss.detach())
            accesses.append(reads)
            epoch_losses.append(loss_sum / t_count)

            out = infer_clip(gen, input_clip)
            out_main = out[0] if isinstance(out, tuple) else out
            fd = metrics_mod.f_data(processed, out_main)
            ew = None
            if flows is not None:
                ew = metrics_mod.e_warp(
                    out_main, flows.short_fwd, flows.long_fwd, masks_short, masks_long
                )
            trace.append(epoch, fd, ew)

            snap = train_cfg.snapshot_every and epoch % train_cfg.snapshot_every == 0
            if snap:
                snapshots[epoch] = out_main
            if checkpoint_dir is not None and (snap or epoch == train_cfg.epochs):
                save_checkpoint(gen, checkpoint_dir / (CHECKPOINT_NAME_FORMAT % epoch))

    return TrainResult(
        generator=gen,
        trace=trace,
        snapshots=snapshots,
        frame_accesses=accesses,
        epoch_losses=epoch_losses,
        wall_seconds=time.perf_counter() - start,
    )


def select_stop_epoch(
    trace: metrics_mod.MetricsTrace,
    policy: str = "fixed",
    epoch: int = 25,
    lam: float = 1.0,
) -> int:
    """Pick a stopping epoch from a recorded trace.

    "fixed" returns the configured epoch (the normative behavior); "knee"
    maximizes F_data - lam * min-max-normalized E_warp as an analysis aid,
    breaking ties toward the earliest epoch.
    """
    if len(trace) == 0:
        raise ValueError("trace is empty")
    if policy == "fixed":
        if epoch not in trace.epochs():
            raise ValueError(f"epoch {epoch} not recorded in trace")
        return epoch
    if policy == "knee":
        warps = [r.e_warp for r in trace.records]
        if any(w is None for w in warps):
            raise ValueError("knee policy needs E_warp in every trace record")
        lo, hi = min(warps), max(warps)
        span = hi - lo
        normalized = [0.0 if span == 0 else (w - lo) / span for w in warps]
        scores = [r.f_data - lam * n for r, n in zip(trace.records, normalized)]
        best = int(np.argmax(scores))
        return trace.records[best].epoch
    raise ValueError(f"unknown policy: {policy!r}")


def write_trace_csv(trace: metrics_mod.MetricsTrace, path) -> None:
    """Per-epoch trace; E_warp cells are empty when no flow was supplied."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "F_data", "E_warp"])
        for r in trace.records:
            writer.writerow(
                [r.epoch, repr(r.f_data), "" if r.e_warp is None else repr(r.e_warp)]
            )
