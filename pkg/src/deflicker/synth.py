"""Synthetic clips with exact ground truth: smooth moving textures, unimodal
(gain jitter + noise) flicker, multimodal mode-switching color transforms,
and the small-scale training-dynamics experiment.

Everything is deterministic per seed so tests can state thresholds against
known constructions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .flow import FlowSet, synth_translation_flows
from .network import Generator, GeneratorConfig, _tensor_to_frame
from .reweight import compute_confidence
from .training import _torch_distance, deterministic_torch
from .video import VideoClip, clamp01, frame_distance_l1

TOY_FRAME_COUNT = 8
TOY_SIZE = 32
TOY_LEARNING_RATE = 5e-4


@dataclass(frozen=True)
class ModeTransform:
    """Per-mode color transform: pixel -> gain @ pixel + bias."""

    gain: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        gain = np.asarray(self.gain, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64)
        if gain.ndim != 2 or gain.shape[0] != gain.shape[1]:
            raise ValueError(f"gain must be square, got {gain.shape}")
        if bias.shape != (gain.shape[0],):
            raise ValueError(f"bias shape {bias.shape} does not match gain {gain.shape}")
        object.__setattr__(self, "gain", gain)
        object.__setattr__(self, "bias", bias)

    def apply(self, frame: np.ndarray) -> np.ndarray:
        return clamp01(np.asarray(frame, np.float64) @ self.gain.T + self.bias)


@dataclass
class SynthSpec:
    kind: str  # "unimodal" | "multimodal"
    sigma: float = 0.0
    modes: list = field(default_factory=list)
    switch_pattern: list = field(default_factory=list)
    seed: int = 0

    def validate(self, t_count: int, channels: int) -> None:
        if self.kind not in ("unimodal", "multimodal"):
            raise ValueError(f"unknown kind: {self.kind!r}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.kind == "multimodal":
            if len(self.modes) < 2:
                raise ValueError("multimodal spec needs at least 2 modes")
            for m in self.modes:
                if m.gain.shape[0] != channels:
                    raise ValueError(
                        f"mode transform is {m.gain.shape[0]}-channel, clip has "
                        f"{channels}"
                    )
            if len(self.switch_pattern) != t_count:
                raise ValueError(
                    f"switch_pattern has {len(self.switch_pattern)} entries for "
                    f"{t_count} frames"
                )
            if any(not 0 <= m < len(self.modes) for m in self.switch_pattern):
                raise ValueError("switch_pattern contains invalid mode indices")


def _texture_params(
    rng: np.random.Generator,
    channels: int,
    components: int = 4,
    max_cycles: float = 2.5,
    total_amp: float = 0.38,
):
    angles = rng.uniform(0.0, 2.0 * np.pi, components)
    cycles = rng.uniform(0.5, max_cycles, components)  # cycles per 64 pixels
    freq = np.stack([np.cos(angles), np.sin(angles)], axis=1) * (cycles[:, None] / 64.0)
    phases = rng.uniform(0.0, 2.0 * np.pi, (components, channels))
    amps = rng.uniform(0.5, 1.0, components)
    amps *= total_amp / amps.sum()
    return freq, phases, amps


def _eval_texture(freq, phases, amps, xs, ys) -> np.ndarray:
    out = np.full(xs.shape + (phases.shape[1],), 0.5, dtype=np.float64)
    for j in range(len(amps)):
        arg = 2.0 * np.pi * (freq[j, 0] * xs + freq[j, 1] * ys)
        out += amps[j] * np.sin(arg[:, :, None] + phases[j][None, None, :])
    return out


def make_moving_clip(
    t_count: int,
    h: int,
    w: int,
    dx: float,
    dy: float,
    seed: int = 0,
    channels: int = 3,
) -> tuple:
    """Smooth texture seen by a camera panning (dx, dy) per frame.

    Returns the clip together with its exact translation flows, so warping
    metrics on the construction are exact up to interpolation.
    """
    if t_count < 2:
        raise ValueError(f"need at least 2 frames, got {t_count}")
    if abs(dx) * (t_count - 1) >= w or abs(dy) * (t_count - 1) >= h:
        raise ValueError(
            f"motion ({dx}, {dy}) over {t_count} frames exceeds the {h}x{w} frame"
        )
    rng = np.random.default_rng(seed)
    freq, phases, amps = _texture_params(rng, channels)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    frames = [
        _eval_texture(freq, phases, amps, xs + t * dx, ys + t * dy)
        for t in range(t_count)
    ]
    clip = VideoClip.from_frames(frames)
    flows = synth_translation_flows(t_count, dx, dy, h, w)
    return clip, flows


def make_parallax_clip(
    t_count: int,
    h: int,
    w: int,
    dx: float = 1.0,
    dy: float = 0.5,
    seed: int = 0,
    channels: int = 3,
) -> VideoClip:
    """Moving texture layered over a static one.

    Unlike the camera-pan clip, frames are not translates of each other: the
    phase relation between the layers identifies each frame everywhere, which
    is what lets a convolutional generator eventually personalize per-frame
    artifacts.  No dense flow is returned; the two layers move differently.
    """
    if t_count < 2:
        raise ValueError(f"need at least 2 frames, got {t_count}")
    rng = np.random.default_rng(seed)
    fm, pm, am = _texture_params(rng, channels, max_cycles=4.0, total_amp=0.24)
    fs, ps, as_ = _texture_params(rng, channels, max_cycles=4.0, total_amp=0.14)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    static = _eval_texture(fs, ps, as_, xs, ys)
    frames = [
        _eval_texture(fm, pm, am, xs + t * dx, ys + t * dy) + static - 0.5
        for t in range(t_count)
    ]
    return VideoClip.from_frames(frames)


def apply_unimodal_flicker(clip: VideoClip, sigma: float, seed: int = 0) -> VideoClip:
    """Per-frame gain jitter plus per-pixel Gaussian noise, clamped."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    rng = np.random.default_rng(seed)
    frames = []
    for t in range(len(clip)):
        gain = rng.uniform(-sigma, sigma)
        noise = rng.normal(0.0, sigma / 2.0, clip[t].shape)
        frames.append(clamp01(clip[t] * (1.0 + gain) + noise))
    return VideoClip.from_frames(frames)


def apply_multimodal_flicker(clip: VideoClip, spec: SynthSpec) -> tuple:
    """Apply the per-frame mode transform from the switch pattern.

    Returns (processed clip, mode labels); a positive spec.sigma adds small
    unimodal jitter on top of the mode transforms.
    """
    spec.validate(len(clip), clip.channels)
    if spec.kind != "multimodal":
        raise ValueError("apply_multimodal_flicker needs a multimodal spec")
    rng = np.random.default_rng(spec.seed)
    frames = []
    for t in range(len(clip)):
        mode = spec.modes[spec.switch_pattern[t]]
        frame = clip[t] @ mode.gain.T + mode.bias
        if spec.sigma > 0:
            gain = rng.uniform(-spec.sigma, spec.sigma)
            noise = rng.normal(0.0, spec.sigma / 2.0, frame.shape)
            frame = frame * (1.0 + gain) + noise
        frames.append(clamp01(frame))
    return VideoClip.from_frames(frames), list(spec.switch_pattern)


def render_mode(clip: VideoClip, mode: ModeTransform) -> VideoClip:
    """The clip as it would look processed entirely in one mode (no jitter)."""
    return VideoClip.from_frames([mode.apply(clip[t]) for t in range(len(clip))])


def mode_gap(clip: VideoClip, mode_a: ModeTransform, mode_b: ModeTransform) -> float:
    """Mean frame distance between the two mode renditions of a clip."""
    ra = render_mode(clip, mode_a)
    rb = render_mode(clip, mode_b)
    return float(
        np.mean([frame_distance_l1(ra[t], rb[t]) for t in range(len(clip))])
    )


def default_mode_pair(strength: float = 1.0) -> tuple:
    """A warm/cool transform pair with a controllable inter-mode gap."""
    eye = np.eye(3)
    warm = ModeTransform(
        eye + strength * np.diag([0.15, 0.0, -0.15]),
        strength * np.array([0.18, 0.02, -0.14]),
    )
    cool = ModeTransform(
        eye + strength * np.diag([-0.15, -0.05, 0.15]),
        strength * np.array([-0.14, -0.02, 0.18]),
    )
    return warm, cool


@dataclass
class ToyRecord:
    iteration: int
    pairwise: np.ndarray  # (T, T) frame-mean L1 among outputs
    to_processed: np.ndarray  # (T,)
    to_ground_truth: np.ndarray  # (T,) distance to the frame's true rendition
    to_mode_a: np.ndarray | None = None
    to_mode_b: np.ndarray | None = None

    @property
    def mean_pairwise(self) -> float:
        t = self.pairwise.shape[0]
        off = self.pairwise[~np.eye(t, dtype=bool)]
        return float(np.mean(off))


@dataclass
class ToyResult:
    mode: str
    irt: bool
    records: list
    processed_pairwise_mean: float
    input_clip: VideoClip
    processed_clip: VideoClip
    ground_truth: VideoClip
    mode_a_rendition: VideoClip | None = None
    mode_b_rendition: VideoClip | None = None
    labels: list | None = None


def _pairwise_matrix(clip: VideoClip) -> np.ndarray:
    t_count = len(clip)
    mat = np.zeros((t_count, t_count))
    for a in range(t_count):
        for b in range(a + 1, t_count):
            d = frame_distance_l1(clip[a], clip[b])
            mat[a, b] = mat[b, a] = d
    return mat


def _distances(out: VideoClip, ref: VideoClip) -> np.ndarray:
    return np.array(
        [frame_distance_l1(out[t], ref[t]) for t in range(len(out))]
    )


def toy_experiment(
    mode: str,
    iterations: int = 2500,
    record_every: int = 50,
    irt: bool | None = None,
    seed: int = 0,
    sigma: float = 0.025,
    learning_rate: float = TOY_LEARNING_RATE,
) -> ToyResult:
    """Train a small generator on 8 synthetic frames and track how outputs
    drift from mutual consistency toward the processed frames.

    Records the full pairwise output-distance matrix at iteration 0 and every
    record_every iterations.  In multimodal mode the processed frames switch
    between two color modes; irt defaults to on there (anchored on frame 0,
    a mode-A frame) and off for unimodal.
    """
    if mode not in ("unimodal", "multimodal"):
        raise ValueError(f"unknown toy mode: {mode!r}")
    if iterations < 1 or record_every < 1:
        raise ValueError("iterations and record_every must be positive")
    if irt is None:
        irt = mode == "multimodal"

    t_count = TOY_FRAME_COUNT
    clip = make_parallax_clip(t_count, TOY_SIZE, TOY_SIZE, seed=seed)
    mode_a = mode_b = labels = None
    rendition_a = rendition_b = None
    if mode == "unimodal":
        processed = apply_unimodal_flicker(clip, sigma, seed=seed + 1)
        ground_truth = clip
    else:
        mode_a, mode_b = default_mode_pair()
        spec = SynthSpec(
            kind="multimodal",
            sigma=0.02,
            modes=[mode_a, mode_b],
            switch_pattern=[t % 2 for t in range(t_count)],
            seed=seed + 1,
        )
        processed, labels = apply_multimodal_flicker(clip, spec)
        rendition_a = render_mode(clip, mode_a)
        rendition_b = render_mode(clip, mode_b)
        ground_truth = VideoClip.from_frames(
            [
                (rendition_a if m == 0 else rendition_b)[t]
                for t, m in enumerate(labels)
            ]
        )

    net_cfg = GeneratorConfig(
        in_channels=clip.channels,
        out_heads=2 if irt else 1,
        base_width=16,
        depth=3,
        seed=seed + 2,
    )
    with deterministic_torch():
        gen = Generator(net_cfg)
        optimizer = torch.optim.Adam(gen.parameters(), lr=learning_rate)
        inputs = [
            torch.from_numpy(clip[t].copy()).permute(2, 0, 1).unsqueeze(0).to(gen.dtype)
            for t in range(t_count)
        ]
        targets = [
            torch.from_numpy(processed[t].copy()).permute(2, 0, 1).unsqueeze(0).to(gen.dtype)
            for t in range(t_count)
        ]
        anchor = t_count if irt else 0

        def snapshot(iteration: int) -> ToyRecord:
            frames = []
            with torch.no_grad():
                for t in range(t_count):
                    main, _ = gen(inputs[t])
                    frames.append(clamp01(_tensor_to_frame(main)))
            out = VideoClip.from_frames(frames)
            rec = ToyRecord(
                iteration=iteration,
                pairwise=_pairwise_matrix(out),
                to_processed=_distances(out, processed),
                to_ground_truth=_distances(out, ground_truth),
            )
            if mode == "multimodal":
                rec.to_mode_a = _distances(out, rendition_a)
                rec.to_mode_b = _distances(out, rendition_b)
            return rec

        records = [snapshot(0)]
        for it in range(iterations):
            t = 0 if it < anchor else it % t_count
            main, minor = gen(inputs[t])
            if irt:
                if it < anchor:
                    loss = _torch_distance(main, targets[t], "l1")
                else:
                    conf = compute_confidence(
                        _tensor_to_frame(main),
                        _tensor_to_frame(minor),
                        _tensor_to_frame(targets[t]),
                    )
                    c = torch.from_numpy(conf).to(gen.dtype).unsqueeze(0).unsqueeze(0)
                    loss = _torch_distance(c * main, c * targets[t], "l1") + \
                        _torch_distance((1 - c) * minor, (1 - c) * targets[t], "l1")
            else:
                loss = _torch_distance(main, targets[t], "l1")
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            if (it + 1) % record_every == 0:
                records.append(snapshot(it + 1))

    return ToyResult(
        mode=mode,
        irt=irt,
        records=records,
        processed_pairwise_mean=float(
            np.mean(_pairwise_matrix(processed)[~np.eye(t_count, dtype=bool)])
        ),
        input_clip=clip,
        processed_clip=processed,
        ground_truth=ground_truth,
        mode_a_rendition=rendition_a,
        mode_b_rendition=rendition_b,
        labels=labels,
    )


def write_toy_csv(result: ToyResult, path) -> None:
    import csv

    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        header = [
            "iteration",
            "mean_pairwise_output",
            "mean_to_processed",
            "mean_to_ground_truth",
        ]
        if result.mode == "multimodal":
            header += ["mean_to_mode_a", "mean_to_mode_b"]
        writer.writerow(header)
        for rec in result.records:
            row = [
                rec.iteration,
                repr(rec.mean_pairwise),
                repr(float(np.mean(rec.to_processed))),
                repr(float(np.mean(rec.to_ground_truth))),
            ]
            if result.mode == "multimodal":
                row += [
                    repr(float(np.mean(rec.to_mode_a))),
                    repr(float(np.mean(rec.to_mode_b))),
                ]
            writer.writerow(row)
