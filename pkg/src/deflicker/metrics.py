"""Temporal-consistency and fidelity metrics for processed/output clips.

Temporal inconsistency is the masked warping error between each frame and
both its previous frame (short term) and the first frame (long term).
Fidelity is the mean PSNR between output and processed frames, skipping
frame 1 which anchors the comparison.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .flow import backward_warp
from .video import VideoClip

PSNR_CAP_DB = 99.0


class EmptyMaskError(ValueError):
    """Raised when a warping-error mask excludes every pixel."""


def e_pair(
    o_t: np.ndarray,
    o_s: np.ndarray,
    flow_ts: np.ndarray,
    mask: np.ndarray,
) -> float:
    """Masked mean of the per-pixel L1 norm between o_t and o_s warped onto it.

    The per-pixel norm sums over channels; the mean runs over unmasked pixels.
    """
    o_t = np.asarray(o_t, dtype=np.float64)
    o_s = np.asarray(o_s, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    if o_t.shape != o_s.shape:
        raise ValueError(f"frame shape mismatch: {o_t.shape} vs {o_s.shape}")
    if mask.shape != o_t.shape[:2]:
        raise ValueError(f"mask shape {mask.shape} does not match frame {o_t.shape[:2]}")
    denom = float(np.sum(mask))
    if denom == 0.0:
        raise EmptyMaskError("occlusion mask excludes every pixel")
    warped = backward_warp(o_s, flow_ts)
    per_pixel = np.sum(np.abs(o_t - warped), axis=2)
    return float(np.sum(mask * per_pixel) / denom)


def e_warp(
    clip: VideoClip,
    flows_short: list,
    flows_long: list,
    masks_short: list,
    masks_long: list,
) -> float:
    """Mean over t = 2..T of the short-term plus long-term pair errors."""
    t_count = len(clip)
    for name, seq in (
        ("flows_short", flows_short),
        ("flows_long", flows_long),
        ("masks_short", masks_short),
        ("masks_long", masks_long),
    ):
        if len(seq) != t_count - 1:
            raise ValueError(f"{name} has {len(seq)} entries, expected {t_count - 1}")
    total = 0.0
    for k in range(t_count - 1):
        t = k + 1
        total += e_pair(clip[t], clip[0], flows_long[k], masks_long[k])
        total += e_pair(clip[t], clip[t - 1], flows_short[k], masks_short[k])
    return total / (t_count - 1)


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR in dB with peak 1.0, capped at 99 dB (zero-MSE sentinel)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"frame shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(1.0 / mse))


def f_data(processed: VideoClip, output: VideoClip) -> float:
    """Mean PSNR between processed and output frames, excluding frame 1."""
    if len(processed) != len(output):
        raise ValueError(
            f"clip length mismatch: {len(processed)} vs {len(output)}"
        )
    values = [psnr(processed[t], output[t]) for t in range(1, len(processed))]
    return float(np.mean(values))


def mean_intensity_trace(clip: VideoClip) -> list:
    """Per-frame mean over all pixels and channels."""
    return [float(np.mean(clip[t])) for t in range(len(clip))]


@dataclass
class TraceRecord:
    epoch: int
    f_data: float
    e_warp: float | None = None


@dataclass
class MetricsTrace:
    """Per-epoch (E_warp, F_data) history recorded during training."""

    records: list = field(default_factory=list)

    def append(self, epoch: int, f_data_db: float, e_warp_value: float | None = None) -> None:
        if self.records and epoch <= self.records[-1].epoch:
            raise ValueError(
                f"epochs must be strictly increasing, got {epoch} after "
                f"{self.records[-1].epoch}"
            )
        if e_warp_value is not None and e_warp_value < 0:
            raise ValueError(f"E_warp must be non-negative, got {e_warp_value}")
        self.records.append(TraceRecord(epoch, float(f_data_db), e_warp_value))

    def __len__(self) -> int:
        return len(self.records)

    def epochs(self) -> list:
        return [r.epoch for r in self.records]

    def at_epoch(self, epoch: int) -> TraceRecord:
        for r in self.records:
            if r.epoch == epoch:
                return r
        raise KeyError(f"no trace record for epoch {epoch}")


@dataclass
class MetricsReport:
    """Full evaluation of one clip: aggregates plus per-frame breakdowns."""

    e_warp: float
    e_pair_short: list
    e_pair_long: list
    mean_intensity: list
    f_data: float | None = None
    psnr_per_frame: list | None = None


def evaluate_clip(
    clip: VideoClip,
    flows_short: list,
    flows_long: list,
    masks_short: list,
    masks_long: list,
    reference: VideoClip | None = None,
) -> MetricsReport:
    """Compute the full metric set; fidelity only when a reference is given."""
    t_count = len(clip)
    shorts = [
        e_pair(clip[k + 1], clip[k], flows_short[k], masks_short[k])
        for k in range(t_count - 1)
    ]
    longs = [
        e_pair(clip[k + 1], clip[0], flows_long[k], masks_long[k])
        for k in range(t_count - 1)
    ]
    # accumulate exactly like e_warp so the aggregate matches it bit for bit
    total = 0.0
    for k in range(t_count - 1):
        total += longs[k]
        total += shorts[k]
    warp_err = total / (t_count - 1)
    report = MetricsReport(
        e_warp=warp_err,
        e_pair_short=shorts,
        e_pair_long=longs,
        mean_intensity=mean_intensity_trace(clip),
    )
    if reference is not None:
        report.psnr_per_frame = [
            psnr(reference[t], clip[t]) for t in range(1, t_count)
        ]
        report.f_data = float(np.mean(report.psnr_per_frame))
    return report


def write_metrics_csv(report: MetricsReport, path) -> None:
    """Per-frame rows (1-based t) followed by aggregate footer rows."""
    t_count = len(report.mean_intensity)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "e_pair_short", "e_pair_long", "psnr", "mean_intensity"])
        for t in range(t_count):
            short = repr(report.e_pair_short[t - 1]) if t >= 1 else ""
            long_ = repr(report.e_pair_long[t - 1]) if t >= 1 else ""
            snr = ""
            if report.psnr_per_frame is not None and t >= 1:
                snr = repr(report.psnr_per_frame[t - 1])
            writer.writerow([t + 1, short, long_, snr, repr(report.mean_intensity[t])])
        writer.writerow(["E_warp", repr(report.e_warp), "", "", ""])
        if report.f_data is not None:
            writer.writerow(["F_data", repr(report.f_data), "", "", ""])
