"""Dense displacement fields: backward warping, occlusion masks, synthetic
translation flows, and Middlebury-style .flo file I/O.

A flow field is a float array of shape (H, W, 2) holding per-pixel (u, v)
displacements in pixels, u along x (columns) and v along y (rows).  A field
F mapping frame t to frame s points from position x in frame t to its
correspondence x + F(x) in frame s.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FLO_MAGIC = 202021.25

# Forward-backward consistency thresholds: occluded when
# |f + b(x+f)|^2 > a * (|f|^2 + |b(x+f)|^2) + b.
OCCLUSION_A = 0.01
OCCLUSION_B = 0.5


class FlowFormatError(ValueError):
    """Raised for malformed .flo files."""


def validate_flow(flow: np.ndarray) -> np.ndarray:
    arr = np.asarray(flow, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError(f"flow must have shape (H, W, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("flow contains non-finite values")
    return arr


def _sample_positions(flow: np.ndarray):
    h, w = flow.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w]
    sx = xs + flow[:, :, 0]
    sy = ys + flow[:, :, 1]
    return sx, sy


def backward_warp(source: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Sample source at x + flow(x) with bilinear interpolation.

    Samples falling outside the frame contribute 0; callers are expected to
    exclude those pixels with an occlusion mask.
    """
    src = np.asarray(source, dtype=np.float64)
    flw = validate_flow(flow)
    if src.shape[:2] != flw.shape[:2]:
        raise ValueError(
            f"source/flow size mismatch: {src.shape[:2]} vs {flw.shape[:2]}"
        )
    h, w = src.shape[:2]
    sx, sy = _sample_positions(flw)

    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = x0 + 1
    y1 = y0 + 1
    wx = sx - x0
    wy = sy - y0

    out = np.zeros_like(src)
    for dx, dy, weight in (
        (x0, y0, (1 - wx) * (1 - wy)),
        (x1, y0, wx * (1 - wy)),
        (x0, y1, (1 - wx) * wy),
        (x1, y1, wx * wy),
    ):
        inside = (dx >= 0) & (dx < w) & (dy >= 0) & (dy < h)
        xc = np.clip(dx, 0, w - 1)
        yc = np.clip(dy, 0, h - 1)
        contrib = src[yc, xc] * (weight * inside)[:, :, None]
        out += contrib
    return out


def occlusion_from_flows(
    fwd: np.ndarray,
    bwd: np.ndarray,
    a: float = OCCLUSION_A,
    b: float = OCCLUSION_B,
) -> np.ndarray:
    """Binary (H, W) mask; 0 marks pixels failing forward-backward consistency
    or whose forward target leaves the frame."""
    fwd = validate_flow(fwd)
    bwd = validate_flow(bwd)
    if fwd.shape != bwd.shape:
        raise ValueError(f"flow size mismatch: {fwd.shape} vs {bwd.shape}")
    if a < 0 or b < 0:
        raise ValueError("occlusion thresholds must be non-negative")
    h, w = fwd.shape[:2]
    sx, sy = _sample_positions(fwd)
    out_of_bounds = (sx < 0) | (sx > w - 1) | (sy < 0) | (sy > h - 1)

    bwd_at = backward_warp(bwd, fwd)
    diff = fwd + bwd_at
    lhs = diff[:, :, 0] ** 2 + diff[:, :, 1] ** 2
    mag = (
        fwd[:, :, 0] ** 2 + fwd[:, :, 1] ** 2
        + bwd_at[:, :, 0] ** 2 + bwd_at[:, :, 1] ** 2
    )
    occluded = (lhs > a * mag + b) | out_of_bounds
    return (~occluded).astype(np.float64)


def constant_flow(h: int, w: int, dx: float, dy: float) -> np.ndarray:
    field = np.empty((h, w, 2), dtype=np.float64)
    field[:, :, 0] = dx
    field[:, :, 1] = dy
    return field


@dataclass(frozen=True)
class FlowSet:
    """Ground-truth flow pairs for a T-frame clip.

    Entry k (k = 0..T-2) relates frame t = k+1 to its neighbors:
    short_fwd[k] maps frame t to frame t-1, long_fwd[k] maps frame t to
    frame 0; *_bwd hold the reverse directions.
    """

    short_fwd: tuple
    short_bwd: tuple
    long_fwd: tuple
    long_bwd: tuple

    def __len__(self) -> int:
        return len(self.short_fwd)

    def masks(self, a: float = OCCLUSION_A, b: float = OCCLUSION_B):
        """Occlusion masks (short list, long list) for every pair."""
        masks_short = [
            occlusion_from_flows(f, bk, a, b)
            for f, bk in zip(self.short_fwd, self.short_bwd)
        ]
        masks_long = [
            occlusion_from_flows(f, bk, a, b)
            for f, bk in zip(self.long_fwd, self.long_bwd)
        ]
        return masks_short, masks_long


def synth_translation_flows(t_count: int, dx: float, dy: float, h: int, w: int) -> FlowSet:
    """Exact flows for a camera translating (dx, dy) per frame.

    Frame t sees the scene of frame t-1 displaced by (dx, dy), so the flow
    from frame t to frame t-1 is the constant field (dx, dy) and the flow
    from frame t to frame 0 is (t*dx, t*dy).
    """
    if t_count < 2:
        raise ValueError(f"need at least 2 frames, got {t_count}")
    short_fwd, short_bwd, long_fwd, long_bwd = [], [], [], []
    for t in range(1, t_count):
        short_fwd.append(constant_flow(h, w, dx, dy))
        short_bwd.append(constant_flow(h, w, -dx, -dy))
        long_fwd.append(constant_flow(h, w, t * dx, t * dy))
        long_bwd.append(constant_flow(h, w, -t * dx, -t * dy))
    return FlowSet(tuple(short_fwd), tuple(short_bwd), tuple(long_fwd), tuple(long_bwd))


def write_flow_file(flow: np.ndarray, path) -> None:
    """Write a (H, W, 2) field in the Middlebury .flo layout (little-endian)."""
    flw = validate_flow(flow)
    h, w = flw.shape[:2]
    with open(path, "wb") as f:
        f.write(struct.pack("<f", FLO_MAGIC))
        f.write(struct.pack("<i", w))
        f.write(struct.pack("<i", h))
        f.write(flw.astype("<f4").tobytes(order="C"))


def read_flow_file(path) -> np.ndarray:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 12:
        raise FlowFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic = struct.unpack("<f", raw[0:4])[0]
    if magic != FLO_MAGIC:
        raise FlowFormatError(f"{path}: bad magic {magic!r}")
    w = struct.unpack("<i", raw[4:8])[0]
    h = struct.unpack("<i", raw[8:12])[0]
    if w <= 0 or h <= 0:
        raise FlowFormatError(f"{path}: invalid dimensions {w}x{h}")
    expected = 12 + 8 * h * w
    if len(raw) < expected:
        raise FlowFormatError(
            f"{path}: truncated data ({len(raw)} bytes, expected {expected})"
        )
    data = np.frombuffer(raw[12:expected], dtype="<f4")
    return data.reshape(h, w, 2).astype(np.float64)
