"""Frame and clip value types plus lossless frame-sequence I/O.

A frame is a float array of shape (H, W, C) with C in {1, 3} and values
nominally in [0, 1].  A clip is an immutable ordered stack of frames with
identical dimensions.  On disk a clip is a directory of 8-bit PNG files
named ``frame_%06d.png`` whose lexicographic order is temporal order.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

_IMAGE_EXTENSIONS = {".png", ".bmp", ".tif", ".tiff", ".jpg", ".jpeg"}

FRAME_NAME_FORMAT = "frame_%06d.png"


def validate_frame(frame: np.ndarray) -> np.ndarray:
    """Check shape/dtype of a single frame array and return it as float64."""
    arr = np.asarray(frame, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"frame must have shape (H, W, C), got {arr.shape}")
    h, w, c = arr.shape
    if h < 1 or w < 1:
        raise ValueError(f"frame dimensions must be positive, got {h}x{w}")
    if c not in (1, 3):
        raise ValueError(f"frame must have 1 or 3 channels, got {c}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("frame contains non-finite values")
    return arr


def clamp01(arr: np.ndarray) -> np.ndarray:
    return np.clip(arr, 0.0, 1.0)


@dataclass(frozen=True)
class VideoClip:
    """Ordered stack of frames, shape (T, H, W, C); immutable once built."""

    frames: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.frames, dtype=np.float64)
        if arr.ndim != 4:
            raise ValueError(f"clip must have shape (T, H, W, C), got {arr.shape}")
        if arr.shape[0] < 2:
            raise ValueError(f"clip needs at least 2 frames, got {arr.shape[0]}")
        if arr.shape[3] not in (1, 3):
            raise ValueError(f"clip must have 1 or 3 channels, got {arr.shape[3]}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("clip contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "frames", arr)

    @classmethod
    def from_frames(cls, frames) -> "VideoClip":
        """Build a clip from an iterable of (H, W, C) frames."""
        stacked = [validate_frame(f) for f in frames]
        shapes = {f.shape for f in stacked}
        if len(shapes) > 1:
            raise ValueError(f"frames have mismatched dimensions: {sorted(shapes)}")
        return cls(np.stack(stacked, axis=0))

    def __len__(self) -> int:
        return self.frames.shape[0]

    def __getitem__(self, t: int) -> np.ndarray:
        return self.frames[t]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    @property
    def channels(self) -> int:
        return self.frames.shape[3]

    def clamped(self) -> "VideoClip":
        return VideoClip(clamp01(self.frames))


def _decode_image(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            if img.mode in ("L", "I;16"):
                img = img.convert("L")
                arr = np.asarray(img, dtype=np.float64)[:, :, None]
            else:
                img = img.convert("RGB")
                arr = np.asarray(img, dtype=np.float64)
    except Exception as exc:
        raise ValueError(f"cannot decode image file {path}: {exc}") from exc
    return arr / 255.0


def load_clip(dir_path) -> VideoClip:
    """Load a frame directory into a clip, sorted-name order = temporal order."""
    dir_path = Path(dir_path)
    if not dir_path.is_dir():
        raise FileNotFoundError(f"frame directory not found: {dir_path}")
    names = sorted(
        n for n in os.listdir(dir_path)
        if Path(n).suffix.lower() in _IMAGE_EXTENSIONS
    )
    if len(names) < 2:
        raise ValueError(
            f"frame directory {dir_path} holds {len(names)} image files, need >= 2"
        )
    frames = [_decode_image(dir_path / n) for n in names]
    first = frames[0].shape
    for name, frame in zip(names, frames):
        if frame.shape != first:
            raise ValueError(
                f"frame dimension mismatch: {names[0]} is {first}, "
                f"{name} is {frame.shape}"
            )
    return VideoClip.from_frames(frames)


def save_clip(clip: VideoClip, dir_path) -> None:
    """Write a clip as zero-padded 8-bit PNG files, clamping to [0, 1] first."""
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    for t in range(len(clip)):
        data = np.rint(clamp01(clip[t]) * 255.0).astype(np.uint8)
        if data.shape[2] == 1:
            img = Image.fromarray(data[:, :, 0], mode="L")
        else:
            img = Image.fromarray(data, mode="RGB")
        img.save(dir_path / (FRAME_NAME_FORMAT % t))


def frame_distance_l1(a: np.ndarray, b: np.ndarray) -> float:
    """Mean absolute difference over all pixels and channels."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"frame shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b)))
