"""Iteratively reweighted training for multimodal inconsistency.

With a dual-head generator, each pixel of the processed frame is assigned
to either the main or the minor head by a hard confidence map, recomputed
from the current heads at every iteration.  Anchoring pins the first
training iterations to the first frame so the main head locks onto one
well-defined mode before the reweighting takes over.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

DEFAULT_DELTA = 0.02


def pixel_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-pixel mean absolute difference across channels, shape (H, W)."""
    return np.mean(np.abs(np.asarray(a, np.float64) - np.asarray(b, np.float64)), axis=2)


def compute_confidence(
    main: np.ndarray,
    minor: np.ndarray,
    processed: np.ndarray,
    delta: float = DEFAULT_DELTA,
) -> np.ndarray:
    """Binary (H, W) map: 1 where the main head wins the pixel.

    A pixel belongs to the main mode when its distance to the processed
    value is below max(distance of the minor head, delta); the delta floor
    keeps single-mode pixels (both heads close) in the main term.
    """
    main = np.asarray(main, dtype=np.float64)
    minor = np.asarray(minor, dtype=np.float64)
    processed = np.asarray(processed, dtype=np.float64)
    if not (main.shape == minor.shape == processed.shape):
        raise ValueError(
            f"shape mismatch: main {main.shape}, minor {minor.shape}, "
            f"processed {processed.shape}"
        )
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    d_main = pixel_distance(main, processed)
    d_minor = pixel_distance(minor, processed)
    return (d_main < np.maximum(d_minor, delta)).astype(np.float64)


def irt_loss(
    main: np.ndarray,
    minor: np.ndarray,
    processed: np.ndarray,
    conf: np.ndarray,
    kind: str = "l1",
) -> float:
    """Confidence-weighted loss: main fits the selected pixels, minor the rest.

    The map is broadcast across channels and treated as a constant; this is
    the value the trainer's differentiable loss reproduces.
    """
    from .training import data_term

    main = np.asarray(main, dtype=np.float64)
    minor = np.asarray(minor, dtype=np.float64)
    processed = np.asarray(processed, dtype=np.float64)
    conf = np.asarray(conf, dtype=np.float64)
    if conf.shape != main.shape[:2]:
        raise ValueError(f"confidence shape {conf.shape} does not match {main.shape[:2]}")
    c = conf[:, :, None]
    return data_term(c * main, c * processed, kind) + data_term(
        (1.0 - c) * minor, (1.0 - c) * processed, kind
    )


def anchored_schedule(iteration: int, anchor_iterations: int, normal_order) -> int:
    """Frame index for a global training iteration.

    The first anchor_iterations train on frame 0; afterwards the normal
    frame order applies from its start, repeating every len(normal_order).
    """
    if anchor_iterations < 0:
        raise ValueError(f"anchor_iterations must be >= 0, got {anchor_iterations}")
    if iteration < anchor_iterations:
        return 0
    return normal_order[(iteration - anchor_iterations) % len(normal_order)]


def save_confidence_maps(maps, dir_path) -> None:
    """Dump per-frame confidence maps as 8-bit grayscale images."""
    from pathlib import Path

    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    for t, conf in enumerate(maps):
        data = (np.asarray(conf, dtype=np.float64) * 255.0).astype(np.uint8)
        Image.fromarray(data, mode="L").save(dir_path / f"frame_{t:06d}.png")
