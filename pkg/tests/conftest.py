"""Shared fixtures: synthetic textured frames with known target geometry."""

from __future__ import annotations

import numpy as np
import pytest

from skysketch.frames import BoundingBox, GrayFrame


def textured_scene(
    width: int = 320,
    height: int = 240,
    seed: int = 7,
    target: BoundingBox | None = None,
) -> np.ndarray:
    """Noise background with a strongly textured blob inside `target`.

    Returns a float32 image in [0, 1]; the blob has structure at several
    scales so a correlation filter trained on it produces a sharp peak.
    """
    import cv2

    rng = np.random.default_rng(seed)
    img = 0.35 + 0.08 * rng.standard_normal((height, width))
    if target is None:
        target = BoundingBox(width / 2 - 32, height / 2 - 32, width / 2 + 32, height / 2 + 32)
    x0, y0, x1, y1 = (int(round(v)) for v in (target.x_min, target.y_min, target.x_max, target.y_max))
    th, tw = y1 - y0, x1 - x0
    # Aperiodic high-contrast blotches: smoothed noise stretched to full range.
    blob = cv2.GaussianBlur(rng.standard_normal((th, tw)), (0, 0), sigmaX=2.5)
    lo, hi = blob.min(), blob.max()
    blob = 0.05 + 0.9 * (blob - lo) / (hi - lo)
    img[y0:y1, x0:x1] = blob
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def shifted_frame(base: np.ndarray, dx: int, dy: int, seq: int = 1) -> GrayFrame:
    """The same scene translated by (dx, dy) pixels with edge replication."""
    h, w = base.shape
    pad = max(abs(dx), abs(dy)) + 1
    padded = np.pad(base, pad, mode="edge")
    y0 = pad - dy
    x0 = pad - dx
    return GrayFrame.from_array(padded[y0 : y0 + h, x0 : x0 + w], seq=seq, ts_ms=seq * 33.0)


@pytest.fixture
def target_box() -> BoundingBox:
    return BoundingBox(128.0, 88.0, 192.0, 152.0)  # 64x64 centred-ish


@pytest.fixture
def scene(target_box: BoundingBox) -> np.ndarray:
    return textured_scene(target=target_box)


@pytest.fixture
def frame0(scene: np.ndarray) -> GrayFrame:
    return GrayFrame.from_array(scene, seq=0, ts_ms=0.0)
