"""Shared image-plane types: luminance frames and pixel bounding boxes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FrameError(ValueError):
    """A frame or box violates its geometry contract."""


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel box. Origin top-left, x grows right, y grows down."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise FrameError(
                f"degenerate box ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0

    def shifted(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def inside(self, width: float, height: float) -> bool:
        return self.x_min >= 0 and self.y_min >= 0 and self.x_max <= width and self.y_max <= height

    def clamped_into(self, width: float, height: float) -> "BoundingBox":
        """Shift the box (size preserved) so it lies inside a width x height frame.

        Boxes larger than the frame are clipped to the frame instead.
        """
        w, h = min(self.width, width), min(self.height, height)
        x0 = min(max(self.x_min, 0.0), width - w)
        y0 = min(max(self.y_min, 0.0), height - h)
        return BoundingBox(x0, y0, x0 + w, y0 + h)

    def rounded(self) -> tuple[int, int, int, int]:
        return (
            int(round(self.x_min)),
            int(round(self.y_min)),
            int(round(self.x_max)),
            int(round(self.y_max)),
        )

    @staticmethod
    def centered(cx: float, cy: float, width: float, height: float) -> "BoundingBox":
        return BoundingBox(cx - width / 2.0, cy - height / 2.0, cx + width / 2.0, cy + height / 2.0)


@dataclass(frozen=True)
class GrayFrame:
    """Single-channel luminance frame; pixels are row-major float32 in [0, 1]."""

    pixels: np.ndarray
    seq: int
    ts_ms: float

    def __post_init__(self) -> None:
        p = self.pixels
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise FrameError(f"frame must be a non-empty 2-D array, got shape {p.shape}")

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @staticmethod
    def from_array(pixels: np.ndarray, seq: int = 0, ts_ms: float = 0.0) -> "GrayFrame":
        arr = np.asarray(pixels, dtype=np.float32)
        return GrayFrame(np.clip(arr, 0.0, 1.0), seq, ts_ms)


# Rec. 601 luma weights; trackers and the renderer are single-channel.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def to_luminance(rgb: np.ndarray) -> np.ndarray:
    """Collapse an (h, w, 3) RGB array to (h, w) luminance in [0, 1]."""
    if rgb.ndim == 2:
        return rgb.astype(np.float32)
    r, g, b = LUMA_WEIGHTS
    out = rgb[..., 0] * r + rgb[..., 1] * g + rgb[..., 2] * b
    return out.astype(np.float32)
