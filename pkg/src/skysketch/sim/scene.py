"""Scene description: textured billboards, camera intrinsics, background.

Billboards always face the camera and stay aligned with the image axes, so
their projections are exact axis-aligned rectangles — which is what makes
the renderer's ground-truth boxes exact rather than approximate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import cv2
import numpy as np


class SceneError(ValueError):
    """A scene description that cannot be realised."""


TEXTURE_KINDS = ("blotch", "checker", "disc", "stripes")


def make_texture(kind: str = "blotch", size: int = 96, seed: int = 0) -> np.ndarray:
    """Procedural square texture in [0, 1].

    "blotch" (the default) is smoothed noise stretched to full contrast: it
    is aperiodic, which correlation trackers need — a periodic pattern such
    as "checker" produces ambiguous response peaks under shifts of exactly
    one period.
    """
    if size < 8:
        raise SceneError(f"texture size must be >= 8, got {size}")
    rng = np.random.default_rng(seed)
    if kind == "blotch":
        tex = cv2.GaussianBlur(rng.standard_normal((size, size)), (0, 0), sigmaX=size / 24.0)
        lo, hi = tex.min(), tex.max()
        tex = 0.05 + 0.9 * (tex - lo) / (hi - lo)
    elif kind == "checker":
        cell = max(size // 8, 2)
        yy, xx = np.mgrid[0:size, 0:size]
        tex = np.where(((xx // cell) + (yy // cell)) % 2 == 0, 0.85, 0.15)
    elif kind == "disc":
        yy, xx = np.mgrid[0:size, 0:size]
        r = np.hypot(xx - size / 2.0, yy - size / 2.0)
        tex = np.where(r <= size * 0.38, 0.9, 0.12)
        ring = np.abs(r - size * 0.2) < size * 0.05
        tex = np.where(ring, 0.35, tex)
    elif kind == "stripes":
        yy, xx = np.mgrid[0:size, 0:size]
        period = max(size // 6, 4)
        tex = np.where(((xx + yy) // period) % 2 == 0, 0.8, 0.2)
    else:
        raise SceneError(f"unknown texture kind {kind!r}; choose from {TEXTURE_KINDS}")
    return tex.astype(np.float32)


@dataclass(frozen=True)
class Billboard:
    """A camera-facing textured rectangle hanging in the world."""

    object_id: str
    center: tuple[float, float, float]  # meters, world frame
    width: float                        # meters
    height: float                       # meters
    texture: np.ndarray
    visible: bool = True

    def __post_init__(self) -> None:
        if not self.object_id:
            raise SceneError("object_id must be non-empty")
        if self.width <= 0 or self.height <= 0:
            raise SceneError(f"billboard {self.object_id!r} must have positive size")
        if self.texture.ndim != 2:
            raise SceneError(f"billboard {self.object_id!r} texture must be 2-D")


@dataclass(frozen=True)
class CameraModel:
    """Forward-looking pinhole camera fixed to the drone body."""

    hfov: float = 0.9      # rad, horizontal field of view
    width: int = 640       # px
    height: int = 360      # px

    def __post_init__(self) -> None:
        if not 0.0 < self.hfov < math.pi:
            raise SceneError(f"hfov must lie in (0, pi), got {self.hfov}")
        if self.width < 16 or self.height < 16:
            raise SceneError("camera resolution too small")

    @property
    def focal_px(self) -> float:
        """Focal length in pixels (square pixels: shared by both axes)."""
        return (self.width / 2.0) / math.tan(self.hfov / 2.0)

    @property
    def principal(self) -> tuple[float, float]:
        return (self.width / 2.0, self.height / 2.0)


@dataclass
class Scene:
    """World content: billboards plus a fixed backdrop."""

    objects: dict[str, Billboard] = field(default_factory=dict)
    background_seed: int = 0
    bounds: float = 50.0  # |x|, |y| limit for object centers, meters
    _background_cache: dict[tuple[int, int], np.ndarray] = field(
        default_factory=dict, repr=False
    )

    def add(self, billboard: Billboard) -> None:
        if billboard.object_id in self.objects:
            raise SceneError(f"duplicate object id {billboard.object_id!r}")
        bx, by, _ = billboard.center
        if abs(bx) > self.bounds or abs(by) > self.bounds:
            raise SceneError(
                f"object {billboard.object_id!r} lies outside the ±{self.bounds} m world"
            )
        self.objects[billboard.object_id] = billboard

    def get(self, object_id: str) -> Billboard:
        try:
            return self.objects[object_id]
        except KeyError:
            raise SceneError(f"unknown object id {object_id!r}") from None

    def set_visible(self, object_id: str, visible: bool) -> None:
        bb = self.get(object_id)
        self.objects[object_id] = Billboard(
            bb.object_id, bb.center, bb.width, bb.height, bb.texture, visible
        )

    def background(self, width: int, height: int) -> np.ndarray:
        """Fixed backdrop: vertical gradient plus low-amplitude seeded noise."""
        key = (width, height)
        cached = self._background_cache.get(key)
        if cached is None:
            rng = np.random.default_rng(self.background_seed)
            rows = np.linspace(0.55, 0.25, height, dtype=np.float32)[:, None]
            noise = 0.02 * rng.standard_normal((height, width)).astype(np.float32)
            cached = np.clip(rows + noise, 0.0, 1.0)
            self._background_cache[key] = cached
        return cached

    @staticmethod
    def from_config(config: dict) -> "Scene":
        """Build a scene from a parsed mapping (the scenario file's `scene` block)."""
        if not isinstance(config, dict):
            raise SceneError("scene config must be a mapping")
        scene = Scene(
            background_seed=int(config.get("background_seed", 0)),
            bounds=float(config.get("bounds", 50.0)),
        )
        for i, obj in enumerate(config.get("objects", [])):
            if not isinstance(obj, dict) or "id" not in obj:
                raise SceneError(f"scene.objects[{i}] must be a mapping with an 'id'")
            center = obj.get("center", obj.get("position"))
            if center is None or len(center) != 3:
                raise SceneError(f"scene.objects[{i}] needs a 3-element center")
            texture = make_texture(
                kind=str(obj.get("texture", "blotch")),
                size=int(obj.get("texture_size", 96)),
                seed=int(obj.get("texture_seed", i + 1)),
            )
            scene.add(
                Billboard(
                    object_id=str(obj["id"]),
                    center=(float(center[0]), float(center[1]), float(center[2])),
                    width=float(obj.get("width", 0.5)),
                    height=float(obj.get("height", 0.5)),
                    texture=texture,
                    visible=bool(obj.get("visible", True)),
                )
            )
        return scene


def default_scene(seed: int = 0) -> Scene:
    """A small interactive playground: three targets at varied ranges."""
    scene = Scene(background_seed=seed)
    scene.add(Billboard("alarm", (4.0, 0.0, 1.2), 0.5, 0.5, make_texture("blotch", seed=seed + 1)))
    scene.add(Billboard("ball", (6.0, 2.5, 0.8), 0.45, 0.45, make_texture("disc", seed=seed + 2)))
    scene.add(Billboard("sign", (7.0, -3.0, 1.5), 0.8, 0.6, make_texture("stripes", seed=seed + 3)))
    return scene
