"""Pinhole rendering of billboard scenes with painter's-algorithm occlusion.

Because every billboard faces the camera and spans the image axes, all four
of its corners share one depth, so each projects to an exact axis-aligned
rectangle.  Rendering and ground-truth boxes therefore agree by construction.
"""

from __future__ import annotations

import math

import cv2
import numpy as np

from ..frames import BoundingBox, GrayFrame
from .drone import DroneState
from .scene import Billboard, CameraModel, Scene, SceneError

MIN_DEPTH_M = 0.05  # objects closer than this are behind/inside the lens


def camera_basis(state: DroneState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(right, down, forward) unit vectors of the body-fixed camera.

    Yaw turns the nose rightward; pitch noses down; roll drops the right
    side.  Image x runs along `right`, image y along `down`.
    """
    cy, sy = math.cos(state.yaw), math.sin(state.yaw)
    forward = np.array([cy, -sy, 0.0])
    right = np.array([-sy, -cy, 0.0])
    up = np.array([0.0, 0.0, 1.0])

    cp, sp = math.cos(state.pitch), math.sin(state.pitch)
    forward, up = forward * cp - up * sp, forward * sp + up * cp

    cr, sr = math.cos(state.roll), math.sin(state.roll)
    right, up = right * cr - up * sr, right * sr + up * cr

    return right, -up, forward


def project_point(
    state: DroneState, cam: CameraModel, point: tuple[float, float, float]
) -> tuple[float, float, float]:
    """(pixel_x, pixel_y, depth) of a world point; depth <= 0 means behind."""
    right, down, forward = camera_basis(state)
    d = np.array(point) - np.array([state.x, state.y, state.z])
    depth = float(d @ forward)
    if depth <= 0.0:
        return (math.nan, math.nan, depth)
    f = cam.focal_px
    px0, py0 = cam.principal
    return (px0 + f * float(d @ right) / depth, py0 + f * float(d @ down) / depth, depth)


def _projected_rect(
    state: DroneState, cam: CameraModel, billboard: Billboard
) -> tuple[BoundingBox, float] | None:
    """Unclipped projected rectangle and its depth, or None if behind."""
    px, py, depth = project_point(state, cam, billboard.center)
    if not depth > MIN_DEPTH_M:
        return None
    half_w = cam.focal_px * (billboard.width / 2.0) / depth
    half_h = cam.focal_px * (billboard.height / 2.0) / depth
    if half_w <= 0.0 or half_h <= 0.0:
        return None
    return BoundingBox(px - half_w, py - half_h, px + half_w, py + half_h), depth


def _clip(box: BoundingBox, width: int, height: int) -> BoundingBox | None:
    x0, y0 = max(box.x_min, 0.0), max(box.y_min, 0.0)
    x1, y1 = min(box.x_max, float(width)), min(box.y_max, float(height))
    if x1 - x0 < 1.0 or y1 - y0 < 1.0:
        return None
    return BoundingBox(x0, y0, x1, y1)


def render(state: DroneState, scene: Scene, cam: CameraModel,
           seq: int = 0, ts_ms: float = 0.0) -> GrayFrame:
    """Draw the scene from the drone's camera; far billboards paint first."""
    img = scene.background(cam.width, cam.height).copy()

    drawable: list[tuple[float, BoundingBox, Billboard]] = []
    for billboard in scene.objects.values():
        if not billboard.visible:
            continue
        rect = _projected_rect(state, cam, billboard)
        if rect is None:
            continue
        drawable.append((rect[1], rect[0], billboard))

    for depth, box, billboard in sorted(drawable, key=lambda d: -d[0]):
        clipped = _clip(box, cam.width, cam.height)
        if clipped is None:
            continue
        x0, y0, x1, y1 = clipped.rounded()
        x0, y0 = max(0, x0), max(0, y0)
        x1, y1 = min(cam.width, x1), min(cam.height, y1)
        if x1 - x0 < 1 or y1 - y0 < 1:
            continue
        # Map the visible pixel block back into texture coordinates.
        tex = billboard.texture
        th, tw = tex.shape
        u0 = (x0 - box.x_min) / box.width * tw
        u1 = (x1 - box.x_min) / box.width * tw
        v0 = (y0 - box.y_min) / box.height * th
        v1 = (y1 - box.y_min) / box.height * th
        iu0, iv0 = max(0, int(u0)), max(0, int(v0))
        iu1, iv1 = min(tw, max(iu0 + 1, int(math.ceil(u1)))), min(th, max(iv0 + 1, int(math.ceil(v1))))
        patch = cv2.resize(tex[iv0:iv1, iu0:iu1], (x1 - x0, y1 - y0),
                           interpolation=cv2.INTER_LINEAR)
        img[y0:y1, x0:x1] = patch

    return GrayFrame(np.clip(img, 0.0, 1.0).astype(np.float32), seq=seq, ts_ms=ts_ms)


def ground_truth_bbox(
    state: DroneState, scene: Scene, cam: CameraModel, object_id: str
) -> BoundingBox | None:
    """Exact projected extent of one billboard, clipped to the frame.

    None when the object is hidden, behind the camera, or entirely outside
    the field of view.  Raises for ids the scene does not contain.
    """
    billboard = scene.get(object_id)
    if not billboard.visible:
        return None
    rect = _projected_rect(state, cam, billboard)
    if rect is None:
        return None
    return _clip(rect[0], cam.width, cam.height)


def scene_check(scene: Scene) -> None:
    """Validate id uniqueness and bounds (construction normally enforces both)."""
    seen: set[str] = set()
    for object_id, billboard in scene.objects.items():
        if object_id != billboard.object_id:
            raise SceneError(f"object {billboard.object_id!r} indexed under {object_id!r}")
        if object_id in seen:  # pragma: no cover - dict keys are unique
            raise SceneError(f"duplicate object id {object_id!r}")
        seen.add(object_id)
