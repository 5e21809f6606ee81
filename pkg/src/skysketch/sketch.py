"""Sketch interpretation: strokes on control canvases become flight commands,
and circle strokes on the video canvas become target selections.

A navigation stroke is reduced to its net displacement (first point to last),
snapped to one of eight compass sectors, and given a magnitude equal to the
displacement length over the canvas diagonal — so no stroke can exceed 1.0,
and an operator-set speed cap can shrink it further.  Canvas coordinates use
the image convention: x grows right, y grows down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

from .frames import BoundingBox
from .servo import ControlCommand


class SketchError(ValueError):
    """A stroke that cannot be interpreted; the message is user-facing."""


TRANSLATE = "translate"
YAW = "yaw"
ALTITUDE = "altitude"
VIDEO = "video"
NAV_CANVASES = (TRANSLATE, YAW, ALTITUDE)

DEAD_ZONE_PX = 8.0       # net displacement at or under this is an accidental tap
MIN_SELECT_AREA = 64.0   # frame px^2; smaller selections are rejected
MIN_SELECT_SIDE = 4.0    # frame px; thinner selections are near-collinear

_DIAG = math.sqrt(0.5)


class Direction(IntEnum):
    """Eight 45-degree sectors, counted from +x (east) toward +y (screen down)."""

    E = 0
    SE = 1
    S = 2
    SW = 3
    W = 4
    NW = 5
    N = 6
    NE = 7

    @property
    def vector(self) -> tuple[float, float]:
        return _DIRECTION_VECTORS[self]


_DIRECTION_VECTORS: dict[Direction, tuple[float, float]] = {
    Direction.E: (1.0, 0.0),
    Direction.SE: (_DIAG, _DIAG),
    Direction.S: (0.0, 1.0),
    Direction.SW: (-_DIAG, _DIAG),
    Direction.W: (-1.0, 0.0),
    Direction.NW: (-_DIAG, -_DIAG),
    Direction.N: (0.0, -1.0),
    Direction.NE: (_DIAG, -_DIAG),
}


@dataclass(frozen=True)
class Stroke:
    """An ordered pointer trail on one canvas; points are (x, y, ts_ms)."""

    canvas_id: str
    points: tuple[tuple[float, float, float], ...]
    canvas_w: float
    canvas_h: float

    def __post_init__(self) -> None:
        if self.canvas_id not in (*NAV_CANVASES, VIDEO):
            raise SketchError(f"unknown canvas {self.canvas_id!r}")
        if self.canvas_w <= 0 or self.canvas_h <= 0:
            raise SketchError("canvas dimensions must be positive")
        minimum = 3 if self.canvas_id == VIDEO else 2
        if len(self.points) < minimum:
            raise SketchError(
                f"a {self.canvas_id} stroke needs at least {minimum} points, "
                f"got {len(self.points)}"
            )
        for x, y, _ts in self.points:
            if not (0 <= x <= self.canvas_w and 0 <= y <= self.canvas_h):
                raise SketchError(
                    f"point ({x}, {y}) lies outside the "
                    f"{self.canvas_w}x{self.canvas_h} canvas"
                )

    @property
    def displacement(self) -> tuple[float, float]:
        x0, y0, _ = self.points[0]
        x1, y1, _ = self.points[-1]
        return x1 - x0, y1 - y0

    @property
    def diagonal(self) -> float:
        return math.hypot(self.canvas_w, self.canvas_h)


@dataclass(frozen=True)
class NavCommand:
    direction: Direction
    magnitude: float  # in [0, 1]
    canvas_id: str


def quantize_direction(dx: float, dy: float) -> Direction | None:
    """Snap a displacement to the nearest of eight 45-degree sectors.

    Displacements at or under the dead zone are taps, not commands (None).
    A displacement exactly on a sector boundary snaps to the lower angle.
    """
    if math.hypot(dx, dy) <= DEAD_ZONE_PX:
        return None
    theta = math.degrees(math.atan2(dy, dx)) % 360.0
    sector = math.ceil((theta - 22.5) / 45.0) % 8
    return Direction(sector)


def stroke_to_command(stroke: Stroke, speed_cap: float = 1.0) -> NavCommand | None:
    """Reduce a navigation stroke to a direction and capped magnitude.

    Returns None for sub-dead-zone strokes.  Magnitude is the net stroke
    length over the canvas diagonal, so it is invariant to canvas scale and
    never exceeds 1 before the cap is applied.
    """
    if stroke.canvas_id == VIDEO:
        raise SketchError("video-canvas strokes select targets; they are not commands")
    if not 0.0 <= speed_cap <= 1.0:
        raise SketchError(f"speed cap must lie in [0, 1], got {speed_cap}")
    dx, dy = stroke.displacement
    direction = quantize_direction(dx, dy)
    if direction is None:
        return None
    magnitude = min(math.hypot(dx, dy) / stroke.diagonal, speed_cap)
    return NavCommand(direction=direction, magnitude=magnitude, canvas_id=stroke.canvas_id)


def nav_to_control(nav: NavCommand, ts_ms: float = 0.0) -> ControlCommand:
    """Map a canvas command onto drone axes.

    translate: stroke right rolls right, stroke up (screen) pitches forward.
    yaw: only the horizontal component spins the drone (right = clockwise).
    altitude: only the vertical component climbs (up-stroke = climb).
    """
    ux, uy = nav.direction.vector
    m = nav.magnitude
    if nav.canvas_id == TRANSLATE:
        return ControlCommand(roll=ux * m, pitch=-uy * m, ts_ms=ts_ms)
    if nav.canvas_id == YAW:
        return ControlCommand(yaw_rate=ux * m, ts_ms=ts_ms)
    if nav.canvas_id == ALTITUDE:
        return ControlCommand(vertical=-uy * m, ts_ms=ts_ms)
    raise SketchError(f"canvas {nav.canvas_id!r} does not map to drone axes")


def bbox_from_stroke(stroke: Stroke, frame_w: int, frame_h: int) -> BoundingBox:
    """Axis-aligned extent of a circle stroke, scaled from canvas to frame.

    The selection must enclose enough frame area to carry trackable texture;
    near-collinear scribbles are rejected with a reason the UI can display.
    """
    if stroke.canvas_id != VIDEO:
        raise SketchError("target selection strokes must be drawn on the video canvas")
    xs = [p[0] for p in stroke.points]
    ys = [p[1] for p in stroke.points]
    sx = frame_w / stroke.canvas_w
    sy = frame_h / stroke.canvas_h
    x_min, x_max = min(xs) * sx, max(xs) * sx
    y_min, y_max = min(ys) * sy, max(ys) * sy
    width, height = x_max - x_min, y_max - y_min
    if width < MIN_SELECT_SIDE or height < MIN_SELECT_SIDE:
        raise SketchError("selection is too thin — circle the target, don't underline it")
    if width * height < MIN_SELECT_AREA:
        raise SketchError("selection is too small to track — draw a larger circle")
    return BoundingBox(x_min, y_min, x_max, y_max).clamped_into(frame_w, frame_h)
