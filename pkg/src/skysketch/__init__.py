"""Sketch-driven ground control for a simulated camera quadcopter.

Core pieces: a correlation-filter tracker, a PD visual-servoing controller,
sketch interpretation, a kinematic drone + synthetic camera, a gated image
collector, a multi-client gateway, and a headless scenario harness.
"""

from .frames import BoundingBox, FrameError, GrayFrame
from .servo import CentroidError, ControlCommand, PdController, centroid_error, servo_command
from .sketch import Direction, NavCommand, Stroke, bbox_from_stroke, stroke_to_command
from .tracker import (
    CorrelationFilter,
    TrackerConfig,
    TrackResult,
    track,
    train,
    update,
)

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "CentroidError",
    "ControlCommand",
    "CorrelationFilter",
    "Direction",
    "FrameError",
    "GrayFrame",
    "NavCommand",
    "PdController",
    "Stroke",
    "TrackResult",
    "TrackerConfig",
    "__version__",
    "bbox_from_stroke",
    "centroid_error",
    "servo_command",
    "stroke_to_command",
    "track",
    "train",
    "update",
]
