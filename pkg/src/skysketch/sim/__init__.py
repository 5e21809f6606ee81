"""Simulated quadcopter: kinematics, scene description, synthetic camera."""

from .drone import DroneConfig, DroneState, SimInputError, step
from .scene import Billboard, CameraModel, Scene, make_texture
from .camera import ground_truth_bbox, project_point, render

__all__ = [
    "Billboard",
    "CameraModel",
    "DroneConfig",
    "DroneState",
    "Scene",
    "SimInputError",
    "ground_truth_bbox",
    "make_texture",
    "project_point",
    "render",
    "step",
]
