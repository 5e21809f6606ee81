#!/usr/bin/env python3
"""Test-only stand-in for the operator's eyes.

The browser e2e test needs to know where a scene object currently sits in
the camera frame so it can "draw" a selection loop around it, the way a
human looking at the video would.  Prints the exact projected bbox (or
null) for one scenario object at a given drone pose.

Usage: gt_bbox.py <scenario.yaml> <pose-json> <object-id>
"""

import json
import sys

from skysketch.harness import load_scenario
from skysketch.sim.camera import ground_truth_bbox
from skysketch.sim.drone import DroneState


def main() -> None:
    scenario_path, pose_json, object_id = sys.argv[1:4]
    scenario = load_scenario(scenario_path)
    pose = json.loads(pose_json)
    state = DroneState(
        x=pose["x"],
        y=pose["y"],
        z=pose["z"],
        roll=pose.get("roll", 0.0),
        pitch=pose.get("pitch", 0.0),
        yaw=pose["yaw"],
    )
    box = ground_truth_bbox(state, scenario.build_scene(), scenario.camera, object_id)
    print(json.dumps(None if box is None else [box.x_min, box.y_min, box.x_max, box.y_max]))


if __name__ == "__main__":
    main()
