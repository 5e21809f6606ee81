"""Scenario files: declarative world + scripted flight descriptions.

A scenario is a YAML mapping with an RNG seed, a scene block (textured
billboards), the drone's start pose, optional camera/drone/loop/tracker
overrides, and a `script` — an ordered list of steps the runner executes.
Every validation error reports the file, line, and field that caused it,
so a typo in a 40-line scenario points at the offending line rather than
failing somewhere inside the simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

import yaml

from ..servo import HOLD, SERVO_MODES
from ..sim.drone import DroneConfig, DroneState
from ..sim.scene import Scene, SceneError, CameraModel
from ..tracker import TrackerConfig, TrackerInputError


class ScenarioError(ValueError):
    """A scenario file that cannot be executed, pointing at the culprit."""

    def __init__(
        self,
        message: str,
        *,
        field: str = "",
        line: int | None = None,
        source: str = "scenario",
    ) -> None:
        self.field = field
        self.line = line
        self.source = source
        where = source
        if line is not None:
            where += f":{line}"
        if field:
            where += f": {field}"
        super().__init__(f"{where}: {message}")


# --------------------------------------------------------------- line tracking


class _LocatedDict(dict):
    """A mapping that remembers its own line and each key's line."""

    line: int = 0
    key_lines: dict

    def line_of(self, key: str, default: int | None = None) -> int | None:
        return self.key_lines.get(key, default)


class _LocatedList(list):
    line: int = 0
    item_lines: list


class _LineLoader(yaml.SafeLoader):
    """SafeLoader that wraps containers in located variants."""


def _construct_mapping(loader: _LineLoader, node: yaml.MappingNode) -> _LocatedDict:
    loader.flatten_mapping(node)
    out = _LocatedDict()
    out.line = node.start_mark.line + 1
    out.key_lines = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        out[key] = loader.construct_object(value_node, deep=True)
        out.key_lines[key] = key_node.start_mark.line + 1
    return out


def _construct_sequence(loader: _LineLoader, node: yaml.SequenceNode) -> _LocatedList:
    out = _LocatedList()
    out.line = node.start_mark.line + 1
    out.item_lines = [child.start_mark.line + 1 for child in node.value]
    out.extend(loader.construct_object(child, deep=True) for child in node.value)
    return out


_LineLoader.add_constructor(yaml.resolver.Resolver.DEFAULT_MAPPING_TAG, _construct_mapping)
_LineLoader.add_constructor(yaml.resolver.Resolver.DEFAULT_SEQUENCE_TAG, _construct_sequence)


# ------------------------------------------------------------------ field views


class _Block:
    """Typed, line-aware view over one mapping of the scenario document."""

    def __init__(self, data: dict, path: str, source: str, line: int | None) -> None:
        self.data = data
        self.path = path
        self.source = source
        self.line = line

    def fail(self, message: str, key: str | None = None) -> ScenarioError:
        line = self.line
        field = self.path
        if key is not None:
            field = f"{self.path}.{key}" if self.path else key
            if isinstance(self.data, _LocatedDict):
                line = self.data.line_of(key, self.line)
        raise ScenarioError(message, field=field, line=line, source=self.source)

    def check_keys(self, allowed: set[str]) -> None:
        for key in self.data:
            if key not in allowed:
                self.fail(
                    f"unknown field (expected one of: {', '.join(sorted(allowed))})",
                    key=str(key),
                )

    def child(self, key: str, default: dict | None = None) -> "_Block":
        raw = self.data.get(key, default if default is not None else {})
        if not isinstance(raw, dict):
            self.fail("must be a mapping", key=key)
        line = raw.line if isinstance(raw, _LocatedDict) else self.line
        path = f"{self.path}.{key}" if self.path else key
        return _Block(raw, path, self.source, line)

    def get(self, key: str, default: Any = None) -> Any:
        return self.data.get(key, default)

    def number(self, key: str, default: float) -> float:
        raw = self.data.get(key, default)
        if isinstance(raw, bool) or not isinstance(raw, (int, float)) or not math.isfinite(raw):
            self.fail("must be a finite number", key=key)
        return float(raw)

    def integer(self, key: str, default: int) -> int:
        raw = self.data.get(key, default)
        if isinstance(raw, bool) or not isinstance(raw, int):
            self.fail("must be an integer", key=key)
        return int(raw)

    def string(self, key: str, default: str = "") -> str:
        raw = self.data.get(key, default)
        if not isinstance(raw, str):
            self.fail("must be a string", key=key)
        return raw

    def vector(self, key: str, size: int, default: list | None = None) -> tuple[float, ...]:
        raw = self.data.get(key, default)
        if raw is None:
            self.fail("is required", key=key)
        if not isinstance(raw, (list, tuple)) or len(raw) != size:
            self.fail(f"must be a {size}-element list of numbers", key=key)
        values = []
        for v in raw:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                self.fail(f"must be a {size}-element list of finite numbers", key=key)
            values.append(float(v))
        return tuple(values)


# -------------------------------------------------------------------- scenario


@dataclass(frozen=True)
class ScenarioStep:
    """One script action, with its source line for runtime diagnostics."""

    do: str
    params: dict
    line: int | None = None
    index: int = 0


@dataclass(frozen=True)
class Scenario:
    """Fully validated scenario, ready for the runner."""

    name: str
    seed: int
    scene_config: dict
    drone_start: DroneState
    drone_config: DroneConfig
    camera: CameraModel
    tracker_config: TrackerConfig
    speed_cap: float
    capture_period_ms: float
    servo_mode: str
    script: tuple[ScenarioStep, ...]
    source: str = "scenario"
    raw: dict = field(default_factory=dict, compare=False)

    def build_scene(self) -> Scene:
        """A fresh scene instance (mutable per run: objects can hide/show)."""
        return Scene.from_config(self.scene_config)


_STEP_FIELDS: dict[str, set[str]] = {
    "takeoff": {"do", "timeout"},
    "land": {"do", "timeout"},
    "goto": {"do", "target", "tolerance", "speed", "timeout"},
    "hold": {"do", "seconds"},
    "select": {"do", "object", "bbox"},
    "mode": {"do", "value"},
    "stop": {"do"},
    "go": {"do"},
    "hide_object": {"do", "id"},
    "show_object": {"do", "id"},
}

_TOP_FIELDS = {"name", "seed", "scene", "drone", "camera", "tracker", "loop", "script"}
_SCENE_FIELDS = {"background_seed", "bounds", "objects"}
_OBJECT_FIELDS = {
    "id", "center", "position", "width", "height",
    "texture", "texture_size", "texture_seed", "visible",
}
_DRONE_FIELDS = {"start", "yaw", "tau", "max_tilt", "max_climb", "max_yaw_rate", "max_speed"}
_CAMERA_FIELDS = {"hfov", "width", "height"}
_TRACKER_FIELDS = {
    "window_size", "target_sigma", "learn_rate", "regularizer",
    "train_samples", "psr_threshold", "context",
}
_LOOP_FIELDS = {"speed_cap", "capture_period_ms", "servo_mode"}


def _parse_step(block: _Block, index: int, scene_ids: set[str]) -> ScenarioStep:
    do = block.string("do", "")
    if not do:
        block.fail("every step needs a 'do' action")
    if do not in _STEP_FIELDS:
        block.fail(
            f"unknown action {do!r} (expected one of: {', '.join(sorted(_STEP_FIELDS))})",
            key="do",
        )
    block.check_keys(_STEP_FIELDS[do])

    params: dict[str, Any] = {}
    if do == "takeoff":
        params["timeout"] = block.number("timeout", 10.0)
    elif do == "land":
        params["timeout"] = block.number("timeout", 20.0)
    elif do == "goto":
        params["target"] = block.vector("target", 3)
        params["tolerance"] = block.number("tolerance", 0.06)
        params["speed"] = block.number("speed", 1.5)
        params["timeout"] = block.number("timeout", 45.0)
        if params["tolerance"] <= 0:
            block.fail("must be positive", key="tolerance")
        if params["speed"] <= 0:
            block.fail("must be positive", key="speed")
        if params["target"][2] <= 0:
            block.fail("target altitude must be positive", key="target")
    elif do == "hold":
        params["seconds"] = block.number("seconds", -1.0)
        if params["seconds"] <= 0:
            block.fail("must be a positive duration", key="seconds")
    elif do == "select":
        has_object = "object" in block.data
        has_bbox = "bbox" in block.data
        if has_object == has_bbox:
            block.fail("needs exactly one of 'object' or 'bbox'")
        if has_object:
            params["object"] = block.string("object")
            if params["object"] not in scene_ids:
                block.fail(
                    f"references unknown scene object {params['object']!r}",
                    key="object",
                )
        else:
            params["bbox"] = block.vector("bbox", 4)
    elif do == "mode":
        value = block.string("value", "")
        if value not in ("manual", "tracking", "collecting"):
            block.fail("must be one of: manual, tracking, collecting", key="value")
        params["value"] = value
    elif do in ("hide_object", "show_object"):
        params["id"] = block.string("id", "")
        if params["id"] not in scene_ids:
            block.fail(f"references unknown scene object {params['id']!r}", key="id")
    return ScenarioStep(do=do, params=params, line=block.line, index=index)


def _validate_scene(block: _Block) -> dict:
    block.check_keys(_SCENE_FIELDS)
    objects = block.get("objects", [])
    if not isinstance(objects, list):
        block.fail("must be a list of object mappings", key="objects")
    item_lines = objects.item_lines if isinstance(objects, _LocatedList) else []
    for i, obj in enumerate(objects):
        line = item_lines[i] if i < len(item_lines) else block.line
        if not isinstance(obj, dict):
            raise ScenarioError(
                "must be a mapping",
                field=f"scene.objects[{i}]", line=line, source=block.source,
            )
        obj_block = _Block(obj, f"scene.objects[{i}]", block.source,
                           obj.line if isinstance(obj, _LocatedDict) else line)
        obj_block.check_keys(_OBJECT_FIELDS)
        if "id" not in obj:
            obj_block.fail("needs an 'id'")
        obj_block.vector("center" if "center" in obj else "position", 3)
    # Deep-copy into plain containers so the scenario is self-contained.
    return _plain(block.data)


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _scene_ids(scene_config: dict) -> set[str]:
    return {str(obj["id"]) for obj in scene_config.get("objects", [])}


def parse_scenario(text: str, source: str = "scenario") -> Scenario:
    """Parse and validate a scenario document; raise ScenarioError on any flaw."""
    try:
        raw = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        line = None
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            line = mark.line + 1
        raise ScenarioError(f"not valid YAML: {exc}", line=line, source=source) from exc
    if not isinstance(raw, dict):
        raise ScenarioError("document must be a mapping", source=source)

    top = _Block(raw, "", source, raw.line if isinstance(raw, _LocatedDict) else 1)
    top.check_keys(_TOP_FIELDS)

    name = top.string("name", Path(source).stem or "scenario")
    seed = top.integer("seed", 0)

    scene_block = top.child("scene")
    scene_config = _validate_scene(scene_block)
    try:
        Scene.from_config(scene_config)  # realisability check (textures, bounds)
    except SceneError as exc:
        raise ScenarioError(str(exc), field="scene", line=scene_block.line, source=source) from exc

    drone = top.child("drone")
    drone.check_keys(_DRONE_FIELDS)
    start = drone.vector("start", 3, default=[0.0, 0.0, 0.0])
    if start[2] < 0:
        drone.fail("start altitude must be >= 0", key="start")
    yaw = drone.number("yaw", 0.0)
    try:
        drone_config = DroneConfig(
            tau=drone.number("tau", 0.2),
            max_tilt=drone.number("max_tilt", 0.35),
            max_climb=drone.number("max_climb", 1.0),
            max_yaw_rate=drone.number("max_yaw_rate", 6.11),
            max_speed=drone.number("max_speed", 11.0),
        )
    except ValueError as exc:
        drone.fail(str(exc))

    camera_block = top.child("camera")
    camera_block.check_keys(_CAMERA_FIELDS)
    try:
        camera = CameraModel(
            hfov=camera_block.number("hfov", 0.9),
            width=camera_block.integer("width", 640),
            height=camera_block.integer("height", 360),
        )
    except SceneError as exc:
        camera_block.fail(str(exc))

    tracker_block = top.child("tracker")
    tracker_block.check_keys(_TRACKER_FIELDS)
    try:
        tracker_config = TrackerConfig(
            window_size=tracker_block.integer("window_size", 64),
            target_sigma=tracker_block.number("target_sigma", 2.0),
            learn_rate=tracker_block.number("learn_rate", 0.125),
            regularizer=tracker_block.number("regularizer", 1e-5),
            train_samples=tracker_block.integer("train_samples", 8),
            psr_threshold=tracker_block.number("psr_threshold", 8.0),
            context=tracker_block.number("context", 2.0),
        )
    except TrackerInputError as exc:
        tracker_block.fail(str(exc))

    loop_block = top.child("loop")
    loop_block.check_keys(_LOOP_FIELDS)
    speed_cap = loop_block.number("speed_cap", 1.0)
    if not 0.0 < speed_cap <= 1.0:
        loop_block.fail("must lie in (0, 1]", key="speed_cap")
    capture_period_ms = loop_block.number("capture_period_ms", 1000.0)
    if capture_period_ms <= 0:
        loop_block.fail("must be positive", key="capture_period_ms")
    servo_mode = loop_block.string("servo_mode", HOLD)
    if servo_mode not in SERVO_MODES:
        loop_block.fail(f"must be one of: {', '.join(sorted(SERVO_MODES))}", key="servo_mode")

    script_raw = top.get("script", [])
    if not isinstance(script_raw, list):
        top.fail("must be a list of steps", key="script")
    ids = _scene_ids(scene_config)
    item_lines = script_raw.item_lines if isinstance(script_raw, _LocatedList) else []
    steps = []
    for i, step_raw in enumerate(script_raw):
        line = item_lines[i] if i < len(item_lines) else None
        if not isinstance(step_raw, dict):
            raise ScenarioError(
                "must be a mapping with a 'do' action",
                field=f"script[{i}]", line=line, source=source,
            )
        step_block = _Block(
            step_raw, f"script[{i}]", source,
            step_raw.line if isinstance(step_raw, _LocatedDict) else line,
        )
        steps.append(_parse_step(step_block, i, ids))

    return Scenario(
        name=name,
        seed=seed,
        scene_config=scene_config,
        drone_start=DroneState(x=start[0], y=start[1], z=start[2], yaw=yaw),
        drone_config=drone_config,
        camera=camera,
        tracker_config=tracker_config,
        speed_cap=speed_cap,
        capture_period_ms=capture_period_ms,
        servo_mode=servo_mode,
        script=tuple(steps),
        source=source,
        raw=_plain(raw),
    )


def load_scenario(path: str | Path) -> Scenario:
    """Load a scenario from a YAML file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read file: {exc}", source=str(p)) from exc
    return parse_scenario(text, source=str(p))


def iter_waypoints(scenario: Scenario) -> Iterator[tuple[float, float, float]]:
    """The goto targets in script order (the polygon the flight should trace)."""
    for step in scenario.script:
        if step.do == "goto":
            yield step.params["target"]
