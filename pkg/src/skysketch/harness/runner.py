"""Scenario execution: a scripted pilot over the control loop, plus reports.

The pilot drives the loop tick by tick in simulation time (no wall clock),
so a run is exactly reproducible: the report body contains only quantities
derived from simulation state and the scenario itself.  Artifacts written
per run: ``report.json`` (sorted keys), ``path.csv`` (the flight path), and
a ``captures/`` directory when the script collects images.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from ..control import ControlLoop, LoopConfig, Mode, Phase
from ..frames import BoundingBox
from ..servo import ControlCommand, hover
from ..sim.camera import ground_truth_bbox
from ..sim.pathlog import PathSample
from .scenario import Scenario, ScenarioStep

ARRIVAL_SPEED = 0.08       # m/s; slower than this counts as settled
CONVERGED_ERROR_X = 0.02   # fraction of frame width; servo convergence bar


class RunnerError(RuntimeError):
    """A script step could not be completed."""

    def __init__(self, message: str, step: ScenarioStep | None = None) -> None:
        if step is not None:
            where = f"script[{step.index}] ({step.do}"
            if step.line is not None:
                where += f", line {step.line}"
            where += ")"
            message = f"{where}: {message}"
        super().__init__(message)
        self.step = step


def _clip(value: float, limit: float) -> float:
    return max(-limit, min(limit, value))


class ScriptPilot:
    """Executes scenario steps against a control loop, one tick at a time.

    Horizontal guidance is a position→velocity→tilt cascade computed in the
    drone's body frame; altitude is proportional climb with rate damping.
    Gains are conservative so arrivals settle without oscillation — vertex
    accuracy matters more here than travel time.
    """

    kp_pos = 1.2      # (m/s) per m of position error
    kv = 0.6          # tilt command per (m/s) of velocity error
    kp_alt = 1.5      # climb command per m of altitude error
    kd_alt = 0.6      # climb command per (m/s) of vertical speed
    tilt_limit = 0.5  # command units; half of full tilt authority

    def __init__(self, loop: ControlLoop) -> None:
        self.loop = loop
        self.events: list[tuple[float, str, dict]] = []
        self.track_samples: list[tuple[float, float, float, bool]] = []  # t, err_x, psr, valid
        self.arrivals: list[dict] = []
        self.select_time_s: float | None = None
        self._wire_taps()

    # ------------------------------------------------------------------ taps

    def _wire_taps(self) -> None:
        loop = self.loop

        def on_event(kind: str, payload: dict) -> None:
            self.events.append((loop.sim_time_s, kind, dict(payload)))

        def on_frame(frame, result) -> None:
            if result is None:
                return
            err_x = result.centroid[0] / loop.camera.width - 0.5
            self.track_samples.append(
                (frame.ts_ms / 1000.0, err_x, result.psr, result.valid)
            )

        loop.on_event = on_event
        loop.on_frame = on_frame

    def _errors_since(self, t0: float) -> list[tuple[float, str, dict]]:
        return [e for e in self.events if e[0] >= t0 - 1e-9 and e[1] == "error"]

    # ----------------------------------------------------------------- steps

    def run_step(self, step: ScenarioStep) -> dict:
        handler = getattr(self, f"_step_{step.do}", None)
        if handler is None:
            raise RunnerError(f"no handler for action {step.do!r}", step)
        t0 = self.loop.sim_time_s
        handler(step)
        s = self.loop.drone_state
        return {
            "do": step.do,
            "index": step.index,
            "t_start": round(t0, 6),
            "t_end": round(s.t, 6),
            "pose": [round(s.x, 6), round(s.y, 6), round(s.z, 6), round(s.yaw, 6)],
        }

    def _run_until(self, predicate, timeout: float, step: ScenarioStep, what: str) -> None:
        loop = self.loop
        deadline = loop.sim_time_s + timeout
        while loop.sim_time_s < deadline:
            if predicate():
                return
            loop.tick()
        if not predicate():
            raise RunnerError(f"timed out after {timeout:g} s waiting for {what}", step)

    def _step_takeoff(self, step: ScenarioStep) -> None:
        self.loop.request_takeoff()
        self._run_until(
            lambda: self.loop.phase == Phase.FLYING,
            step.params["timeout"], step, "takeoff to complete",
        )

    def _step_land(self, step: ScenarioStep) -> None:
        self.loop.request_land()
        self._run_until(
            lambda: self.loop.phase == Phase.GROUNDED,
            step.params["timeout"], step, "landing to complete",
        )

    def _follow_command(self, target: tuple[float, float, float], speed: float) -> ControlCommand:
        s = self.loop.drone_state
        ex, ey, ez = target[0] - s.x, target[1] - s.y, target[2] - s.z
        fx, fy = s.forward
        rx, ry = s.right
        # Velocity setpoint toward the target, capped at cruise speed.
        v_fwd_sp = _clip(self.kp_pos * (ex * fx + ey * fy), speed)
        v_rgt_sp = _clip(self.kp_pos * (ex * rx + ey * ry), speed)
        v_fwd = s.vx * fx + s.vy * fy
        v_rgt = s.vx * rx + s.vy * ry
        return ControlCommand(
            pitch=_clip(self.kv * (v_fwd_sp - v_fwd), self.tilt_limit),
            roll=_clip(self.kv * (v_rgt_sp - v_rgt), self.tilt_limit),
            vertical=_clip(self.kp_alt * ez - self.kd_alt * s.vertical_velocity, 1.0),
            ts_ms=s.t * 1000.0,
        )

    def _step_goto(self, step: ScenarioStep) -> None:
        target = step.params["target"]
        tolerance = step.params["tolerance"]
        speed = step.params["speed"]
        loop = self.loop
        if loop.phase != Phase.FLYING:
            raise RunnerError("goto requires the drone to be flying", step)

        def arrived() -> bool:
            s = loop.drone_state
            dist = math.dist((s.x, s.y, s.z), target)
            return (
                dist <= tolerance
                and s.speed <= ARRIVAL_SPEED
                and abs(s.vertical_velocity) <= ARRIVAL_SPEED
            )

        deadline = loop.sim_time_s + step.params["timeout"]
        while loop.sim_time_s < deadline and not arrived():
            loop.request_command(self._follow_command(target, speed))
            loop.tick()
        if not arrived():
            s = loop.drone_state
            raise RunnerError(
                f"timed out {math.dist((s.x, s.y, s.z), target):.3f} m from "
                f"target {list(target)}", step,
            )
        loop.request_command(hover(loop.sim_time_s * 1000.0))
        loop.tick()
        s = loop.drone_state
        self.arrivals.append({
            "step": step.index,
            "t": round(s.t, 6),
            "target": [round(v, 6) for v in target],
            "pose": [round(s.x, 6), round(s.y, 6), round(s.z, 6)],
            "dist": round(math.dist((s.x, s.y, s.z), target), 6),
        })

    def _step_hold(self, step: ScenarioStep) -> None:
        loop = self.loop
        # In a servo mode the loop steers itself; in manual, pin a hover.
        if loop.mode == Mode.MANUAL:
            loop.request_command(hover(loop.sim_time_s * 1000.0))
        loop.run_for(step.params["seconds"])

    def _step_select(self, step: ScenarioStep) -> None:
        loop = self.loop
        if not loop.has_frame:
            loop.tick()  # force at least one render
        t0 = loop.sim_time_s
        if "object" in step.params:
            box = ground_truth_bbox(
                loop.drone_state, loop.scene, loop.camera, step.params["object"]
            )
            if box is None:
                raise RunnerError(
                    f"object {step.params['object']!r} is not visible from the "
                    "current pose, so there is nothing to select", step,
                )
        else:
            box = BoundingBox(*step.params["bbox"])
        self.select_time_s = t0
        loop.request_select(box)
        loop.tick()
        errors = self._errors_since(t0)
        if errors:
            raise RunnerError(f"select failed: {errors[-1][2].get('reason')}", step)
        if loop.mode not in (Mode.TRACKING, Mode.COLLECTING):
            raise RunnerError("select did not engage tracking", step)

    def _step_mode(self, step: ScenarioStep) -> None:
        loop = self.loop
        t0 = loop.sim_time_s
        loop.request_mode(step.params["value"])
        loop.tick()
        if loop.mode.value != step.params["value"]:
            errors = self._errors_since(t0)
            reason = errors[-1][2].get("reason") if errors else "mode did not change"
            raise RunnerError(f"mode change failed: {reason}", step)

    def _step_stop(self, step: ScenarioStep) -> None:
        self.loop.request_stop()
        self.loop.tick()
        self.loop.tick()

    def _step_go(self, step: ScenarioStep) -> None:
        self.loop.request_go()
        self.loop.tick()

    def _step_hide_object(self, step: ScenarioStep) -> None:
        self.loop.scene.set_visible(step.params["id"], False)

    def _step_show_object(self, step: ScenarioStep) -> None:
        self.loop.scene.set_visible(step.params["id"], True)


# ------------------------------------------------------------------ geometry


def _convex_hull(points: list[tuple[float, float, int]]) -> list[tuple[float, float, int]]:
    """Andrew's monotone chain over (x, y, index) triples; collinear dropped."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b) -> float:
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def triangle_vertices(samples: tuple[PathSample, ...]) -> list[tuple[float, float]] | None:
    """The three dominant corners of a flight path, from geometry alone.

    Builds the convex hull of the horizontal track and picks the hull triple
    with maximum area — for an out-and-back two-target flight that is the
    start point and the two turn points, independently of how the path was
    produced.  Returns None when the path has no 2-D extent to analyse.
    """
    points = [(s.x, s.y, i) for i, s in enumerate(samples)]
    hull = _convex_hull(points)
    if len(hull) < 3:
        return None
    best = None
    best_area = 0.0
    n = len(hull)
    for i in range(n - 2):
        for j in range(i + 1, n - 1):
            for k in range(j + 1, n):
                a, b, c = hull[i], hull[j], hull[k]
                area = abs(
                    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
                ) / 2.0
                if area > best_area:
                    best_area = area
                    best = (a, b, c)
    if best is None or best_area < 1e-9:
        return None
    ordered = sorted(best, key=lambda p: p[2])  # path-time order
    return [(p[0], p[1]) for p in ordered]


# -------------------------------------------------------------------- report


def _tracking_metrics(pilot: ScriptPilot) -> dict | None:
    if pilot.select_time_s is None or not pilot.track_samples:
        return None
    t_sel = pilot.select_time_s
    converge: float | None = None
    psr_values = [s[2] for s in pilot.track_samples if s[3] and math.isfinite(s[2])]
    valid = sum(1 for s in pilot.track_samples if s[3])
    for t, err_x, _psr, ok in pilot.track_samples:
        if t >= t_sel and ok and abs(err_x) < CONVERGED_ERROR_X:
            converge = t - t_sel
            break
    return {
        "time_to_converge_s": None if converge is None else round(converge, 6),
        "psr_min": round(min(psr_values), 6) if psr_values else None,
        "psr_max": round(max(psr_values), 6) if psr_values else None,
        "samples": len(pilot.track_samples),
        "valid_ratio": round(valid / len(pilot.track_samples), 6),
    }


def run_scenario(
    scenario: Scenario,
    out_dir: str | Path,
    *,
    seed: int | None = None,
) -> dict:
    """Execute a scenario headless and write report.json + path.csv.

    Returns the report dict.  The serialized report contains simulation
    quantities only — no wall-clock timestamps and no filesystem paths — so
    two runs with the same scenario and seed produce byte-identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run_seed = scenario.seed if seed is None else seed

    loop = ControlLoop(
        scene=scenario.build_scene(),
        camera=scenario.camera,
        drone_config=scenario.drone_config,
        tracker_config=scenario.tracker_config,
        config=LoopConfig(
            speed_cap=scenario.speed_cap,
            capture_period_ms=scenario.capture_period_ms,
            servo_mode=scenario.servo_mode,
            capture_dir=str(out / "captures"),
        ),
        seed=run_seed,
        session_prefix=scenario.name,
        scene_ref=scenario.source,
        initial_state=scenario.drone_start,
    )
    pilot = ScriptPilot(loop)
    steps = []
    try:
        for step in scenario.script:
            steps.append(pilot.run_step(step))
    finally:
        loop.close()

    event_counts: dict[str, int] = {}
    for _t, kind, _payload in pilot.events:
        event_counts[kind] = event_counts.get(kind, 0) + 1
    captures = {
        "accepted": sum(
            1 for _t, kind, p in pilot.events if kind == "capture" and p.get("accepted")
        ),
        "rejected": sum(
            1 for _t, kind, p in pilot.events if kind == "capture" and not p.get("accepted")
        ),
    }

    vertices = triangle_vertices(loop.path_log.samples)
    report = {
        "arrivals": pilot.arrivals,
        "captures": captures,
        "command_count": loop.command_count,
        "duration_s": round(loop.sim_time_s, 6),
        "events": dict(sorted(event_counts.items())),
        "final_pose": {
            "x": round(loop.drone_state.x, 6),
            "y": round(loop.drone_state.y, 6),
            "z": round(loop.drone_state.z, 6),
            "yaw": round(loop.drone_state.yaw, 6),
        },
        "frames": loop.snapshot()["frame_seq"],
        "name": scenario.name,
        "path_samples": len(loop.path_log.samples),
        "path_vertices": (
            None if vertices is None
            else [[round(x, 6), round(y, 6)] for x, y in vertices]
        ),
        "scenario": scenario.raw,
        "seed": run_seed,
        "steps": steps,
        "tracking": _tracking_metrics(pilot),
        "waypoints": [
            list(step.params["target"]) for step in scenario.script if step.do == "goto"
        ],
    }

    loop.path_log.write_csv(out / "path.csv")
    (out / "report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return report
