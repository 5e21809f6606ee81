"""The 100 Hz control loop: flight phases, modes, tracking, and capture.

One actor owns all mutable flight state.  Clients (gateway handlers, the
scenario runner, tests) enqueue events; the loop drains them at the top of
each 10 ms tick, computes exactly one command, steps the simulated drone,
and — on render ticks (30 fps) — runs the tracker, refreshes the servo
command, publishes the frame, and offers it to the capture gate.  Between
render ticks the last command is repeated (zero-order hold), which is what
keeps the command stream at a strict 100 Hz regardless of camera rate.

Safety latch: `stop` zeroes the command vector within two ticks and holds
the drone in hover — whatever the mode — until an explicit `go`.
"""

from __future__ import annotations

import math
import queue
import statistics
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .collector import CaptureSession
from .frames import BoundingBox, GrayFrame
from .servo import HOLD, ControlCommand, PdController, hover, servo_command
from .sim.camera import render
from .sim.drone import DroneConfig, DroneState, step
from .sim.pathlog import PathLogger
from .sim.scene import CameraModel, Scene, default_scene
from .sketch import NavCommand, nav_to_control
from .tracker import TrackerConfig, TrackResult, initial_result, track, train, update


class Mode(str, Enum):
    MANUAL = "manual"
    TRACKING = "tracking"
    COLLECTING = "collecting"


class Phase(str, Enum):
    GROUNDED = "grounded"
    TAKEOFF = "takeoff"
    FLYING = "flying"
    LANDING = "landing"


class ControlError(RuntimeError):
    """The loop was driven outside its contract (programming error)."""


@dataclass(frozen=True)
class LoopConfig:
    tick_s: float = 0.01            # 100 Hz command cadence
    render_fps: float = 30.0        # camera rate; tracker runs per frame
    telemetry_hz: float = 10.0
    takeoff_altitude: float = 1.0   # m; reached => flying
    takeoff_vertical: float = 0.6   # climb command during takeoff
    landing_vertical: float = -0.5  # descend command during landing
    speed_cap: float = 1.0          # stroke magnitude cap, surfaced to clients
    capture_dir: str = "captures"
    capture_period_ms: float = 1000.0
    stop_on_loss: bool = False
    servo_mode: str = HOLD
    orbit_roll: float = 0.2
    path_log_period_s: float = 0.1


@dataclass
class _Flight:
    """Mutable loop-owned state, grouped for readability."""

    drone: DroneState = field(default_factory=DroneState)
    phase: Phase = Phase.GROUNDED
    mode: Mode = Mode.MANUAL
    halted: bool = False
    manual_cmd: ControlCommand = field(default_factory=hover)
    servo_cmd: ControlCommand = field(default_factory=hover)
    track_lost: bool = False


class ControlLoop:
    """Single-owner simulation/control actor; see module docstring."""

    def __init__(
        self,
        scene: Scene | None = None,
        camera: CameraModel | None = None,
        drone_config: DroneConfig | None = None,
        tracker_config: TrackerConfig | None = None,
        config: LoopConfig | None = None,
        seed: int = 0,
        session_prefix: str | None = None,
        scene_ref: str = "",
        initial_state: DroneState | None = None,
    ) -> None:
        self.scene = scene if scene is not None else default_scene(seed)
        self.camera = camera or CameraModel()
        self.drone_config = drone_config or DroneConfig()
        self.tracker_config = tracker_config or TrackerConfig()
        self.config = config or LoopConfig()
        self.seed = seed
        self.scene_ref = scene_ref

        # Outbound taps; the gateway (or a test) assigns these.
        self.on_frame: Callable[[GrayFrame, TrackResult | None], None] | None = None
        self.on_telemetry: Callable[[dict], None] | None = None
        self.on_event: Callable[[str, dict], None] | None = None
        self.on_command: Callable[[ControlCommand], None] | None = None

        self._events: queue.Queue[tuple[str, dict]] = queue.Queue()
        self._flight = _Flight()
        if initial_state is not None:
            self._flight.drone = initial_state
            if initial_state.z > 1e-3:
                self._flight.phase = Phase.FLYING
        self._pd = PdController()
        self._rng = np.random.default_rng(seed)
        self._filter = None
        self._result: TrackResult | None = None
        self._last_frame: GrayFrame | None = None
        self._session: CaptureSession | None = None
        self._session_count = 0
        self._session_prefix = session_prefix

        self.path_log = PathLogger(self.config.path_log_period_s)
        self._tick_count = 0
        self._frame_seq = 0
        self._command_count = 0
        self._next_render_s = 0.0
        self._next_telemetry_s = 0.0

        self._thread: threading.Thread | None = None
        self._running = False
        self._tick_starts: deque[float] = deque(maxlen=1024)
        # Re-entrant: outbound callbacks fire inside the tick and may read
        # snapshot() without deadlocking.
        self._lock = threading.RLock()

    # ------------------------------------------------------------ client API

    def submit(self, kind: str, **payload) -> None:
        """Enqueue a client event; applied at the top of the next tick."""
        self._events.put((kind, payload))

    def request_takeoff(self) -> None:
        self.submit("takeoff")

    def request_land(self) -> None:
        self.submit("land")

    def request_stop(self) -> None:
        self.submit("stop")

    def request_go(self) -> None:
        self.submit("go")

    def request_stroke(self, nav: NavCommand) -> None:
        self.submit("stroke", nav=nav)

    def request_command(self, command: ControlCommand) -> None:
        """Inject a manual command directly (scripted pilots, tests)."""
        self.submit("command", command=command)

    def request_select(self, bbox: BoundingBox) -> None:
        self.submit("select", bbox=bbox)

    def request_mode(self, mode: Mode | str) -> None:
        self.submit("mode", mode=Mode(mode))

    @property
    def has_frame(self) -> bool:
        return self._last_frame is not None

    @property
    def command_count(self) -> int:
        return self._command_count

    @property
    def sim_time_s(self) -> float:
        return self._flight.drone.t

    @property
    def drone_state(self) -> DroneState:
        return self._flight.drone

    @property
    def mode(self) -> Mode:
        return self._flight.mode

    @property
    def phase(self) -> Phase:
        return self._flight.phase

    @property
    def last_result(self) -> TrackResult | None:
        return self._result

    @property
    def session(self) -> CaptureSession | None:
        return self._session

    def snapshot(self) -> dict:
        """Thread-safe status view for REST/telemetry consumers."""
        with self._lock:
            f = self._flight
            result = self._result
            session = self._session
            return {
                "ts_ms": f.drone.t * 1000.0,
                "pose": {
                    "x": f.drone.x, "y": f.drone.y, "z": f.drone.z,
                    "roll": f.drone.roll, "pitch": f.drone.pitch, "yaw": f.drone.yaw,
                },
                "velocity": {
                    "vx": f.drone.vx, "vy": f.drone.vy,
                    "vz": f.drone.vertical_velocity, "yaw_rate": f.drone.yaw_rate,
                },
                "phase": f.phase.value,
                "mode": f.mode.value,
                "halted": f.halted,
                "tracking": (
                    None
                    if result is None or f.mode == Mode.MANUAL
                    else {
                        "psr": None if math.isinf(result.psr) else result.psr,
                        "valid": result.valid,
                        "bbox": [result.bbox.x_min, result.bbox.y_min,
                                 result.bbox.x_max, result.bbox.y_max],
                        "centroid": list(result.centroid),
                    }
                ),
                "captures": (
                    None
                    if session is None
                    else {
                        "attempted": session.attempted_count,
                        "accepted": session.accepted_count,
                        "session_id": session.session_id,
                    }
                ),
                "frame_seq": self._frame_seq,
                "command_count": self._command_count,
                "speed_cap": self.config.speed_cap,
            }

    # ------------------------------------------------------------- event side

    def _emit(self, kind: str, payload: dict) -> None:
        if self.on_event is not None:
            self.on_event(kind, payload)

    def _collector_event(self, kind: str, payload: dict) -> None:
        # Collector speaks {capture, capture_rejected, error}; the wire
        # protocol folds rejections into capture events with accepted=False.
        if kind == "capture":
            self._emit("capture", {**payload, "accepted": True})
        elif kind == "capture_rejected":
            self._emit("capture", {**payload, "accepted": False})
        else:
            self._emit("error", payload)

    def _apply_event(self, kind: str, payload: dict) -> None:
        f = self._flight
        if kind == "takeoff":
            if f.phase == Phase.GROUNDED:
                f.phase = Phase.TAKEOFF
                f.manual_cmd = hover()
            else:
                self._emit("error", {"reason": "takeoff refused: already airborne"})
        elif kind == "land":
            if f.phase in (Phase.TAKEOFF, Phase.FLYING):
                f.phase = Phase.LANDING
            elif f.phase == Phase.GROUNDED:
                self._emit("error", {"reason": "land refused: already grounded"})
        elif kind == "stop":
            f.halted = True
            f.manual_cmd = hover()
        elif kind == "go":
            f.halted = False
        elif kind == "stroke":
            nav: NavCommand = payload["nav"]
            f.manual_cmd = nav_to_control(nav, ts_ms=f.drone.t * 1000.0)
            if f.mode != Mode.MANUAL:
                self._set_mode(Mode.MANUAL, reason="manual stroke override")
        elif kind == "command":
            f.manual_cmd = payload["command"]
            if f.mode != Mode.MANUAL:
                self._set_mode(Mode.MANUAL, reason="direct command override")
        elif kind == "select":
            self._apply_select(payload["bbox"])
        elif kind == "mode":
            self._apply_mode_request(payload["mode"])
        else:
            self._emit("error", {"reason": f"unknown control event {kind!r}"})

    def _apply_select(self, bbox: BoundingBox) -> None:
        if self._last_frame is None:
            self._emit("error", {"reason": "select refused: no camera frame yet"})
            return
        try:
            self._filter = train(self._last_frame, bbox, self.tracker_config, self._rng)
        except ValueError as exc:
            self._emit("error", {"reason": f"select refused: {exc}"})
            return
        self._result = initial_result(bbox, seq=self._last_frame.seq)
        self._pd.reset()
        self._flight.track_lost = False
        self._flight.servo_cmd = hover()
        self._set_mode(Mode.TRACKING, reason="target selected")

    def _apply_mode_request(self, mode: Mode) -> None:
        if mode in (Mode.TRACKING, Mode.COLLECTING) and self._filter is None:
            self._emit("error", {"reason": f"{mode.value} refused: no target selected"})
            return
        self._set_mode(mode, reason="client request")

    def _set_mode(self, mode: Mode, reason: str) -> None:
        f = self._flight
        if mode == f.mode:
            return
        if f.mode == Mode.COLLECTING and self._session is not None:
            self._session.finalize()
            self._session = None
        if mode == Mode.COLLECTING:
            self._session_count += 1
            session_id = (
                f"{self._session_prefix}-{self._session_count:03d}"
                if self._session_prefix
                else None
            )
            self._session = CaptureSession(
                self.config.capture_dir,
                psr_threshold=self.tracker_config.psr_threshold,
                period_ms=self.config.capture_period_ms,
                scene_ref=self.scene_ref,
                session_id=session_id,
                stop_on_loss=self.config.stop_on_loss,
                on_event=self._collector_event,
            )
        if mode == Mode.MANUAL:
            f.servo_cmd = hover()
        previous, f.mode = f.mode, mode
        self._emit("mode_change", {"mode": mode.value, "from": previous.value, "reason": reason})

    # -------------------------------------------------------------- the tick

    def tick(self) -> None:
        """Advance exactly one 10 ms control step (simulation time)."""
        with self._lock:
            self._tick_once()

    def _tick_once(self) -> None:
        while True:
            try:
                kind, payload = self._events.get_nowait()
            except queue.Empty:
                break
            self._apply_event(kind, payload)

        f = self._flight
        now_ms = f.drone.t * 1000.0
        command = self._flight_command(now_ms)
        if self.on_command is not None:
            self.on_command(command)
        f.drone = step(f.drone, command, self.config.tick_s, self.drone_config)
        self._command_count += 1
        self._tick_count += 1
        self.path_log.maybe_log(f.drone)

        if f.phase == Phase.TAKEOFF and f.drone.z >= self.config.takeoff_altitude:
            f.phase = Phase.FLYING
        elif f.phase == Phase.LANDING and f.drone.z <= 1e-3:
            f.phase = Phase.GROUNDED
            f.halted = False

        if f.drone.t + 1e-9 >= self._next_render_s:
            self._next_render_s += 1.0 / self.config.render_fps
            self._render_tick()

        if f.drone.t + 1e-9 >= self._next_telemetry_s:
            self._next_telemetry_s += 1.0 / self.config.telemetry_hz
            if self.on_telemetry is not None:
                self.on_telemetry(self._telemetry_unlocked())

    def _flight_command(self, now_ms: float) -> ControlCommand:
        f = self._flight
        if f.halted or f.phase == Phase.GROUNDED:
            return hover(now_ms)
        if f.phase == Phase.TAKEOFF:
            return ControlCommand(vertical=self.config.takeoff_vertical, ts_ms=now_ms)
        if f.phase == Phase.LANDING:
            return ControlCommand(vertical=self.config.landing_vertical, ts_ms=now_ms)
        if f.mode == Mode.MANUAL:
            return f.manual_cmd
        return f.servo_cmd  # refreshed on render ticks, held between them

    def _render_tick(self) -> None:
        f = self._flight
        self._frame_seq += 1
        frame = render(
            f.drone, self.scene, self.camera,
            seq=self._frame_seq, ts_ms=f.drone.t * 1000.0,
        )
        self._last_frame = frame

        result: TrackResult | None = None
        if self._filter is not None and self._result is not None:
            result = track(self._filter, frame, self._result)
            self._filter = update(self._filter, frame, result)
            self._result = result
            if f.mode in (Mode.TRACKING, Mode.COLLECTING):
                self._refresh_servo(result, frame.ts_ms)
                if f.mode == Mode.COLLECTING and self._session is not None:
                    self._session.maybe_capture(result, frame, f.drone, frame.ts_ms)

        if self.on_frame is not None:
            show = result if f.mode in (Mode.TRACKING, Mode.COLLECTING) else None
            self.on_frame(frame, show)

    def _refresh_servo(self, result: TrackResult, now_ms: float) -> None:
        f = self._flight
        if f.phase != Phase.FLYING:
            f.servo_cmd = hover(now_ms)
            return
        command, lost = servo_command(
            result,
            self._pd,
            (float(self.camera.width), float(self.camera.height)),
            now_ms,
            mode=self.config.servo_mode,
            orbit_roll=self.config.orbit_roll,
        )
        f.servo_cmd = command
        if lost and not f.track_lost:
            f.track_lost = True
            self._emit("track_lost", {"psr": result.psr, "seq": result.seq})
        elif not lost and f.track_lost:
            f.track_lost = False

    def _telemetry_unlocked(self) -> dict:
        # snapshot() grabs the lock; build the same payload lock-free here
        # since _tick_once already holds it.
        f = self._flight
        result = self._result
        session = self._session
        return {
            "ts_ms": f.drone.t * 1000.0,
            "pose": {
                "x": f.drone.x, "y": f.drone.y, "z": f.drone.z,
                "roll": f.drone.roll, "pitch": f.drone.pitch, "yaw": f.drone.yaw,
            },
            "velocity": {
                "vx": f.drone.vx, "vy": f.drone.vy,
                "vz": f.drone.vertical_velocity, "yaw_rate": f.drone.yaw_rate,
            },
            "phase": f.phase.value,
            "mode": f.mode.value,
            "halted": f.halted,
            "tracking": (
                None
                if result is None or f.mode == Mode.MANUAL
                else {
                    "psr": None if math.isinf(result.psr) else result.psr,
                    "valid": result.valid,
                    "bbox": [result.bbox.x_min, result.bbox.y_min,
                             result.bbox.x_max, result.bbox.y_max],
                    "centroid": list(result.centroid),
                }
            ),
            "captures": (
                None
                if session is None
                else {
                    "attempted": session.attempted_count,
                    "accepted": session.accepted_count,
                    "session_id": session.session_id,
                }
            ),
            "frame_seq": self._frame_seq,
            "command_count": self._command_count,
            "speed_cap": self.config.speed_cap,
        }

    # ---------------------------------------------------------- headless run

    def run_for(self, seconds: float) -> None:
        """Advance simulated time by `seconds` as fast as the host allows."""
        for _ in range(int(round(seconds / self.config.tick_s))):
            self.tick()

    def close(self) -> None:
        """Stop the realtime thread (if any) and finalize an open session."""
        self.stop_realtime()
        if self._session is not None:
            self._session.finalize()
            self._session = None

    # ---------------------------------------------------------- realtime run

    def start_realtime(self, sim_speed: float = 1.0) -> None:
        """Run ticks on a daemon thread paced to wall time (speed multiplier)."""
        if self._thread is not None:
            raise ControlError("realtime loop already running")
        if sim_speed <= 0:
            raise ControlError(f"sim_speed must be positive, got {sim_speed}")
        self._running = True
        self._thread = threading.Thread(
            target=self._realtime_loop, args=(sim_speed,), name="control-loop", daemon=True
        )
        self._thread.start()

    def stop_realtime(self) -> None:
        self._running = False
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None

    def _realtime_loop(self, sim_speed: float) -> None:
        period = self.config.tick_s / sim_speed
        deadline = time.perf_counter()
        while self._running:
            now = time.perf_counter()
            if now < deadline:
                # Coarse sleep, then a short spin to hit the deadline closely.
                if deadline - now > 0.002:
                    time.sleep(deadline - now - 0.002)
                while time.perf_counter() < deadline:
                    pass
            self._tick_starts.append(time.perf_counter())
            self.tick()
            deadline += period
            if time.perf_counter() - deadline > 0.25:
                deadline = time.perf_counter()  # fell far behind; resync

    def jitter_stats(self) -> dict:
        """Tick-interval statistics from the realtime pacer."""
        starts = list(self._tick_starts)
        if len(starts) < 3:
            return {"samples": len(starts), "mean_ms": None, "std_ms": None, "ratio": None}
        intervals = [(b - a) * 1000.0 for a, b in zip(starts, starts[1:])]
        mean = statistics.fmean(intervals)
        std = statistics.pstdev(intervals)
        return {
            "samples": len(intervals),
            "mean_ms": mean,
            "std_ms": std,
            "ratio": std / mean if mean > 0 else None,
        }
