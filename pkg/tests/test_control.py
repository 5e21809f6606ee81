"""Control loop: phases, modes, safety latch, cadence, closed-loop servoing."""

from __future__ import annotations

import math

import pytest

from skysketch.control import ControlLoop, LoopConfig, Mode, Phase
from skysketch.servo import ControlCommand
from skysketch.sim.camera import ground_truth_bbox
from skysketch.sim.scene import Billboard, CameraModel, Scene, make_texture
from skysketch.sketch import Direction, NavCommand


def make_loop(tmp_path, scene: Scene | None = None, **config_overrides) -> ControlLoop:
    config = LoopConfig(capture_dir=str(tmp_path / "captures"), **config_overrides)
    if scene is None:
        scene = Scene(background_seed=3)
        scene.add(
            Billboard("target", (4.0, 0.0, 1.1), 0.6, 0.6, make_texture("blotch", seed=5))
        )
    return ControlLoop(scene=scene, config=config, seed=9, session_prefix="test")


def fly(loop: ControlLoop) -> None:
    """Take off and settle into the flying phase."""
    loop.request_takeoff()
    loop.run_for(4.0)
    assert loop.phase == Phase.FLYING


def select_object(loop: ControlLoop, object_id: str = "target") -> None:
    loop.run_for(0.1)  # ensure at least one rendered frame
    box = ground_truth_bbox(loop.drone_state, loop.scene, loop.camera, object_id)
    assert box is not None
    loop.request_select(box)
    loop.run_for(0.02)


class TestPhases:
    def test_starts_grounded_and_manual(self, tmp_path):
        loop = make_loop(tmp_path)
        assert loop.phase == Phase.GROUNDED
        assert loop.mode == Mode.MANUAL

    def test_takeoff_reaches_altitude_and_flies(self, tmp_path):
        loop = make_loop(tmp_path)
        fly(loop)
        assert loop.drone_state.z >= loop.config.takeoff_altitude

    def test_land_returns_to_ground(self, tmp_path):
        loop = make_loop(tmp_path)
        fly(loop)
        loop.request_land()
        loop.run_for(6.0)
        assert loop.phase == Phase.GROUNDED
        assert loop.drone_state.z == 0.0

    def test_takeoff_while_airborne_raises_error_event(self, tmp_path):
        loop = make_loop(tmp_path)
        events = []
        loop.on_event = lambda kind, payload: events.append((kind, payload))
        fly(loop)
        loop.request_takeoff()
        loop.run_for(0.05)
        assert any(k == "error" and "takeoff" in p["reason"] for k, p in events)


class TestCadence:
    def test_headless_run_emits_exactly_100_commands_per_second(self, tmp_path):
        loop = make_loop(tmp_path)
        loop.run_for(10.0)
        assert loop.command_count == 1000
        assert loop.sim_time_s == pytest.approx(10.0, abs=1e-9)

    def test_telemetry_at_10hz(self, tmp_path):
        loop = make_loop(tmp_path)
        telemetry = []
        loop.on_telemetry = telemetry.append
        loop.run_for(1.0)
        assert 9 <= len(telemetry) <= 11

    def test_frames_at_30fps(self, tmp_path):
        loop = make_loop(tmp_path)
        frames = []
        loop.on_frame = lambda f, r: frames.append(f.seq)
        loop.run_for(1.0)
        assert 29 <= len(frames) <= 31
        assert frames == sorted(frames)


class TestSafetyLatch:
    def test_stop_zeroes_commands_within_two_ticks(self, tmp_path):
        loop = make_loop(tmp_path)
        commands: list[ControlCommand] = []
        loop.on_command = commands.append
        fly(loop)
        loop.request_stroke(NavCommand(Direction.E, 0.5, "translate"))
        loop.run_for(0.5)
        assert commands[-1].roll > 0.0
        loop.request_stop()
        loop.tick()
        loop.tick()
        assert commands[-1].axes == (0.0, 0.0, 0.0, 0.0)

    def test_stop_latch_survives_new_strokes_until_go(self, tmp_path):
        loop = make_loop(tmp_path)
        commands = []
        loop.on_command = commands.append
        fly(loop)
        loop.request_stop()
        loop.run_for(0.05)
        loop.request_stroke(NavCommand(Direction.N, 0.8, "translate"))
        loop.run_for(0.2)
        assert commands[-1].axes == (0.0, 0.0, 0.0, 0.0)
        loop.request_go()
        loop.run_for(0.2)
        assert commands[-1].pitch > 0.0  # the held stroke resumes

    def test_stop_keeps_mode(self, tmp_path):
        loop = make_loop(tmp_path)
        fly(loop)
        select_object(loop)
        loop.request_stop()
        loop.run_for(0.1)
        assert loop.mode == Mode.TRACKING
        assert loop.drone_state.yaw_rate == pytest.approx(0.0, abs=0.05)


class TestModes:
    def test_select_engages_tracking(self, tmp_path):
        loop = make_loop(tmp_path)
        events = []
        loop.on_event = lambda k, p: events.append(k)
        fly(loop)
        select_object(loop)
        assert loop.mode == Mode.TRACKING
        assert "mode_change" in events
        assert loop.last_result is not None

    def test_select_without_frame_is_refused(self, tmp_path):
        loop = make_loop(tmp_path)
        events = []
        loop.on_event = lambda k, p: events.append((k, p))
        from skysketch.frames import BoundingBox

        loop.request_select(BoundingBox(10, 10, 60, 60))
        loop.tick()
        assert any(k == "error" and "no camera frame" in p["reason"] for k, p in events)
        assert loop.mode == Mode.MANUAL

    def test_tracking_mode_without_target_is_refused(self, tmp_path):
        loop = make_loop(tmp_path)
        events = []
        loop.on_event = lambda k, p: events.append((k, p))
        loop.request_mode("tracking")
        loop.tick()
        assert any(k == "error" and "no target" in p["reason"] for k, p in events)

    def test_stroke_during_tracking_returns_to_manual(self, tmp_path):
        loop = make_loop(tmp_path)
        fly(loop)
        select_object(loop)
        loop.request_stroke(NavCommand(Direction.E, 0.3, "yaw"))
        loop.run_for(0.05)
        assert loop.mode == Mode.MANUAL
        # The trained filter is kept: tracking can resume without re-select.
        loop.request_mode("tracking")
        loop.run_for(0.05)
        assert loop.mode == Mode.TRACKING

    def test_collecting_opens_and_finalizes_session(self, tmp_path):
        loop = make_loop(tmp_path)
        fly(loop)
        select_object(loop)
        loop.request_mode("collecting")
        loop.run_for(2.5)
        assert loop.mode == Mode.COLLECTING
        session = loop.session
        assert session is not None
        assert session.accepted_count >= 2
        loop.request_mode("manual")
        loop.run_for(0.05)
        assert loop.session is None
        manifest = tmp_path / "captures" / session.session_id / "manifest.json"
        assert manifest.exists()

    def test_track_loss_emits_event_and_hovers(self, tmp_path):
        loop = make_loop(tmp_path)
        events = []
        loop.on_event = lambda k, p: events.append(k)
        commands = []
        loop.on_command = commands.append
        fly(loop)
        select_object(loop)
        loop.run_for(0.5)
        loop.scene.set_visible("target", False)
        loop.run_for(1.0)
        assert "track_lost" in events
        assert commands[-1].axes == (0.0, 0.0, 0.0, 0.0)
        assert loop.mode == Mode.TRACKING  # engaged, waiting for recovery

    def test_snapshot_exposes_status(self, tmp_path):
        loop = make_loop(tmp_path)
        fly(loop)
        snap = loop.snapshot()
        assert snap["phase"] == "flying"
        assert snap["mode"] == "manual"
        assert snap["pose"]["z"] > 0.5
        assert snap["tracking"] is None


class TestClosedLoop:
    def off_axis_scene(self, z: float, bearing: float) -> Scene:
        scene = Scene(background_seed=11)
        distance = 4.0
        scene.add(
            Billboard(
                "mark",
                (distance * math.cos(bearing), -distance * math.sin(bearing), z),
                0.6,
                0.6,
                make_texture("blotch", seed=6),
            )
        )
        return scene

    def test_quarter_frame_offset_converges_under_five_seconds(self, tmp_path):
        # Start with the target a quarter frame-width right of centre and let
        # the yaw servo pull it in: |error_x| < 0.02 within 5 simulated
        # seconds, with roll and pitch locked at exactly zero throughout.
        cam = CameraModel()
        offset_px = 0.25 * cam.width
        bearing = math.atan(offset_px / cam.focal_px)

        loop = make_loop(tmp_path, scene=self.off_axis_scene(z=1.12, bearing=bearing))
        fly(loop)

        # Pin the target to the drone's actual hover height: pure yaw test.
        z = loop.drone_state.z
        tex = loop.scene.get("mark").texture
        center = loop.scene.get("mark").center
        loop.scene.objects["mark"] = Billboard("mark", (center[0], center[1], z), 0.6, 0.6, tex)

        commands: list[ControlCommand] = []
        loop.on_command = commands.append
        select_object(loop, "mark")
        start = loop.sim_time_s
        n_commands = len(commands)

        converged_at = None
        while loop.sim_time_s - start < 5.0:
            loop.run_for(0.1)
            r = loop.last_result
            assert r is not None and r.valid
            error_x = (r.centroid[0] - cam.width / 2.0) / cam.width
            if abs(error_x) < 0.02:
                converged_at = loop.sim_time_s - start
                break
        assert converged_at is not None, "servo failed to centre the target in 5 s"

        for cmd in commands[n_commands:]:
            assert cmd.roll == 0.0
            assert cmd.pitch == 0.0

    def test_initial_offset_is_a_quarter_frame(self, tmp_path):
        cam = CameraModel()
        offset_px = 0.25 * cam.width
        bearing = math.atan(offset_px / cam.focal_px)
        loop = make_loop(tmp_path, scene=self.off_axis_scene(z=1.12, bearing=bearing))
        fly(loop)
        box = ground_truth_bbox(loop.drone_state, loop.scene, loop.camera, "mark")
        error_x = (box.center[0] - cam.width / 2.0) / cam.width
        assert error_x == pytest.approx(0.25, abs=0.01)


class TestDeterminism:
    def script(self, loop: ControlLoop) -> None:
        loop.request_takeoff()
        loop.run_for(3.0)
        loop.request_stroke(NavCommand(Direction.E, 0.4, "yaw"))
        loop.run_for(1.0)
        loop.request_stop()
        loop.run_for(0.5)
        loop.request_go()
        loop.request_land()
        loop.run_for(3.0)

    def test_identical_scripts_identical_paths(self, tmp_path):
        a = make_loop(tmp_path / "a")
        b = make_loop(tmp_path / "b")
        self.script(a)
        self.script(b)
        assert a.path_log.rows() == b.path_log.rows()
        assert a.command_count == b.command_count
