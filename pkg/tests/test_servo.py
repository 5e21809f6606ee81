"""PD visual servoing: centroid-error arithmetic, PD law, command safety."""

from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skysketch.frames import BoundingBox
from skysketch.servo import (
    HOLD,
    ORBIT,
    CentroidError,
    ControlCommand,
    PdController,
    ServoInputError,
    centroid_error,
    hover,
    servo_command,
)
from skysketch.tracker import TrackResult, initial_result


def result_at(cx: float, cy: float, valid: bool = True) -> TrackResult:
    box = BoundingBox.centered(cx, cy, 40.0, 40.0)
    return TrackResult(centroid=(cx, cy), bbox=box, peak=1.0, psr=20.0, valid=valid, seq=0)


class TestCentroidError:
    def test_centered_target_is_zero(self):
        e = centroid_error((320.0, 180.0), (640.0, 360.0))
        assert e.error_x == 0.0 and e.error_y == 0.0

    def test_right_edge_is_exactly_half(self):
        e = centroid_error((640.0, 180.0), (640.0, 360.0))
        assert abs(e.error_x - 0.5) < 1e-12
        assert abs(e.error_y) < 1e-12

    def test_top_edge_is_exactly_minus_half(self):
        e = centroid_error((320.0, 0.0), (640.0, 360.0))
        assert abs(e.error_y - (-0.5)) < 1e-12
        assert abs(e.error_x) < 1e-12

    def test_rejects_degenerate_canvas(self):
        with pytest.raises(ServoInputError):
            centroid_error((0.0, 0.0), (0.0, 360.0))

    @settings(max_examples=200)
    @given(
        cx=st.floats(min_value=0.0, max_value=640.0),
        cy=st.floats(min_value=0.0, max_value=360.0),
    )
    def test_on_canvas_centroid_bounded(self, cx, cy):
        e = centroid_error((cx, cy), (640.0, 360.0))
        assert -0.5 <= e.error_x <= 0.5
        assert -0.5 <= e.error_y <= 0.5


class TestPdController:
    def test_zero_error_zero_command(self):
        pd = PdController()
        assert pd.step(CentroidError(0.0, 0.0), 10.0) == (0.0, 0.0)
        assert pd.step(CentroidError(0.0, 0.0), 20.0) == (0.0, 0.0)

    def test_default_gains(self):
        pd = PdController()
        assert pd.kp == 0.25 and pd.kd == 0.25

    def test_steady_state_is_pure_proportional(self):
        # Constant error: the derivative settles to zero, leaving kp * e.
        pd = PdController()
        yaw = vertical = 0.0
        for tick in range(1, 200):
            yaw, vertical = pd.step(CentroidError(0.4, 0.0), tick * 10.0)
        assert yaw == pytest.approx(0.25 * 0.4, abs=1e-9)
        assert vertical == pytest.approx(0.0, abs=1e-9)

    def test_saturation_clamps_to_unit(self):
        pd = PdController(kp=10.0, kd=0.0)
        yaw, _ = pd.step(CentroidError(0.5, 0.0), 10.0)
        assert yaw == 1.0

    def test_vertical_sign_flips_image_y(self):
        # Target above centre (error_y < 0) must command a climb (> 0).
        pd = PdController(kd=0.0)
        _, vertical = pd.step(CentroidError(0.0, -0.3), 10.0)
        assert vertical == pytest.approx(0.25 * 0.3)

    def test_rejects_non_monotonic_timestamps(self):
        pd = PdController()
        pd.step(CentroidError(0.1, 0.0), 100.0)
        with pytest.raises(ServoInputError):
            pd.step(CentroidError(0.1, 0.0), 100.0)

    def test_derivative_smoothing_tempers_jumps(self):
        smooth = PdController()
        raw = PdController(derivative_smoothing=0.0)
        for pd in (smooth, raw):
            pd.step(CentroidError(0.0, 0.0), 0.0)
        y_smooth, _ = smooth.step(CentroidError(0.02, 0.0), 10.0)
        y_raw, _ = raw.step(CentroidError(0.02, 0.0), 10.0)
        assert abs(y_smooth) < abs(y_raw)

    def test_reset_forgets_history(self):
        pd = PdController()
        pd.step(CentroidError(0.4, 0.0), 10.0)
        pd.reset()
        # After reset an older timestamp is acceptable again.
        yaw, _ = pd.step(CentroidError(0.1, 0.0), 5.0)
        assert yaw == pytest.approx(0.25 * 0.1)

    def test_rejects_negative_gains(self):
        with pytest.raises(ServoInputError):
            PdController(kp=-0.1)

    @settings(max_examples=300, deadline=None)
    @given(
        ex=st.floats(min_value=-10, max_value=10, allow_nan=False),
        ey=st.floats(min_value=-10, max_value=10, allow_nan=False),
        kp=st.floats(min_value=0, max_value=50, allow_nan=False),
        kd=st.floats(min_value=0, max_value=50, allow_nan=False),
        steps=st.integers(min_value=1, max_value=5),
    )
    def test_output_always_in_unit_box(self, ex, ey, kp, kd, steps):
        pd = PdController(kp=kp, kd=kd)
        rngish = [(ex * (i % 3 - 1), ey * ((i + 1) % 3 - 1)) for i in range(steps)]
        for i, (x, y) in enumerate(rngish):
            yaw, vertical = pd.step(CentroidError(x, y), 10.0 * (i + 1))
            assert -1.0 <= yaw <= 1.0
            assert -1.0 <= vertical <= 1.0

    def test_sign_correctness_proportional_only(self):
        pd = PdController(kd=0.0)
        for ex in (-0.4, -0.1, 0.1, 0.4):
            pd.reset()
            yaw, _ = pd.step(CentroidError(ex, 0.0), 10.0)
            assert math.copysign(1, yaw) == math.copysign(1, ex)


class TestServoCommand:
    def test_centered_target_hold_mode_is_all_zero(self):
        cmd, lost = servo_command(result_at(320.0, 180.0), PdController(), (640, 360), 10.0)
        assert cmd.axes == (0.0, 0.0, 0.0, 0.0)
        assert lost is False

    def test_target_right_of_center_turns_right(self):
        cmd, _ = servo_command(result_at(480.0, 180.0), PdController(), (640, 360), 10.0)
        assert cmd.yaw_rate > 0.0

    def test_lost_target_fails_safe_to_hover(self):
        cmd, lost = servo_command(result_at(480.0, 180.0, valid=False), PdController(), (640, 360), 10.0)
        assert lost is True
        assert cmd.axes == (0.0, 0.0, 0.0, 0.0)

    def test_hold_mode_locks_roll_and_pitch(self):
        pd = PdController()
        for tick in range(1, 50):
            cmd, _ = servo_command(result_at(500.0, 100.0), pd, (640, 360), tick * 10.0)
            assert cmd.roll == 0.0
            assert cmd.pitch == 0.0

    def test_orbit_mode_carries_tangential_roll(self):
        cmd, _ = servo_command(
            result_at(320.0, 180.0), PdController(), (640, 360), 10.0, mode=ORBIT, orbit_roll=0.3
        )
        assert cmd.roll == pytest.approx(0.3)
        assert cmd.pitch == 0.0

    def test_rejects_unknown_mode(self):
        with pytest.raises(ServoInputError):
            servo_command(result_at(320.0, 180.0), PdController(), (640, 360), 10.0, mode="chase")


class TestControlCommand:
    def test_components_clamped(self):
        cmd = ControlCommand(roll=2.0, pitch=-3.0, vertical=0.5, yaw_rate=1.5)
        assert cmd.axes == (1.0, -1.0, 0.5, 1.0)

    def test_rejects_non_finite(self):
        with pytest.raises(ServoInputError):
            ControlCommand(roll=float("nan"))

    def test_hover_is_zero(self):
        assert hover(5.0).axes == (0.0, 0.0, 0.0, 0.0)
        assert hover(5.0).ts_ms == 5.0
