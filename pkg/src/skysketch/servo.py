"""Visual servoing: normalized centroid errors driven through a PD law.

The x-axis error steers the yaw rate (turn toward the target) and the y-axis
error steers the vertical velocity (climb when the target sits above centre).
Roll and pitch stay locked at zero while holding, or carry a constant
tangential component while orbiting; either way the command vector is clamped
to the unit box before it leaves this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .tracker import TrackResult


class ServoInputError(ValueError):
    """Servo asked to step on inputs it cannot use."""


DEFAULT_GAIN_P = 0.25
DEFAULT_GAIN_D = 0.25
DERIVATIVE_SMOOTHING = 0.7  # weight kept from the previous derivative estimate

HOLD = "hold"
ORBIT = "orbit"
SERVO_MODES = (HOLD, ORBIT)


def clamp_unit(value: float) -> float:
    return max(-1.0, min(1.0, value))


@dataclass(frozen=True)
class CentroidError:
    """Target offset from canvas centre, normalized by full canvas span."""

    error_x: float
    error_y: float


def centroid_error(centroid: tuple[float, float], canvas: tuple[float, float]) -> CentroidError:
    """error = (centroid - centre) / full span, per axis.

    An on-canvas centroid therefore maps into [-0.5, 0.5] on both axes.
    """
    x_max, y_max = canvas
    if x_max <= 0 or y_max <= 0:
        raise ServoInputError(f"canvas dimensions must be positive, got {canvas}")
    cx, cy = centroid
    return CentroidError(
        error_x=(cx - x_max / 2.0) / x_max,
        error_y=(cy - y_max / 2.0) / y_max,
    )


@dataclass(frozen=True)
class ControlCommand:
    """4-axis drone command; every component is clamped into [-1, 1]."""

    roll: float = 0.0
    pitch: float = 0.0
    vertical: float = 0.0
    yaw_rate: float = 0.0
    ts_ms: float = 0.0

    def __post_init__(self) -> None:
        for name in ("roll", "pitch", "vertical", "yaw_rate"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ServoInputError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, clamp_unit(value))

    @property
    def axes(self) -> tuple[float, float, float, float]:
        return (self.roll, self.pitch, self.vertical, self.yaw_rate)


def hover(ts_ms: float = 0.0) -> ControlCommand:
    return ControlCommand(ts_ms=ts_ms)


class PdController:
    """Two-axis PD law over centroid errors with a smoothed derivative.

    The derivative is a first difference passed through an exponential
    low-pass (weight ``DERIVATIVE_SMOOTHING`` on the old estimate), which
    keeps pixel-quantization noise out of the command stream.
    """

    def __init__(
        self,
        kp: float = DEFAULT_GAIN_P,
        kd: float = DEFAULT_GAIN_D,
        derivative_smoothing: float = DERIVATIVE_SMOOTHING,
    ) -> None:
        if kp < 0.0 or kd < 0.0:
            raise ServoInputError(f"gains must be >= 0, got kp={kp}, kd={kd}")
        if not 0.0 <= derivative_smoothing <= 1.0:
            raise ServoInputError(
                f"derivative_smoothing must lie in [0, 1], got {derivative_smoothing}"
            )
        self.kp = kp
        self.kd = kd
        self.derivative_smoothing = derivative_smoothing
        self._prev_error: CentroidError | None = None
        self._prev_ts_ms: float | None = None
        self._deriv_x = 0.0
        self._deriv_y = 0.0

    def reset(self) -> None:
        """Forget history (call when tracking is lost or re-engaged)."""
        self._prev_error = None
        self._prev_ts_ms = None
        self._deriv_x = 0.0
        self._deriv_y = 0.0

    def step(self, error: CentroidError, now_ms: float) -> tuple[float, float]:
        """One PD evaluation; returns clamped (yaw_rate, vertical) terms."""
        if self._prev_ts_ms is not None and now_ms <= self._prev_ts_ms:
            raise ServoInputError(
                f"timestamps must increase, got {now_ms} after {self._prev_ts_ms}"
            )
        if self._prev_error is not None and self._prev_ts_ms is not None:
            dt = (now_ms - self._prev_ts_ms) / 1000.0
            raw_dx = (error.error_x - self._prev_error.error_x) / dt
            raw_dy = (error.error_y - self._prev_error.error_y) / dt
            a = self.derivative_smoothing
            self._deriv_x = a * self._deriv_x + (1.0 - a) * raw_dx
            self._deriv_y = a * self._deriv_y + (1.0 - a) * raw_dy
        self._prev_error = error
        self._prev_ts_ms = now_ms

        yaw = self.kp * error.error_x + self.kd * self._deriv_x
        # Image y grows downward: a target above centre (error_y < 0) means climb.
        vertical = -(self.kp * error.error_y + self.kd * self._deriv_y)
        return clamp_unit(yaw), clamp_unit(vertical)


def servo_command(
    result: TrackResult,
    pd: PdController,
    canvas: tuple[float, float],
    now_ms: float,
    mode: str = HOLD,
    orbit_roll: float = 0.2,
) -> tuple[ControlCommand, bool]:
    """Turn one tracking result into a command; flags loss of the target.

    A lost target yields the all-zero hover command (and a reset PD history)
    so the drone fail-safes in place rather than chasing stale errors.
    """
    if mode not in (HOLD, ORBIT):
        raise ServoInputError(f"unknown servo mode {mode!r}")
    if not result.valid:
        pd.reset()
        return hover(ts_ms=now_ms), True
    error = centroid_error(result.centroid, canvas)
    yaw, vertical = pd.step(error, now_ms)
    roll = clamp_unit(orbit_roll) if mode == ORBIT else 0.0
    return (
        ControlCommand(roll=roll, pitch=0.0, vertical=vertical, yaw_rate=yaw, ts_ms=now_ms),
        False,
    )
