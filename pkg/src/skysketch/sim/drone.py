"""First-order-lag quadcopter kinematics.

Commanded tilt, climb rate, and yaw rate are tracked through a first-order
lag with time constant tau; tilt produces horizontal acceleration against a
linear drag chosen so a sustained full tilt tops out at max_speed.  Yaw and
altitude integrate their lagged rates with exact closed-form integrals, so
long-horizon runs accumulate no integrator drift on those axes.

Yaw convention: positive yaw turns the nose toward the drone's right-hand
side when viewed from above.  Forward at yaw 0 is world +x; the right-hand
side is world -y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from ..servo import ControlCommand


class SimInputError(ValueError):
    """Simulation stepped with inputs outside its contract."""


MAX_STEP_S = 0.1


@dataclass(frozen=True)
class DroneConfig:
    tau: float = 0.2            # s, first-order lag on all commanded rates
    max_tilt: float = 0.35      # rad, attitude at full roll/pitch command
    max_climb: float = 1.0      # m/s at full vertical command
    max_yaw_rate: float = 6.11  # rad/s at full yaw command (AR-class firmware cap)
    max_speed: float = 11.0     # m/s, terminal horizontal speed at full tilt
    tilt_accel: float = 9.81    # m/s^2 per unit tan(tilt)

    def __post_init__(self) -> None:
        for name in ("tau", "max_tilt", "max_climb", "max_yaw_rate", "max_speed"):
            if getattr(self, name) <= 0.0:
                raise SimInputError(f"{name} must be positive")
        if self.max_tilt >= math.pi / 2:
            raise SimInputError("max_tilt must stay below vertical")

    @property
    def drag(self) -> float:
        """Linear drag making max_speed the full-tilt terminal speed."""
        return self.tilt_accel * math.tan(self.max_tilt) / self.max_speed


@dataclass(frozen=True)
class DroneState:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    roll: float = 0.0              # rad, right-side-down positive
    pitch: float = 0.0             # rad, nose-down (forward accel) positive
    yaw: float = 0.0               # rad, see module docstring
    yaw_rate: float = 0.0          # rad/s
    vertical_velocity: float = 0.0  # m/s, up positive
    vx: float = 0.0                # m/s world frame
    vy: float = 0.0
    t: float = 0.0                 # s, simulation clock

    def __post_init__(self) -> None:
        for name in ("x", "y", "z", "roll", "pitch", "yaw", "yaw_rate",
                     "vertical_velocity", "vx", "vy", "t"):
            if not math.isfinite(getattr(self, name)):
                raise SimInputError(f"{name} must be finite")

    @property
    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    @property
    def forward(self) -> tuple[float, float]:
        return (math.cos(self.yaw), -math.sin(self.yaw))

    @property
    def right(self) -> tuple[float, float]:
        return (-math.sin(self.yaw), -math.cos(self.yaw))


def _lag(current: float, setpoint: float, decay: float) -> float:
    """Value after dt of first-order tracking, decay = exp(-dt/tau)."""
    return setpoint - (setpoint - current) * decay


def _lag_integral(current: float, setpoint: float, tau: float, dt: float, decay: float) -> float:
    """Exact integral of the lagged value over dt (closed form, no drift)."""
    return setpoint * dt - (setpoint - current) * tau * (1.0 - decay)


def step(
    state: DroneState,
    command: ControlCommand,
    dt: float,
    config: DroneConfig | None = None,
) -> DroneState:
    """Advance the drone one tick under a clamped 4-axis command."""
    cfg = config or DroneConfig()
    if not (0.0 < dt <= MAX_STEP_S):
        raise SimInputError(f"dt must lie in (0, {MAX_STEP_S}] s, got {dt}")

    decay = math.exp(-dt / cfg.tau)

    roll = _lag(state.roll, command.roll * cfg.max_tilt, decay)
    pitch = _lag(state.pitch, command.pitch * cfg.max_tilt, decay)

    yaw_sp = command.yaw_rate * cfg.max_yaw_rate
    yaw = state.yaw + _lag_integral(state.yaw_rate, yaw_sp, cfg.tau, dt, decay)
    yaw_rate = _lag(state.yaw_rate, yaw_sp, decay)

    climb_sp = command.vertical * cfg.max_climb
    z = state.z + _lag_integral(state.vertical_velocity, climb_sp, cfg.tau, dt, decay)
    vertical_velocity = _lag(state.vertical_velocity, climb_sp, decay)
    if z <= 0.0:
        z = 0.0
        vertical_velocity = max(0.0, vertical_velocity)

    # Tilt accelerates the drone along its body axes; linear drag opposes.
    fx, fy = state.forward
    rx, ry = state.right
    accel_fwd = cfg.tilt_accel * math.tan(pitch)
    accel_right = cfg.tilt_accel * math.tan(roll)
    ax = accel_fwd * fx + accel_right * rx - cfg.drag * state.vx
    ay = accel_fwd * fy + accel_right * ry - cfg.drag * state.vy
    vx = state.vx + ax * dt
    vy = state.vy + ay * dt
    speed = math.hypot(vx, vy)
    if speed > cfg.max_speed:
        vx *= cfg.max_speed / speed
        vy *= cfg.max_speed / speed
    x = state.x + (state.vx + vx) * 0.5 * dt
    y = state.y + (state.vy + vy) * 0.5 * dt

    return replace(
        state,
        x=x, y=y, z=z,
        roll=roll, pitch=pitch, yaw=yaw,
        yaw_rate=yaw_rate, vertical_velocity=vertical_velocity,
        vx=vx, vy=vy,
        t=state.t + dt,
    )
