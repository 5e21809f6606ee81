"""Flight-path logging: fixed-period pose sampling and plain-text export."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .drone import DroneState

PATH_HEADER = "t,x,y,z,yaw"
DEFAULT_PERIOD_S = 0.1


@dataclass(frozen=True)
class PathSample:
    t: float
    x: float
    y: float
    z: float
    yaw: float


class PathLogger:
    """Samples the drone pose once per period of simulation time."""

    def __init__(self, period_s: float = DEFAULT_PERIOD_S) -> None:
        if period_s <= 0.0:
            raise ValueError(f"period must be positive, got {period_s}")
        self.period_s = period_s
        self._samples: list[PathSample] = []
        self._next_due: float = 0.0

    def maybe_log(self, state: DroneState) -> bool:
        """Record the pose if a sampling period has elapsed; True if logged."""
        if state.t + 1e-9 < self._next_due:
            return False
        self._samples.append(
            PathSample(t=state.t, x=state.x, y=state.y, z=state.z, yaw=state.yaw)
        )
        # Schedule the next due time; catch up if the caller skipped ahead.
        self._next_due += self.period_s
        while self._next_due <= state.t:
            self._next_due += self.period_s
        return True

    @property
    def samples(self) -> tuple[PathSample, ...]:
        return tuple(self._samples)

    def rows(self) -> list[str]:
        return [
            f"{s.t:.6f},{s.x:.6f},{s.y:.6f},{s.z:.6f},{s.yaw:.6f}"
            for s in self._samples
        ]

    def write_csv(self, path: str | Path) -> Path:
        """Write the documented plain-text table: header + one row per sample."""
        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text("\n".join([PATH_HEADER, *self.rows()]) + "\n", encoding="utf-8")
        return out
