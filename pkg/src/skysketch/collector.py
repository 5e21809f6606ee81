"""Autonomous dataset collection: confidence-gated captures at a fixed rate.

A capture session samples the tracked frame once per period (default 1 s of
stream time) while tracking confidence stays above the threshold.  Due ticks
that find tracking invalid are recorded as rejections — the gate's behaviour
stays auditable — and file writes happen on a background thread with a
bounded queue, so a slow disk pauses collection instead of stalling the
control loop or silently dropping images.
"""

from __future__ import annotations

import json
import queue
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import cv2
import numpy as np

from .frames import GrayFrame
from .sim.drone import DroneState
from .tracker import TrackResult

MANIFEST_FORMAT = "skysketch-capture-manifest/1"
MANIFEST_NAME = "manifest.json"
DEFAULT_PERIOD_MS = 1000.0


class CollectorError(RuntimeError):
    """Session misuse or a storage failure that halted collection."""


@dataclass(frozen=True)
class CaptureRecord:
    image_path: str | None  # relative to the session directory; None = rejected
    seq: int
    ts_ms: float
    bbox: tuple[float, float, float, float] | None
    psr: float
    drone_pose: tuple[float, float, float, float]  # x, y, z, yaw
    accepted: bool

    def to_json(self) -> dict:
        return {
            "image": self.image_path,
            "seq": self.seq,
            "ts_ms": self.ts_ms,
            "bbox": list(self.bbox) if self.bbox else None,
            "psr": self.psr if self.psr != float("inf") else None,
            "pose": {
                "x": self.drone_pose[0],
                "y": self.drone_pose[1],
                "z": self.drone_pose[2],
                "yaw": self.drone_pose[3],
            },
            "accepted": self.accepted,
        }


class CaptureSession:
    """One collection run: an image directory plus an append-only manifest."""

    def __init__(
        self,
        out_dir: str | Path,
        psr_threshold: float = 8.0,
        period_ms: float = DEFAULT_PERIOD_MS,
        scene_ref: str = "",
        session_id: str | None = None,
        stop_on_loss: bool = False,
        queue_size: int = 8,
        on_event: Callable[[str, dict], None] | None = None,
    ) -> None:
        if period_ms <= 0:
            raise CollectorError(f"capture period must be positive, got {period_ms}")
        self.session_id = session_id or f"session-{uuid.uuid4().hex[:12]}"
        self.psr_threshold = psr_threshold
        self.period_ms = period_ms
        self.scene_ref = scene_ref
        self.stop_on_loss = stop_on_loss
        self.session_dir = Path(out_dir) / self.session_id
        self.image_dir = self.session_dir / "images"
        self.image_dir.mkdir(parents=True, exist_ok=True)

        self.records: list[CaptureRecord] = []
        self._on_event = on_event or (lambda kind, payload: None)
        self._next_due_ms: float | None = None
        self._halted = False
        self._finalized = False
        self._paused_reported = False
        self._frame_shape: tuple[int, int] | None = None

        self._queue: queue.Queue[tuple[Path, np.ndarray] | None] = queue.Queue(
            maxsize=queue_size
        )
        self._write_error: BaseException | None = None
        self._writer = threading.Thread(
            target=self._write_loop, name=f"capture-writer-{self.session_id}", daemon=True
        )
        self._writer.start()

    # ---------------------------------------------------------------- writer

    def _write_loop(self) -> None:
        while True:
            item = self._queue.get()
            try:
                if item is None:
                    return
                path, image = item
                if not cv2.imwrite(str(path), image):
                    raise OSError(f"image encoder refused {path}")
            except BaseException as exc:  # surfaced on the control thread
                self._write_error = exc
            finally:
                self._queue.task_done()

    # ---------------------------------------------------------------- capture

    @property
    def halted(self) -> bool:
        return self._halted

    @property
    def accepted_count(self) -> int:
        return sum(1 for r in self.records if r.accepted)

    @property
    def attempted_count(self) -> int:
        return len(self.records)

    def maybe_capture(
        self, result: TrackResult, frame: GrayFrame, state: DroneState, now_ms: float
    ) -> CaptureRecord | None:
        """Offer one tracked frame; returns the record written, if any.

        The schedule is anchored: capture times land on period multiples from
        the first offer, regardless of frame-rate jitter.
        """
        if self._finalized:
            raise CollectorError("session already finalized")
        if self._write_error is not None:
            err, self._write_error = self._write_error, None
            self._halted = True
            self._on_event("error", {"reason": f"capture storage failed: {err}"})
        if self._halted:
            return None
        if self._next_due_ms is None:
            self._next_due_ms = now_ms
        if now_ms < self._next_due_ms:
            return None

        if not result.valid:
            record = CaptureRecord(
                image_path=None,
                seq=result.seq,
                ts_ms=now_ms,
                bbox=None,
                psr=result.psr,
                drone_pose=(state.x, state.y, state.z, state.yaw),
                accepted=False,
            )
            self.records.append(record)
            self._advance_schedule(now_ms)
            self._on_event("capture_rejected", {"seq": result.seq, "psr": result.psr})
            if self.stop_on_loss:
                self._halted = True
                self._on_event("error", {"reason": "tracking lost; collection stopped"})
            return record

        if self._queue.full():
            # Do not advance the schedule: retry as soon as the writer drains.
            if not self._paused_reported:
                self._paused_reported = True
                self._on_event("error", {"reason": "capture writer backlogged; pausing"})
            return None
        self._paused_reported = False

        index = self.accepted_count
        rel_path = f"images/cap-{index:04d}.png"
        image = np.clip(frame.pixels * 255.0 + 0.5, 0, 255).astype(np.uint8)
        self._queue.put((self.session_dir / rel_path, image))
        self._frame_shape = image.shape

        box = result.bbox
        record = CaptureRecord(
            image_path=rel_path,
            seq=result.seq,
            ts_ms=now_ms,
            bbox=(box.x_min, box.y_min, box.x_max, box.y_max),
            psr=result.psr,
            drone_pose=(state.x, state.y, state.z, state.yaw),
            accepted=True,
        )
        self.records.append(record)
        self._advance_schedule(now_ms)
        self._on_event("capture", {"seq": result.seq, "index": index, "psr": result.psr})
        return record

    def _advance_schedule(self, now_ms: float) -> None:
        assert self._next_due_ms is not None
        self._next_due_ms += self.period_ms
        while self._next_due_ms <= now_ms:
            self._next_due_ms += self.period_ms

    def resume(self) -> None:
        """Clear a stop-on-loss or storage halt and keep collecting."""
        if self._finalized:
            raise CollectorError("session already finalized")
        self._halted = False

    # --------------------------------------------------------------- manifest

    def manifest_dict(self) -> dict:
        return {
            "format": MANIFEST_FORMAT,
            "session_id": self.session_id,
            "scene": self.scene_ref,
            "psr_threshold": self.psr_threshold,
            "period_ms": self.period_ms,
            "frame": (
                {"width": self._frame_shape[1], "height": self._frame_shape[0]}
                if self._frame_shape
                else None
            ),
            "counts": {"attempted": self.attempted_count, "accepted": self.accepted_count},
            "records": [r.to_json() for r in self.records],
        }

    def finalize(self) -> Path:
        """Flush pending writes, verify counts, and write the manifest."""
        if self._finalized:
            raise CollectorError("session already finalized")
        self._finalized = True
        self._queue.join()
        self._queue.put(None)
        self._writer.join(timeout=10.0)
        if self._write_error is not None:
            raise CollectorError(f"capture storage failed: {self._write_error}")

        manifest = self.manifest_dict()
        counted = sum(1 for r in manifest["records"] if r["accepted"])
        if counted != manifest["counts"]["accepted"]:  # pragma: no cover - internal
            raise CollectorError("manifest counts disagree with records")
        path = self.session_dir / MANIFEST_NAME
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def scan_manifest(manifest_path: str | Path) -> list[str]:
    """Consistency scan; returns problems found (empty list = clean).

    Checks: schema fields, count consistency, the confidence gate (no
    accepted record under threshold), image presence, and image geometry.
    """
    problems: list[str] = []
    path = Path(manifest_path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        return [f"unreadable manifest: {exc}"]

    if manifest.get("format") != MANIFEST_FORMAT:
        problems.append(f"unexpected format tag {manifest.get('format')!r}")
    records = manifest.get("records", [])
    counts = manifest.get("counts", {})
    accepted = [r for r in records if r.get("accepted")]
    if counts.get("attempted") != len(records):
        problems.append("attempted count does not match record list")
    if counts.get("accepted") != len(accepted):
        problems.append("accepted count does not match record list")

    threshold = manifest.get("psr_threshold")
    frame_spec = manifest.get("frame") or {}
    for i, record in enumerate(records):
        if record.get("accepted"):
            psr = record.get("psr")
            if psr is not None and threshold is not None and psr < threshold:
                problems.append(f"record {i} accepted below threshold ({psr} < {threshold})")
            image_rel = record.get("image")
            if not image_rel:
                problems.append(f"record {i} accepted without an image path")
                continue
            image_path = path.parent / image_rel
            if not image_path.exists():
                problems.append(f"record {i} image missing: {image_rel}")
                continue
            image = cv2.imread(str(image_path), cv2.IMREAD_GRAYSCALE)
            if image is None:
                problems.append(f"record {i} image unreadable: {image_rel}")
                continue
            if frame_spec and image.shape != (frame_spec.get("height"), frame_spec.get("width")):
                problems.append(
                    f"record {i} image is {image.shape[::-1]}, manifest says "
                    f"{(frame_spec.get('width'), frame_spec.get('height'))}"
                )
            bbox = record.get("bbox")
            if bbox and frame_spec:
                x0, y0, x1, y1 = bbox
                if not (0 <= x0 < x1 <= frame_spec["width"] and 0 <= y0 < y1 <= frame_spec["height"]):
                    problems.append(f"record {i} bbox {bbox} outside frame bounds")
        else:
            if record.get("image"):
                problems.append(f"record {i} rejected yet carries an image path")
    return problems
