"""Fan-out hub between the control loop and any number of network clients.

The control loop publishes from its own thread and must never block on a
slow client.  Three delivery disciplines keep that true:

* frames: a single latest-wins slot feeds one encoder thread, which JPEG-
  encodes each frame once and offers it to every client feed; each feed is
  itself a latest-wins slot with a per-client rate cap, so a stalled reader
  only ever misses stale frames.
* telemetry: latest-wins per client, fanned out inline (tiny payloads).
* events and acks: per-client FIFO — these are the messages that must not be
  silently dropped; a pathological backlog drops the oldest and says so.

A feed drains into an asyncio consumer (the websocket writer) through a
``call_soon_threadsafe`` wake-up, so the threaded producer side and the
async transport side never share an event loop.
"""

from __future__ import annotations

import asyncio
import math
import threading
import uuid
from collections import deque
from typing import TYPE_CHECKING, Any

from ..frames import GrayFrame
from ..tracker import TrackResult
from .protocol import (
    AckMessage,
    EventMessage,
    FrameMessage,
    TelemetryMessage,
    encode_frame_message,
)

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, typing only
    from ..control import ControlLoop

FRAME_CAP_FPS = 15.0     # per-client broadcast ceiling, independent of render rate
FIFO_LIMIT = 1024        # events + acks queued per client before oldest-drop

ServerMsg = FrameMessage | TelemetryMessage | EventMessage | AckMessage


def _finite(value: Any) -> Any:
    """Replace non-finite floats with None so every payload is strict JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    return value


class ClientFeed:
    """One connected client's outbound mailbox; see module docstring."""

    def __init__(self, client_id: str | None = None, frame_cap_fps: float = FRAME_CAP_FPS):
        self.client_id = client_id or uuid.uuid4().hex[:12]
        self._interval_ms = 1000.0 / frame_cap_fps
        self._lock = threading.Lock()
        self._frame: FrameMessage | None = None
        self._telemetry: TelemetryMessage | None = None
        self._fifo: deque[ServerMsg] = deque()
        self._dropped = 0
        self._last_frame_ts = -math.inf
        self._frames_delivered = 0
        self._closed = False
        self._aio_loop: asyncio.AbstractEventLoop | None = None
        self._wake: asyncio.Event | None = None

    # -- producer side (any thread) ------------------------------------

    def offer_frame(self, message: FrameMessage) -> None:
        with self._lock:
            self._frame = message
        self._notify()

    def offer_telemetry(self, message: TelemetryMessage) -> None:
        with self._lock:
            self._telemetry = message
        self._notify()

    def offer_out(self, message: ServerMsg) -> None:
        """FIFO lane for events and acks (never silently dropped)."""
        with self._lock:
            if len(self._fifo) >= FIFO_LIMIT:
                self._fifo.popleft()
                self._dropped += 1
            self._fifo.append(message)
        self._notify()

    def close(self) -> None:
        self._closed = True
        self._notify()

    @property
    def closed(self) -> bool:
        return self._closed

    @property
    def frames_delivered(self) -> int:
        return self._frames_delivered

    def _notify(self) -> None:
        loop, wake = self._aio_loop, self._wake
        if loop is not None and wake is not None and not loop.is_closed():
            try:
                loop.call_soon_threadsafe(wake.set)
            except RuntimeError:  # loop shut down between the check and the call
                pass

    # -- consumer side ---------------------------------------------------

    def bind(self) -> None:
        """Attach the feed to the calling asyncio loop (websocket handler)."""
        self._aio_loop = asyncio.get_running_loop()
        self._wake = asyncio.Event()
        self._wake.set()  # drain anything that arrived before binding

    def poll(self) -> list[ServerMsg]:
        """Collect everything currently deliverable (thread-safe, non-blocking)."""
        out: list[ServerMsg] = []
        with self._lock:
            if self._dropped:
                out.append(
                    EventMessage(
                        kind="error",
                        data={"reason": f"client backlog: {self._dropped} messages dropped"},
                    )
                )
                self._dropped = 0
            while self._fifo:
                out.append(self._fifo.popleft())
            if self._telemetry is not None:
                out.append(self._telemetry)
                self._telemetry = None
            frame = self._frame
            if frame is not None and (
                frame.ts_ms - self._last_frame_ts >= self._interval_ms - 1e-6
            ):
                out.append(frame)
                self._last_frame_ts = frame.ts_ms
                self._frames_delivered += 1
                self._frame = None
        return out

    async def drain(self) -> list[ServerMsg]:
        """Wait for deliverable messages; empty list only when closing."""
        if self._wake is None:
            raise RuntimeError("feed.bind() must be called from the consumer loop first")
        while True:
            await self._wake.wait()
            self._wake.clear()
            batch = self.poll()
            if batch or self._closed:
                return batch


class BroadcastHub:
    """Publishes loop output to every registered :class:`ClientFeed`."""

    def __init__(self, frame_cap_fps: float = FRAME_CAP_FPS, jpeg_quality: int = 85):
        self.frame_cap_fps = frame_cap_fps
        self.jpeg_quality = jpeg_quality
        self._feeds: dict[str, ClientFeed] = {}
        self._feeds_lock = threading.Lock()
        self._cond = threading.Condition()
        self._pending: tuple[GrayFrame, TrackResult | None] | None = None
        self._running = False
        self._encoder: threading.Thread | None = None
        self.frames_published = 0

    # -- lifecycle -------------------------------------------------------

    def start(self) -> None:
        if self._encoder is not None:
            return
        self._running = True
        self._encoder = threading.Thread(
            target=self._encode_loop, name="frame-encoder", daemon=True
        )
        self._encoder.start()

    def close(self) -> None:
        self._running = False
        with self._cond:
            self._cond.notify_all()
        if self._encoder is not None:
            self._encoder.join(timeout=5.0)
            self._encoder = None
        with self._feeds_lock:
            feeds = list(self._feeds.values())
            self._feeds.clear()
        for feed in feeds:
            feed.close()

    def attach(self, loop: "ControlLoop") -> None:
        """Wire the control loop's outbound taps into this hub."""
        loop.on_frame = self.publish_frame
        loop.on_telemetry = self.publish_telemetry
        loop.on_event = self.publish_event
        self.start()

    # -- client registry ---------------------------------------------------

    def register(self, client_id: str | None = None) -> ClientFeed:
        feed = ClientFeed(client_id, frame_cap_fps=self.frame_cap_fps)
        with self._feeds_lock:
            self._feeds[feed.client_id] = feed
        return feed

    def unregister(self, feed: ClientFeed) -> None:
        with self._feeds_lock:
            self._feeds.pop(feed.client_id, None)
        feed.close()

    @property
    def client_count(self) -> int:
        with self._feeds_lock:
            return len(self._feeds)

    def _snapshot_feeds(self) -> list[ClientFeed]:
        with self._feeds_lock:
            return list(self._feeds.values())

    # -- publishing (control-loop thread; must never block) ----------------

    def publish_frame(self, frame: GrayFrame, result: TrackResult | None) -> None:
        with self._cond:
            self._pending = (frame, result)
            self._cond.notify()

    def publish_telemetry(self, payload: dict) -> None:
        message = TelemetryMessage.model_validate(_finite(payload))
        for feed in self._snapshot_feeds():
            feed.offer_telemetry(message)

    def publish_event(self, kind: str, payload: dict) -> None:
        message = EventMessage(kind=kind, data=_finite(payload))
        for feed in self._snapshot_feeds():
            feed.offer_out(message)

    # -- encoder thread -----------------------------------------------------

    def _encode_loop(self) -> None:
        while True:
            with self._cond:
                while self._pending is None and self._running:
                    self._cond.wait(timeout=0.5)
                if not self._running:
                    return
                frame, result = self._pending  # type: ignore[misc]
                self._pending = None
            feeds = self._snapshot_feeds()
            if not feeds:
                continue  # zero clients: skip the encode entirely
            message = encode_frame_message(frame, result, quality=self.jpeg_quality)
            self.frames_published += 1
            for feed in feeds:
                feed.offer_frame(message)
