"""HTTP + websocket service around one control loop.

Endpoints:

* ``GET /healthz`` — liveness and connected-client count.
* ``GET /api/status`` — thread-safe control-loop snapshot.
* ``GET /api/protocol.schema.json`` — the shared wire-protocol schema.
* ``POST /api/command`` — one client wire message over HTTP; returns its ack.
  This is the thin-client surface the CLI uses.
* ``WS /ws`` — the live channel: client messages in, acks + frames +
  telemetry + events out.  Optional shared token via ``?token=``.
* static UI files mounted at ``/`` when a built frontend directory is given.

All flight-logic outcomes travel as events; an ack only confirms that a
message was schema-valid and enqueued.
"""

from __future__ import annotations

import asyncio
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, Request, Response, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import ValidationError

from ..control import ControlLoop
from ..frames import BoundingBox, FrameError
from ..sketch import SketchError, Stroke, stroke_to_command
from .hub import BroadcastHub, _finite
from .protocol import (
    MAX_MESSAGE_BYTES,
    AckMessage,
    ClientMessage,
    StrokeMessage,
    TelemetryMessage,
    parse_client_message,
    protocol_schema,
)

WS_TOKEN_REJECTED = 4401  # close code for a bad shared token
WS_MESSAGE_TOO_BIG = 1009


def _validation_reason(exc: ValidationError) -> str:
    first = exc.errors()[0]
    loc = ".".join(str(part) for part in first.get("loc", ()) if part != "__root__")
    msg = first.get("msg", "invalid message")
    return f"{loc}: {msg}" if loc else msg


def _stroke_canvas(msg: StrokeMessage) -> tuple[float, float]:
    if msg.canvas_size is not None:
        return msg.canvas_size
    # Default canvas mirrors the camera frame, grown to cover the points so
    # an omitted size never turns a well-formed trail into a bounds error.
    w = max(640.0, max(p[0] for p in msg.points))
    h = max(360.0, max(p[1] for p in msg.points))
    return w, h


def apply_message(loop: ControlLoop, msg: ClientMessage) -> AckMessage:
    """Route one validated client message into the control loop."""
    kind = msg.type
    if kind == "takeoff":
        loop.request_takeoff()
    elif kind == "land":
        loop.request_land()
    elif kind == "stop":
        loop.request_stop()
    elif kind == "go":
        loop.request_go()
    elif kind == "mode":
        loop.request_mode(msg.value)
    elif kind == "select":
        try:
            box = BoundingBox(*msg.bbox)
        except FrameError as exc:
            return AckMessage(ok=False, req=kind, id=msg.id, error=str(exc))
        loop.request_select(box)
    elif kind == "stroke":
        cw, ch = _stroke_canvas(msg)
        try:
            stroke = Stroke(
                canvas_id=msg.canvas,
                points=tuple((float(x), float(y), float(ts)) for x, y, ts in msg.points),
                canvas_w=cw,
                canvas_h=ch,
            )
            nav = stroke_to_command(stroke, speed_cap=loop.config.speed_cap)
        except SketchError as exc:
            return AckMessage(ok=False, req=kind, id=msg.id, error=str(exc))
        if nav is None:
            return AckMessage(
                ok=True, req=kind, id=msg.id, note="stroke within dead zone; ignored"
            )
        loop.request_stroke(nav)
    else:  # pragma: no cover - the union is closed; kept as a tripwire
        return AckMessage(ok=False, req=kind, id=msg.id, error=f"unhandled type {kind!r}")
    return AckMessage(ok=True, req=kind, id=msg.id)


def route_message(loop: ControlLoop, raw: str | bytes) -> AckMessage:
    """Parse and apply one inbound message; size limits are the caller's job."""
    try:
        msg = parse_client_message(raw)
    except ValidationError as exc:
        return AckMessage(ok=False, error=_validation_reason(exc))
    return apply_message(loop, msg)


def create_app(
    loop: ControlLoop,
    *,
    token: str | None = None,
    ui_dir: str | Path | None = None,
    hub: BroadcastHub | None = None,
) -> FastAPI:
    """Build the service around an existing (not yet started) control loop."""
    hub = hub or BroadcastHub()
    hub.attach(loop)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        hub.start()
        yield
        hub.close()
        loop.close()

    app = FastAPI(title="skysketch gateway", lifespan=lifespan)
    app.state.loop = loop
    app.state.hub = hub
    app.state.token = token

    @app.get("/healthz")
    def healthz() -> dict:
        return {"ok": True, "clients": hub.client_count}

    @app.get("/api/status")
    def status() -> JSONResponse:
        return JSONResponse(_finite(loop.snapshot()))

    @app.get("/api/protocol.schema.json")
    def schema() -> JSONResponse:
        return JSONResponse(protocol_schema())

    @app.post("/api/command")
    async def command(request: Request) -> Response:
        body = await request.body()
        if len(body) > MAX_MESSAGE_BYTES:
            return JSONResponse(
                AckMessage(
                    ok=False,
                    error=f"message exceeds the {MAX_MESSAGE_BYTES} byte limit",
                ).model_dump(),
                status_code=413,
            )
        ack = route_message(loop, body)
        return JSONResponse(ack.model_dump())

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket) -> None:
        await websocket.accept()
        if token is not None and websocket.query_params.get("token") != token:
            await websocket.close(code=WS_TOKEN_REJECTED)
            return
        feed = hub.register()
        feed.bind()
        feed.offer_out(AckMessage(ok=True, req="connect", id=feed.client_id))
        feed.offer_telemetry(TelemetryMessage.model_validate(_finite(loop.snapshot())))

        async def writer() -> None:
            while True:
                batch = await feed.drain()
                if not batch:  # feed closed: connection is going away
                    return
                for msg in batch:
                    await websocket.send_text(msg.model_dump_json())

        writer_task = asyncio.create_task(writer())
        try:
            while True:
                raw = await websocket.receive_text()
                if len(raw.encode("utf-8")) > MAX_MESSAGE_BYTES:
                    await websocket.close(code=WS_MESSAGE_TOO_BIG)
                    break
                feed.offer_out(route_message(loop, raw))
        except WebSocketDisconnect:
            pass
        finally:
            # Synchronous teardown only: the test transport cancels the app
            # task right after delivering the disconnect, so an await here
            # would be interrupted mid-flight.
            hub.unregister(feed)
            writer_task.cancel()

    if ui_dir is not None:
        path = Path(ui_dir)
        if path.is_dir():
            app.mount("/", StaticFiles(directory=path, html=True), name="ui")

    return app
