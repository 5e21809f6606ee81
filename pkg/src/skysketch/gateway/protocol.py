"""Wire protocol: versioned, schema-validated JSON messages.

Every message carries ``"v": 1``.  Client→server messages are a closed set
discriminated on ``type`` — unknown types and unknown fields are rejected,
never ignored.  Server→client messages are frames (compressed image payloads
with overlay metadata), telemetry snapshots, events, and per-message acks.
The full JSON Schema for both directions is exported by
:func:`protocol_schema` so other clients (the browser UI, tests) can validate
against the identical contract.
"""

from __future__ import annotations

import base64
import math
from typing import Annotated, Any, Literal, Union

import cv2
import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    TypeAdapter,
    field_validator,
)

from ..frames import GrayFrame
from ..tracker import TrackResult

PROTOCOL_VERSION = 1
MAX_MESSAGE_BYTES = 64 * 1024  # inbound limit; larger closes the connection
FRAME_IMAGE_FORMAT = "jpeg"


class MessageTooLarge(ValueError):
    """Inbound message exceeded MAX_MESSAGE_BYTES; reject at connection level."""


# --------------------------------------------------------------- client side


class _ClientBase(BaseModel):
    model_config = ConfigDict(extra="forbid")

    v: Literal[1] = PROTOCOL_VERSION
    id: str | None = Field(
        default=None, max_length=64, description="Optional client tag echoed in the ack."
    )


class TakeoffMessage(_ClientBase):
    type: Literal["takeoff"]


class LandMessage(_ClientBase):
    type: Literal["land"]


class StopMessage(_ClientBase):
    type: Literal["stop"]


class GoMessage(_ClientBase):
    type: Literal["go"]


class StrokeMessage(_ClientBase):
    type: Literal["stroke"]
    canvas: Literal["translate", "yaw", "altitude"]
    points: list[tuple[float, float, float]] = Field(
        min_length=2, description="Pointer trail as [x, y, ts_ms] triples."
    )
    canvas_size: tuple[float, float] | None = Field(
        default=None,
        description=(
            "Canvas extent [w, h] the points were drawn on; defaults to 640x360 "
            "(grown to cover the points) when the client omits it."
        ),
    )

    @field_validator("points")
    @classmethod
    def _points_finite(cls, pts: list[tuple[float, float, float]]):
        for p in pts:
            if not all(math.isfinite(v) for v in p):
                raise ValueError("stroke points must be finite numbers")
        return pts

    @field_validator("canvas_size")
    @classmethod
    def _canvas_positive(cls, size: tuple[float, float] | None):
        if size is not None and (size[0] <= 0 or size[1] <= 0):
            raise ValueError("canvas_size must be positive")
        return size


class SelectMessage(_ClientBase):
    type: Literal["select"]
    bbox: tuple[float, float, float, float] = Field(
        description="Target box [x_min, y_min, x_max, y_max] in frame pixels."
    )

    @field_validator("bbox")
    @classmethod
    def _bbox_ordered(cls, box: tuple[float, float, float, float]):
        if not all(math.isfinite(v) for v in box):
            raise ValueError("bbox coordinates must be finite")
        if not (box[0] < box[2] and box[1] < box[3]):
            raise ValueError("bbox must satisfy x_min < x_max and y_min < y_max")
        return box


class ModeMessage(_ClientBase):
    type: Literal["mode"]
    value: Literal["manual", "tracking", "collecting"]


ClientMessage = Annotated[
    Union[
        TakeoffMessage,
        LandMessage,
        StopMessage,
        GoMessage,
        StrokeMessage,
        SelectMessage,
        ModeMessage,
    ],
    Field(discriminator="type"),
]

CLIENT_ADAPTER: TypeAdapter = TypeAdapter(ClientMessage)


def parse_client_message(raw: str | bytes) -> ClientMessage:
    """Validate one inbound JSON message; raises on any contract violation."""
    data = raw.encode("utf-8") if isinstance(raw, str) else raw
    if len(data) > MAX_MESSAGE_BYTES:
        raise MessageTooLarge(
            f"message of {len(data)} bytes exceeds the {MAX_MESSAGE_BYTES} byte limit"
        )
    return CLIENT_ADAPTER.validate_json(data)


# --------------------------------------------------------------- server side


class _ServerBase(BaseModel):
    model_config = ConfigDict(extra="forbid")

    v: Literal[1] = PROTOCOL_VERSION


class FrameMessage(_ServerBase):
    type: Literal["frame"] = "frame"
    seq: int
    ts_ms: float
    width: int
    height: int
    format: Literal["jpeg"] = FRAME_IMAGE_FORMAT
    image: str = Field(description="Base64-encoded compressed image payload.")
    bbox: tuple[float, float, float, float] | None = None
    centroid: tuple[float, float] | None = None
    psr: float | None = None
    valid: bool | None = None


class Pose(BaseModel):
    model_config = ConfigDict(extra="forbid")

    x: float
    y: float
    z: float
    roll: float
    pitch: float
    yaw: float


class Velocity(BaseModel):
    model_config = ConfigDict(extra="forbid")

    vx: float
    vy: float
    vz: float
    yaw_rate: float


class TrackingInfo(BaseModel):
    model_config = ConfigDict(extra="forbid")

    psr: float | None = None  # null when the score is the fresh-selection sentinel
    valid: bool
    bbox: tuple[float, float, float, float]
    centroid: tuple[float, float]


class CaptureInfo(BaseModel):
    model_config = ConfigDict(extra="forbid")

    attempted: int
    accepted: int
    session_id: str


class TelemetryMessage(_ServerBase):
    type: Literal["telemetry"] = "telemetry"
    ts_ms: float
    pose: Pose
    velocity: Velocity
    phase: Literal["grounded", "takeoff", "flying", "landing"]
    mode: Literal["manual", "tracking", "collecting"]
    halted: bool
    tracking: TrackingInfo | None = None
    captures: CaptureInfo | None = None
    frame_seq: int
    command_count: int
    speed_cap: float


class EventMessage(_ServerBase):
    type: Literal["event"] = "event"
    kind: Literal["track_lost", "capture", "mode_change", "error"]
    data: dict[str, Any] = Field(default_factory=dict)


class AckMessage(_ServerBase):
    type: Literal["ack"] = "ack"
    ok: bool
    req: str | None = None
    id: str | None = None
    error: str | None = None
    note: str | None = None  # advisory detail for accepted-but-inert messages


ServerMessage = Annotated[
    Union[FrameMessage, TelemetryMessage, EventMessage, AckMessage],
    Field(discriminator="type"),
]

SERVER_ADAPTER: TypeAdapter = TypeAdapter(ServerMessage)


# ------------------------------------------------------------ frame encoding


def encode_frame_message(
    frame: GrayFrame, result: TrackResult | None = None, *, quality: int = 85
) -> FrameMessage:
    """Serialize a camera frame (plus overlay metadata) for broadcast."""
    img = np.clip(frame.pixels * 255.0, 0.0, 255.0).round().astype(np.uint8)
    ok, buf = cv2.imencode(".jpg", img, [int(cv2.IMWRITE_JPEG_QUALITY), int(quality)])
    if not ok:  # pragma: no cover - imencode only fails on unsupported shapes
        raise ValueError("frame image encoding failed")
    payload = base64.b64encode(buf.tobytes()).decode("ascii")
    kwargs: dict[str, Any] = {}
    if result is not None:
        box = result.bbox
        kwargs = {
            "bbox": (box.x_min, box.y_min, box.x_max, box.y_max),
            "centroid": result.centroid,
            "psr": None if math.isinf(result.psr) else result.psr,
            "valid": result.valid,
        }
    return FrameMessage(
        seq=frame.seq,
        ts_ms=frame.ts_ms,
        width=frame.width,
        height=frame.height,
        image=payload,
        **kwargs,
    )


def decode_frame_image(message: FrameMessage) -> np.ndarray:
    """Recover the grayscale image array from a frame message (for tests/tools)."""
    raw = base64.b64decode(message.image.encode("ascii"))
    img = cv2.imdecode(np.frombuffer(raw, dtype=np.uint8), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise ValueError("frame payload is not a decodable image")
    return img.astype(np.float32) / 255.0


# ------------------------------------------------------------- schema export


def protocol_schema() -> dict:
    """The complete two-direction JSON Schema shared with external clients."""
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "skysketch wire protocol",
        "version": PROTOCOL_VERSION,
        "max_message_bytes": MAX_MESSAGE_BYTES,
        "client": CLIENT_ADAPTER.json_schema(
            ref_template="#/client/$defs/{model}", mode="validation"
        ),
        "server": SERVER_ADAPTER.json_schema(
            ref_template="#/server/$defs/{model}", mode="serialization"
        ),
    }
