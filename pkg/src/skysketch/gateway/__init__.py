"""Network gateway: wire protocol, broadcast hub, and the HTTP/WS service."""

from .app import apply_message, create_app, route_message
from .hub import BroadcastHub, ClientFeed
from .protocol import (
    MAX_MESSAGE_BYTES,
    PROTOCOL_VERSION,
    AckMessage,
    ClientMessage,
    EventMessage,
    FrameMessage,
    MessageTooLarge,
    SelectMessage,
    ServerMessage,
    StrokeMessage,
    TelemetryMessage,
    decode_frame_image,
    encode_frame_message,
    parse_client_message,
    protocol_schema,
)

__all__ = [
    "MAX_MESSAGE_BYTES",
    "PROTOCOL_VERSION",
    "AckMessage",
    "BroadcastHub",
    "ClientFeed",
    "ClientMessage",
    "EventMessage",
    "FrameMessage",
    "MessageTooLarge",
    "SelectMessage",
    "ServerMessage",
    "StrokeMessage",
    "TelemetryMessage",
    "apply_message",
    "create_app",
    "decode_frame_image",
    "encode_frame_message",
    "parse_client_message",
    "protocol_schema",
    "route_message",
]
