/**
 * Wire protocol v1 spoken with the gateway.
 *
 * Mirrors protocol.schema.json at the repository root: every message this
 * module builds must validate against the `client` half of that document,
 * and every message it parses is expected to satisfy the `server` half.
 * Builders throw ProtocolError rather than produce an invalid message.
 */

export const PROTOCOL_VERSION = 1 as const;

/** Inbound limit enforced by the gateway; larger messages close the socket. */
export const MAX_MESSAGE_BYTES = 64 * 1024;

export type CanvasId = "translate" | "yaw" | "altitude";
export type FlightMode = "manual" | "tracking" | "collecting";
export type FlightPhase = "grounded" | "takeoff" | "flying" | "landing";

/** [x, y, ts_ms] pointer sample in canvas pixels. */
export type StrokePoint = readonly [number, number, number];
/** [x_min, y_min, x_max, y_max] in frame pixels. */
export type Bbox = readonly [number, number, number, number];
export type Size = readonly [number, number];

export class ProtocolError extends Error {
  override name = "ProtocolError";
}

// ---------------------------------------------------------------- client side

interface ClientBase {
  readonly v: typeof PROTOCOL_VERSION;
  readonly id?: string;
}

export interface TakeoffMessage extends ClientBase {
  readonly type: "takeoff";
}
export interface LandMessage extends ClientBase {
  readonly type: "land";
}
export interface StopMessage extends ClientBase {
  readonly type: "stop";
}
export interface GoMessage extends ClientBase {
  readonly type: "go";
}
export interface StrokeMessage extends ClientBase {
  readonly type: "stroke";
  readonly canvas: CanvasId;
  readonly points: readonly StrokePoint[];
  readonly canvas_size?: Size;
}
export interface SelectMessage extends ClientBase {
  readonly type: "select";
  readonly bbox: Bbox;
}
export interface ModeMessage extends ClientBase {
  readonly type: "mode";
  readonly value: FlightMode;
}

export type ClientMessage =
  | TakeoffMessage
  | LandMessage
  | StopMessage
  | GoMessage
  | StrokeMessage
  | SelectMessage
  | ModeMessage;

function finite(values: readonly number[]): boolean {
  return values.every((v) => Number.isFinite(v));
}

export function takeoff(): TakeoffMessage {
  return { v: PROTOCOL_VERSION, type: "takeoff" };
}

export function land(): LandMessage {
  return { v: PROTOCOL_VERSION, type: "land" };
}

export function stop(): StopMessage {
  return { v: PROTOCOL_VERSION, type: "stop" };
}

export function go(): GoMessage {
  return { v: PROTOCOL_VERSION, type: "go" };
}

export function setMode(value: FlightMode): ModeMessage {
  if (value !== "manual" && value !== "tracking" && value !== "collecting") {
    throw new ProtocolError(`unknown mode ${String(value)}`);
  }
  return { v: PROTOCOL_VERSION, type: "mode", value };
}

export function select(bbox: Bbox): SelectMessage {
  if (bbox.length !== 4 || !finite(bbox)) {
    throw new ProtocolError("bbox must be four finite numbers");
  }
  const [x0, y0, x1, y1] = bbox;
  if (!(x0 < x1 && y0 < y1)) {
    throw new ProtocolError("bbox must satisfy x_min < x_max and y_min < y_max");
  }
  return { v: PROTOCOL_VERSION, type: "select", bbox: [x0, y0, x1, y1] };
}

export function stroke(
  canvas: CanvasId,
  points: readonly StrokePoint[],
  canvasSize?: Size,
): StrokeMessage {
  if (canvas !== "translate" && canvas !== "yaw" && canvas !== "altitude") {
    throw new ProtocolError(`unknown canvas ${String(canvas)}`);
  }
  if (points.length < 2) {
    throw new ProtocolError("a stroke needs at least two points");
  }
  for (const p of points) {
    if (p.length !== 3 || !finite(p)) {
      throw new ProtocolError("stroke points must be finite [x, y, ts_ms] triples");
    }
  }
  if (canvasSize !== undefined) {
    if (canvasSize.length !== 2 || !finite(canvasSize) || canvasSize[0] <= 0 || canvasSize[1] <= 0) {
      throw new ProtocolError("canvas_size must be two positive numbers");
    }
    return {
      v: PROTOCOL_VERSION,
      type: "stroke",
      canvas,
      points: points.map((p): StrokePoint => [p[0], p[1], p[2]]),
      canvas_size: [canvasSize[0], canvasSize[1]],
    };
  }
  return {
    v: PROTOCOL_VERSION,
    type: "stroke",
    canvas,
    points: points.map((p): StrokePoint => [p[0], p[1], p[2]]),
  };
}

/** Serialize for the wire; refuses messages the gateway would drop for size. */
export function encode(msg: ClientMessage): string {
  const text = JSON.stringify(msg);
  if (new TextEncoder().encode(text).length > MAX_MESSAGE_BYTES) {
    throw new ProtocolError(
      `message exceeds the ${MAX_MESSAGE_BYTES}-byte wire limit`,
    );
  }
  return text;
}

// ---------------------------------------------------------------- server side

export interface Pose {
  readonly x: number;
  readonly y: number;
  readonly z: number;
  readonly roll: number;
  readonly pitch: number;
  readonly yaw: number;
}

export interface Velocity {
  readonly vx: number;
  readonly vy: number;
  readonly vz: number;
  readonly yaw_rate: number;
}

export interface TrackingInfo {
  readonly psr: number | null;
  readonly valid: boolean;
  readonly bbox: Bbox;
  readonly centroid: readonly [number, number];
}

export interface CaptureInfo {
  readonly attempted: number;
  readonly accepted: number;
  readonly session_id: string;
}

export interface FrameMessage {
  readonly v: typeof PROTOCOL_VERSION;
  readonly type: "frame";
  readonly seq: number;
  readonly ts_ms: number;
  readonly width: number;
  readonly height: number;
  readonly format: "jpeg";
  readonly image: string;
  readonly bbox: Bbox | null;
  readonly centroid: readonly [number, number] | null;
  readonly psr: number | null;
  readonly valid: boolean | null;
}

export interface TelemetryMessage {
  readonly v: typeof PROTOCOL_VERSION;
  readonly type: "telemetry";
  readonly ts_ms: number;
  readonly pose: Pose;
  readonly velocity: Velocity;
  readonly phase: FlightPhase;
  readonly mode: FlightMode;
  readonly halted: boolean;
  readonly tracking: TrackingInfo | null;
  readonly captures: CaptureInfo | null;
  readonly frame_seq: number;
  readonly command_count: number;
  readonly speed_cap: number;
}

export type EventKind = "track_lost" | "capture" | "mode_change" | "error";

export interface EventMessage {
  readonly v: typeof PROTOCOL_VERSION;
  readonly type: "event";
  readonly kind: EventKind;
  readonly data: Readonly<Record<string, unknown>>;
}

export interface AckMessage {
  readonly v: typeof PROTOCOL_VERSION;
  readonly type: "ack";
  readonly ok: boolean;
  readonly req: string | null;
  readonly id: string | null;
  readonly error: string | null;
  readonly note: string | null;
}

export type ServerMessage = FrameMessage | TelemetryMessage | EventMessage | AckMessage;

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function requireNumber(obj: Record<string, unknown>, field: string): number {
  const v = obj[field];
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new ProtocolError(`field ${field} must be a finite number`);
  }
  return v;
}

function requireString(obj: Record<string, unknown>, field: string): string {
  const v = obj[field];
  if (typeof v !== "string") {
    throw new ProtocolError(`field ${field} must be a string`);
  }
  return v;
}

/**
 * Parse one server frame/telemetry/event/ack message.
 *
 * Checks the envelope (version, known type) and the fields the panel relies
 * on; full structural validation lives in the schema-conformance tests.
 */
export function parseServerMessage(raw: string): ServerMessage {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    throw new ProtocolError("server message is not valid JSON");
  }
  if (!isRecord(data)) {
    throw new ProtocolError("server message must be a JSON object");
  }
  if (data["v"] !== PROTOCOL_VERSION) {
    throw new ProtocolError(`unsupported protocol version ${String(data["v"])}`);
  }
  const type = data["type"];
  switch (type) {
    case "frame": {
      requireNumber(data, "seq");
      requireNumber(data, "ts_ms");
      requireNumber(data, "width");
      requireNumber(data, "height");
      requireString(data, "image");
      return data as unknown as FrameMessage;
    }
    case "telemetry": {
      requireNumber(data, "ts_ms");
      if (!isRecord(data["pose"]) || !isRecord(data["velocity"])) {
        throw new ProtocolError("telemetry needs pose and velocity objects");
      }
      requireString(data, "phase");
      requireString(data, "mode");
      if (typeof data["halted"] !== "boolean") {
        throw new ProtocolError("field halted must be a boolean");
      }
      return data as unknown as TelemetryMessage;
    }
    case "event": {
      requireString(data, "kind");
      if (!isRecord(data["data"])) {
        throw new ProtocolError("event data must be an object");
      }
      return data as unknown as EventMessage;
    }
    case "ack": {
      if (typeof data["ok"] !== "boolean") {
        throw new ProtocolError("field ok must be a boolean");
      }
      return data as unknown as AckMessage;
    }
    default:
      throw new ProtocolError(`unknown server message type ${String(type)}`);
  }
}
