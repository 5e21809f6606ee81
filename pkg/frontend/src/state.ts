/**
 * Pure panel state: a reducer over server messages plus connection edges.
 *
 * The panel never owns flight state — everything shown is re-derived from
 * what the gateway pushes, so a reloaded tab rebuilds the same view from the
 * next few messages without touching the drone.
 */

import type {
  AckMessage,
  Bbox,
  EventMessage,
  FrameMessage,
  ServerMessage,
  TelemetryMessage,
} from "./protocol.js";

export type ConnStatus = "connecting" | "open" | "closed";

export interface OverlayInfo {
  readonly bbox: Bbox;
  readonly centroid: readonly [number, number] | null;
  readonly psr: number | null;
  readonly valid: boolean;
}

export interface UiState {
  readonly conn: ConnStatus;
  readonly connDetail: string | null;
  readonly clientId: string | null;
  readonly frame: FrameMessage | null;
  readonly frameAtMs: number | null;
  readonly stale: boolean;
  readonly overlay: OverlayInfo | null;
  readonly telemetry: TelemetryMessage | null;
  readonly alert: string | null;
  readonly captureCount: number;
  readonly captureSession: string | null;
  readonly events: readonly EventMessage[];
  readonly lastError: string | null;
}

export const STALE_AFTER_MS = 1500;
const EVENT_LOG_LIMIT = 50;

export function initialState(): UiState {
  return {
    conn: "connecting",
    connDetail: null,
    clientId: null,
    frame: null,
    frameAtMs: null,
    stale: false,
    overlay: null,
    telemetry: null,
    alert: null,
    captureCount: 0,
    captureSession: null,
    events: [],
    lastError: null,
  };
}

function applyFrame(s: UiState, msg: FrameMessage, nowMs: number): UiState {
  if (s.frame !== null && msg.seq <= s.frame.seq) {
    return s; // out-of-order leftovers must never roll the view back
  }
  const overlay: OverlayInfo | null = msg.bbox
    ? {
        bbox: msg.bbox,
        centroid: msg.centroid ?? null,
        psr: msg.psr ?? null,
        valid: msg.valid === true,
      }
    : null;
  return {
    ...s,
    frame: msg,
    frameAtMs: nowMs,
    stale: false,
    overlay,
    // A confidently tracked frame supersedes a stale "target lost" alert.
    alert: overlay?.valid ? null : s.alert,
  };
}

function applyTelemetry(s: UiState, msg: TelemetryMessage): UiState {
  return {
    ...s,
    telemetry: msg,
    captureCount: msg.captures?.accepted ?? s.captureCount,
    captureSession: msg.captures?.session_id ?? s.captureSession,
  };
}

function applyEvent(s: UiState, msg: EventMessage): UiState {
  const events =
    s.events.length >= EVENT_LOG_LIMIT
      ? [...s.events.slice(s.events.length - EVENT_LOG_LIMIT + 1), msg]
      : [...s.events, msg];
  switch (msg.kind) {
    case "track_lost":
      return { ...s, events, overlay: null, alert: "target lost" };
    case "error": {
      const detail = msg.data["message"];
      return {
        ...s,
        events,
        alert: typeof detail === "string" ? detail : "gateway error",
      };
    }
    default:
      return { ...s, events };
  }
}

function applyAck(s: UiState, msg: AckMessage): UiState {
  if (!msg.ok) {
    return { ...s, lastError: msg.error ?? "request rejected" };
  }
  if (msg.req === "connect") {
    return { ...s, clientId: msg.id ?? s.clientId, lastError: null };
  }
  return { ...s, lastError: null };
}

export function applyServer(s: UiState, msg: ServerMessage, nowMs: number): UiState {
  switch (msg.type) {
    case "frame":
      return applyFrame(s, msg, nowMs);
    case "telemetry":
      return applyTelemetry(s, msg);
    case "event":
      return applyEvent(s, msg);
    case "ack":
      return applyAck(s, msg);
  }
}

export function setConnection(
  s: UiState,
  status: ConnStatus,
  detail: string | null = null,
): UiState {
  return {
    ...s,
    conn: status,
    connDetail: detail,
    lastError: status === "open" ? null : s.lastError,
  };
}

/** Flag the view as frozen when no frame has arrived for STALE_AFTER_MS. */
export function checkStale(s: UiState, nowMs: number): UiState {
  if (s.frameAtMs === null || s.stale) return s;
  if (nowMs - s.frameAtMs > STALE_AFTER_MS) {
    return { ...s, stale: true };
  }
  return s;
}
