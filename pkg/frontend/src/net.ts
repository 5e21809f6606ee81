/**
 * Gateway transport: one websocket, browser-style events, automatic
 * reconnect with capped exponential backoff.
 *
 * Opening a connection sends nothing — the gateway pushes a connect ack and
 * the latest telemetry on its own — so a page reload reconnects and resumes
 * the view without issuing a single command.
 */

import {
  encode,
  go,
  land,
  parseServerMessage,
  select,
  setMode,
  stop,
  stroke,
  takeoff,
  type Bbox,
  type CanvasId,
  type ClientMessage,
  type FlightMode,
  type ServerMessage,
  type Size,
  type StrokePoint,
} from "./protocol.js";
import type { ConnStatus } from "./state.js";

/** Close code the gateway sends for a bad shared token; never retried. */
export const CLOSE_UNAUTHORIZED = 4401;

const SOCKET_OPEN = 1;

export interface SocketLike {
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev: { code?: number; reason?: string }) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  readonly readyState: number;
  send(data: string): void;
  close(code?: number, reason?: string): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface GatewayClientOptions {
  /** Defaults to the browser WebSocket; tests inject ws or a fake. */
  socketFactory?: SocketFactory;
  onMessage?: (msg: ServerMessage) => void;
  onStatus?: (status: ConnStatus, detail?: string) => void;
  /** Malformed server payloads land here; the connection stays up. */
  onProtocolError?: (err: Error, raw: string) => void;
  /** Outgoing hook; throwing blocks the send. Conformance tests live here. */
  validateOutgoing?: (msg: ClientMessage) => void;
  reconnect?: boolean;
  reconnectBaseMs?: number;
  reconnectMaxMs?: number;
  /** Jitter source for backoff spacing; injectable for determinism. */
  random?: () => number;
}

export class GatewayClient {
  readonly url: string;

  private readonly factory: SocketFactory;
  private readonly opts: Required<
    Pick<GatewayClientOptions, "reconnect" | "reconnectBaseMs" | "reconnectMaxMs">
  > &
    GatewayClientOptions;
  private socket: SocketLike | null = null;
  private attempts = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private closedByUser = false;
  private status: ConnStatus = "closed";

  /** Count of messages actually written to the wire. */
  sentCount = 0;

  constructor(url: string, options: GatewayClientOptions = {}) {
    this.url = url;
    const globalSocket = (globalThis as { WebSocket?: unknown }).WebSocket;
    const factory =
      options.socketFactory ??
      (globalSocket !== undefined
        ? (u: string) => new (globalSocket as new (url: string) => SocketLike)(u)
        : null);
    if (factory === null) {
      throw new Error("no WebSocket available; pass socketFactory");
    }
    this.factory = factory;
    this.opts = {
      reconnect: true,
      reconnectBaseMs: 500,
      reconnectMaxMs: 8000,
      ...options,
    };
  }

  get connectionStatus(): ConnStatus {
    return this.status;
  }

  connect(): void {
    if (this.closedByUser) return;
    this.clearTimer();
    this.setStatus("connecting");
    let sock: SocketLike;
    try {
      sock = this.factory(this.url);
    } catch (err) {
      this.setStatus("closed", String(err));
      this.scheduleReconnect();
      return;
    }
    this.socket = sock;
    sock.onopen = () => {
      this.attempts = 0;
      this.setStatus("open");
      // Deliberately silent: resuming a session must not disturb the drone.
    };
    sock.onmessage = (ev) => {
      const raw = typeof ev.data === "string" ? ev.data : String(ev.data);
      let msg: ServerMessage;
      try {
        msg = parseServerMessage(raw);
      } catch (err) {
        this.opts.onProtocolError?.(err as Error, raw);
        return;
      }
      this.opts.onMessage?.(msg);
    };
    sock.onclose = (ev) => {
      this.socket = null;
      if (ev?.code === CLOSE_UNAUTHORIZED) {
        this.closedByUser = true; // a bad token will not fix itself
        this.setStatus("closed", "unauthorized");
        return;
      }
      this.setStatus("closed", ev?.reason || undefined);
      this.scheduleReconnect();
    };
    sock.onerror = () => {
      // The close event carries the actionable signal; nothing to do here.
    };
  }

  /** Intentional shutdown; disables reconnection. */
  close(): void {
    this.closedByUser = true;
    this.clearTimer();
    const sock = this.socket;
    this.socket = null;
    if (sock !== null) {
      sock.onclose = null;
      sock.close();
    }
    this.setStatus("closed");
  }

  /** True when the message was written to an open socket. */
  send(msg: ClientMessage): boolean {
    this.opts.validateOutgoing?.(msg);
    const sock = this.socket;
    if (sock === null || sock.readyState !== SOCKET_OPEN) {
      return false;
    }
    sock.send(encode(msg));
    this.sentCount += 1;
    return true;
  }

  takeoff(): boolean {
    return this.send(takeoff());
  }

  land(): boolean {
    return this.send(land());
  }

  stop(): boolean {
    return this.send(stop());
  }

  go(): boolean {
    return this.send(go());
  }

  setMode(value: FlightMode): boolean {
    return this.send(setMode(value));
  }

  select(bbox: Bbox): boolean {
    return this.send(select(bbox));
  }

  stroke(canvas: CanvasId, points: readonly StrokePoint[], canvasSize?: Size): boolean {
    return this.send(stroke(canvas, points, canvasSize));
  }

  private setStatus(status: ConnStatus, detail?: string): void {
    this.status = status;
    this.opts.onStatus?.(status, detail);
  }

  private scheduleReconnect(): void {
    if (!this.opts.reconnect || this.closedByUser || this.timer !== null) return;
    const base = this.opts.reconnectBaseMs * 2 ** this.attempts;
    const capped = Math.min(this.opts.reconnectMaxMs, base);
    const rng = this.opts.random ?? Math.random;
    const delay = capped * (0.9 + 0.2 * rng());
    this.attempts += 1;
    this.timer = setTimeout(() => {
      this.timer = null;
      this.connect();
    }, delay);
  }

  private clearTimer(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }
}
