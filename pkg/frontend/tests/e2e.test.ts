/**
 * End-to-end panel tests against a live gateway process.
 *
 * One `skysketch serve` instance is driven through a full session the way a
 * person at the browser would drive it: take off, circle an object on the
 * video to select it, watch it stay tracked, drag on the yaw canvas, hit
 * stop, reload the tab.  Every message the panel emits passes through an
 * ajv validator compiled from the shared protocol schema; a single invalid
 * message fails the run.
 *
 * The simulator runs at 4x wall speed; all durations asserted below are
 * simulation-clock durations read from telemetry timestamps.
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import WebSocket from "ws";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { selectionFromStroke, type Point } from "../src/geometry.js";
import { GatewayClient } from "../src/net.js";
import type {
  ClientMessage,
  EventMessage,
  FrameMessage,
  ServerMessage,
  TelemetryMessage,
} from "../src/protocol.js";
import { clientValidator, formatErrors } from "./helpers.js";

const here = dirname(fileURLToPath(import.meta.url));
const repoRoot = join(here, "..", "..");
const scenarioPath = join(repoRoot, "scenarios", "converge.yaml");

const TICK_MS = 10; // control period in sim milliseconds
const LONG = { timeout: 120_000 };

// ---------------------------------------------------------------- plumbing

const validate = clientValidator();
const violations: string[] = [];

function validateOutgoing(msg: ClientMessage): void {
  if (!validate(msg)) {
    const detail = `${JSON.stringify(msg)} :: ${formatErrors(validate)}`;
    violations.push(detail);
    throw new Error(`non-conformant outgoing message: ${detail}`);
  }
}

class PanelClient {
  readonly client: GatewayClient;
  readonly frames: FrameMessage[] = [];
  readonly events: EventMessage[] = [];
  telemetry: TelemetryMessage | null = null;
  clientId: string | null = null;
  /** Adjacent received telemetry pairs spanning an unhalted->halted flip. */
  readonly haltedTransitions: { fromTs: number; toTs: number }[] = [];
  private prevTelemetry: TelemetryMessage | null = null;
  private waiters: {
    check: () => boolean;
    resolve: () => void;
  }[] = [];

  constructor(url: string) {
    this.client = new GatewayClient(url, {
      socketFactory: (u) => new WebSocket(u) as never,
      onMessage: (msg) => this.ingest(msg),
      validateOutgoing,
      reconnectBaseMs: 100,
    });
    this.client.connect();
  }

  private ingest(msg: ServerMessage): void {
    switch (msg.type) {
      case "frame":
        this.frames.push(msg);
        break;
      case "telemetry":
        if (this.prevTelemetry !== null && !this.prevTelemetry.halted && msg.halted) {
          this.haltedTransitions.push({
            fromTs: this.prevTelemetry.ts_ms,
            toTs: msg.ts_ms,
          });
        }
        this.prevTelemetry = msg;
        this.telemetry = msg;
        break;
      case "event":
        this.events.push(msg);
        break;
      case "ack":
        if (msg.ok && msg.req === "connect") this.clientId = msg.id;
        break;
    }
    this.waiters = this.waiters.filter((w) => {
      if (w.check()) {
        w.resolve();
        return false;
      }
      return true;
    });
  }

  /** Resolve once check() is true (it is retried on every message). */
  waitUntil(check: () => boolean, what: string, timeoutMs = 30_000): Promise<void> {
    if (check()) return Promise.resolve();
    return new Promise((resolve, reject) => {
      const timer = setTimeout(
        () => reject(new Error(`timed out waiting for ${what}`)),
        timeoutMs,
      );
      this.waiters.push({
        check,
        resolve: () => {
          clearTimeout(timer);
          resolve();
        },
      });
    });
  }

  waitTelemetry(
    pred: (t: TelemetryMessage) => boolean,
    what: string,
    timeoutMs = 30_000,
  ): Promise<void> {
    return this.waitUntil(() => this.telemetry !== null && pred(this.telemetry), what, timeoutMs);
  }

  get simMs(): number {
    return this.telemetry?.ts_ms ?? 0;
  }

  close(): void {
    this.client.close();
  }
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.once("error", reject);
    srv.listen(0, "127.0.0.1", () => {
      const addr = srv.address();
      if (addr === null || typeof addr === "string") {
        reject(new Error("no port"));
        return;
      }
      srv.close(() => resolve(addr.port));
    });
  });
}

async function waitHealthy(port: number, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastErr: unknown = null;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`http://127.0.0.1:${port}/healthz`);
      if (res.ok) return;
    } catch (err) {
      lastErr = err;
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error(`gateway never became healthy: ${String(lastErr)}`);
}

/** Ask the simulator where the object really is — the operator's eyes. */
function groundTruthBbox(
  pose: TelemetryMessage["pose"],
  objectId: string,
): [number, number, number, number] | null {
  const out = execFileSync(
    "python3",
    [join(here, "gt_bbox.py"), scenarioPath, JSON.stringify(pose), objectId],
    { encoding: "utf8" },
  );
  return JSON.parse(out) as [number, number, number, number] | null;
}

/** A human-ish circling gesture around a frame-space box, drawn on a canvas
 * 1.5x the frame size, then pushed through the real selection pipeline. */
function drawSelectionLoop(
  panel: PanelClient,
  frameBox: [number, number, number, number],
): boolean {
  const scale = 1.5;
  const canvas = { w: 640 * scale, h: 360 * scale };
  const frame = { w: 640, h: 360 };
  const margin = 8;
  const cx = ((frameBox[0] + frameBox[2]) / 2) * scale;
  const cy = ((frameBox[1] + frameBox[3]) / 2) * scale;
  const rx = ((frameBox[2] - frameBox[0]) / 2 + margin) * scale;
  const ry = ((frameBox[3] - frameBox[1]) / 2 + margin) * scale;
  const trail: Point[] = [];
  for (let i = 0; i <= 40; i++) {
    const a = (2 * Math.PI * i) / 40;
    trail.push({ x: cx + rx * Math.cos(a), y: cy + ry * Math.sin(a) });
  }
  const bbox = selectionFromStroke(trail, canvas, frame);
  if (bbox === null) return false;
  return panel.client.select(bbox);
}

/** Smallest signed angular difference a - b. */
function yawDelta(a: number, b: number): number {
  let d = a - b;
  while (d > Math.PI) d -= 2 * Math.PI;
  while (d < -Math.PI) d += 2 * Math.PI;
  return d;
}

// ------------------------------------------------------------------- suite

let server: ChildProcess;
let port: number;
let captureDir: string;
let panel: PanelClient;
const extraPanels: PanelClient[] = [];

function spawnGateway(onPort: number, simSpeed: number, captures: string): ChildProcess {
  const proc = spawn(
    "skysketch",
    [
      "serve",
      "--port",
      String(onPort),
      "--headless",
      "--scene",
      scenarioPath,
      "--telemetry-hz",
      "100",
      "--sim-speed",
      String(simSpeed),
      "--capture-dir",
      captures,
    ],
    { cwd: repoRoot, stdio: ["ignore", "pipe", "pipe"] },
  );
  let log = "";
  proc.stdout?.on("data", (d: Buffer) => (log += d.toString()));
  proc.stderr?.on("data", (d: Buffer) => (log += d.toString()));
  proc.on("exit", (code) => {
    if (code !== null && code !== 0) {
      console.error("gateway exited early:", code, log);
    }
  });
  return proc;
}

beforeAll(async () => {
  port = await freePort();
  captureDir = mkdtempSync(join(tmpdir(), "panel-e2e-"));
  server = spawnGateway(port, 4, join(captureDir, "captures"));
  await waitHealthy(port);
  panel = new PanelClient(`ws://127.0.0.1:${port}/ws`);
});

afterAll(async () => {
  panel?.close();
  for (const p of extraPanels) p.close();
  server?.kill("SIGTERM");
  await new Promise((r) => setTimeout(r, 300));
  server?.kill("SIGKILL");
  rmSync(captureDir, { recursive: true, force: true });
  expect(violations, `schema violations:\n${violations.join("\n")}`).toEqual([]);
});

describe("live gateway session", () => {
  it("connects silently and starts rendering state", LONG, async () => {
    await panel.waitUntil(() => panel.clientId !== null, "connect ack");
    await panel.waitTelemetry((t) => t.phase === "grounded", "initial telemetry");
    await panel.waitUntil(() => panel.frames.length >= 2, "video frames");
    expect(panel.client.sentCount).toBe(0); // nothing sent to just look
  });

  it("takeoff button lifts the drone to a hover", LONG, async () => {
    expect(panel.client.takeoff()).toBe(true);
    await panel.waitTelemetry(
      (t) => t.phase === "flying" && Math.abs(t.velocity.vz) < 0.05 && t.pose.z > 0.5,
      "hover after takeoff",
      60_000,
    );
    expect(panel.telemetry!.mode).toBe("manual");
  });

  it(
    "circle-selecting a rendered object engages tracking and the overlay follows it for 30 s without loss",
    LONG,
    async () => {
      const pose = panel.telemetry!.pose;
      const gt = groundTruthBbox(pose, "marker");
      expect(gt, "object must be on-frame at hover").not.toBeNull();

      const sent = drawSelectionLoop(panel, gt!);
      expect(sent).toBe(true);

      await panel.waitTelemetry((t) => t.mode === "tracking", "tracking engaged");
      const t0 = panel.simMs;
      const eventsBefore = panel.events.filter((e) => e.kind === "track_lost").length;
      const framesBefore = panel.frames.length;

      await panel.waitTelemetry(
        (t) => t.ts_ms >= t0 + 30_000,
        "30 simulated seconds of tracking",
        90_000,
      );

      const lost = panel.events.filter((e) => e.kind === "track_lost").length - eventsBefore;
      expect(lost, "track_lost during the 30 s window").toBe(0);
      expect(panel.telemetry!.mode).toBe("tracking");

      // The overlay followed: tracked frames kept arriving with a valid box.
      const tracked = panel.frames
        .slice(framesBefore)
        .filter((f) => f.bbox !== null && f.valid === true);
      expect(tracked.length).toBeGreaterThan(100);

      // And it followed the object: the servo centres it, so late-window
      // boxes sit near the frame centre while holding a sane size.
      const late = tracked[tracked.length - 1]!;
      const cx = (late.bbox![0] + late.bbox![2]) / 2;
      expect(Math.abs(cx - 320)).toBeLessThan(64);
    },
  );

  it("a second tab mirrors the identical broadcast frames", LONG, async () => {
    const second = new PanelClient(`ws://127.0.0.1:${port}/ws`);
    extraPanels.push(second);
    await second.waitUntil(() => second.frames.length >= 10, "second tab frames", 20_000);

    const mine = new Map(panel.frames.map((f) => [f.seq, f]));
    const common = second.frames.filter((f) => mine.has(f.seq));
    expect(common.length).toBeGreaterThanOrEqual(3);
    for (const theirs of common) {
      const ours = mine.get(theirs.seq)!;
      expect(theirs.image).toBe(ours.image);
      expect(theirs.bbox).toEqual(ours.bbox);
      expect(theirs.ts_ms).toBe(ours.ts_ms);
    }
    second.close();
  });

  it("an eastward yaw drag overrides tracking and spins the nose right", LONG, async () => {
    // Full-width rightward drag across the 200x140 yaw canvas.
    const points: [number, number, number][] = [];
    for (let i = 0; i <= 20; i++) points.push([i * 10, 70, i * 16]);
    expect(panel.client.stroke("yaw", points, [200, 140])).toBe(true);

    await panel.waitTelemetry((t) => t.mode === "manual", "stroke override to manual");
    await panel.waitTelemetry(
      (t) => t.velocity.yaw_rate > 0.5,
      "clockwise spin observable in telemetry",
    );
    // Direction check on the pose itself over a short, wrap-safe window.
    const y0 = panel.telemetry!.pose.yaw;
    const t0 = panel.simMs;
    await panel.waitTelemetry((t) => t.ts_ms >= t0 + 200, "a moment of spin");
    expect(yawDelta(panel.telemetry!.pose.yaw, y0)).toBeGreaterThan(0.05);
  });

  it("stop latches a hover that kills the spin, and go resumes", LONG, async () => {
    // The drone is still spinning from the yaw stroke — stop must latch it.
    expect(panel.client.stop()).toBe(true);
    await panel.waitTelemetry((t) => t.halted, "halted telemetry");

    // Hover means the latched commands are zero: the spin dies out.
    const t0 = panel.simMs;
    await panel.waitTelemetry(
      (t) => t.ts_ms >= t0 + 1_500 && Math.abs(t.velocity.yaw_rate) < 0.05,
      "spin decays to hover",
    );
    expect(panel.telemetry!.halted).toBe(true);
    expect(panel.client.go()).toBe(true);
    await panel.waitTelemetry((t) => !t.halted, "resumed");
  });

  it("stop produces a hover within two control ticks, observed in telemetry", LONG, async () => {
    // Tick-resolution observation needs every telemetry sample: the stream is
    // latest-wins, and at accelerated sim speeds the sample adjacent to the
    // halt flip can be overwritten before the socket writes it. A real-time
    // gateway (10 ms wall per tick) delivers adjacent pairs reliably.
    const rtPort = await freePort();
    const rtServer = spawnGateway(rtPort, 1, join(captureDir, "rt-captures"));
    const rt = new PanelClient(`ws://127.0.0.1:${rtPort}/ws`);
    try {
      await waitHealthy(rtPort);
      await rt.waitUntil(() => rt.clientId !== null, "rt connect ack");
      expect(rt.client.takeoff()).toBe(true);
      await rt.waitTelemetry(
        (t) => t.phase === "flying" && Math.abs(t.velocity.vz) < 0.05,
        "rt hover",
        60_000,
      );
      // Put the drone in motion so "hover within two ticks" is non-vacuous.
      const points: [number, number, number][] = [];
      for (let i = 0; i <= 20; i++) points.push([i * 10, 70, i * 16]);
      expect(rt.client.stroke("yaw", points, [200, 140])).toBe(true);
      await rt.waitTelemetry((t) => t.velocity.yaw_rate > 0.5, "rt spin", 30_000);

      let observedGapMs: number | null = null;
      for (let attempt = 0; attempt < 3 && observedGapMs === null; attempt++) {
        expect(rt.client.go()).toBe(true);
        await rt.waitTelemetry((t) => !t.halted, "unhalted before stop");
        rt.haltedTransitions.length = 0;
        expect(rt.client.stop()).toBe(true);
        await rt.waitTelemetry((t) => t.halted, "halted telemetry");
        const tr = rt.haltedTransitions[0];
        expect(tr, "transition must be visible in the telemetry stream").toBeDefined();
        const gapMs = tr!.toTs - tr!.fromTs;
        if (gapMs <= 2 * TICK_MS + 0.5) observedGapMs = gapMs;
      }
      expect(observedGapMs, "no stop transition observed within 2 ticks").not.toBeNull();
    } finally {
      rt.close();
      rtServer.kill("SIGTERM");
      await new Promise((r) => setTimeout(r, 200));
      rtServer.kill("SIGKILL");
    }
  });

  it("a reloaded tab resumes streaming without altering drone state", LONG, async () => {
    // Settle into a quiet manual hover so drone state is comparable.
    await panel.waitTelemetry(
      (t) =>
        t.mode === "manual" &&
        Math.abs(t.velocity.yaw_rate) < 0.02 &&
        Math.abs(t.velocity.vz) < 0.02,
      "quiet hover before reload",
      60_000,
    );
    const before = panel.telemetry!;

    // Reload: tear the tab down, bring a fresh one up.
    panel.close();
    await new Promise((r) => setTimeout(r, 500));
    const reloaded = new PanelClient(`ws://127.0.0.1:${port}/ws`);
    extraPanels.push(reloaded);

    await reloaded.waitUntil(() => reloaded.clientId !== null, "reconnect ack");
    await reloaded.waitUntil(() => reloaded.frames.length >= 3, "streaming resumed", 20_000);
    await reloaded.waitTelemetry((t) => t.ts_ms > before.ts_ms, "fresh telemetry");

    const after = reloaded.telemetry!;
    expect(reloaded.client.sentCount).toBe(0); // the reload itself sent nothing
    expect(after.phase).toBe(before.phase);
    expect(after.mode).toBe(before.mode);
    expect(after.halted).toBe(before.halted);
    // The loop applies one hover command per tick while airborne; a reload
    // must not add to that cadence or mint control events of its own.
    const dTicks = (after.ts_ms - before.ts_ms) / TICK_MS;
    const dCount = after.command_count - before.command_count;
    expect(Math.abs(dCount - dTicks)).toBeLessThanOrEqual(5);
    expect(
      reloaded.events.filter((e) => e.kind === "mode_change" || e.kind === "error"),
    ).toEqual([]);
    expect(Math.abs(after.pose.z - before.pose.z)).toBeLessThan(0.1);
    expect(Math.abs(yawDelta(after.pose.yaw, before.pose.yaw))).toBeLessThan(0.05);

    const seqs = reloaded.frames.map((f) => f.seq);
    for (let i = 1; i < seqs.length; i++) expect(seqs[i]!).toBeGreaterThan(seqs[i - 1]!);
  });
});
