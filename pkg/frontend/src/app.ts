/**
 * Panel wiring: DOM in, wire protocol out.
 *
 * All flight logic lives on the other side of the websocket; this file only
 * routes pointer trails and button presses into protocol messages and paints
 * whatever the gateway pushes back.  Rendering runs on its own animation
 * frame loop, decoupled from input handlers.
 */

import { decimateStroke, scaleStroke, selectionFromStroke, type Point } from "./geometry.js";
import { GatewayClient } from "./net.js";
import type { CanvasId, FlightMode, StrokePoint } from "./protocol.js";
import {
  applyServer,
  checkStale,
  initialState,
  setConnection,
  type UiState,
} from "./state.js";

function must<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el as T;
}

function canvasContext(canvas: HTMLCanvasElement): CanvasRenderingContext2D {
  const ctx = canvas.getContext("2d");
  if (ctx === null) throw new Error("2d canvas context unavailable");
  return ctx;
}

/** Pointer position in a canvas's logical pixel space. */
function logicalPoint(canvas: HTMLCanvasElement, ev: PointerEvent): Point {
  const rect = canvas.getBoundingClientRect();
  return {
    x: ((ev.clientX - rect.left) / rect.width) * canvas.width,
    y: ((ev.clientY - rect.top) / rect.height) * canvas.height,
  };
}

interface TrailCapture {
  points: Point[];
  stamps: number[];
  active: boolean;
}

function captureTrails(
  canvas: HTMLCanvasElement,
  onDone: (trail: TrailCapture) => void,
  onProgress?: (trail: TrailCapture) => void,
): void {
  const trail: TrailCapture = { points: [], stamps: [], active: false };
  canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    trail.points = [logicalPoint(canvas, ev)];
    trail.stamps = [performance.now()];
    trail.active = true;
    onProgress?.(trail);
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (!trail.active) return;
    trail.points.push(logicalPoint(canvas, ev));
    trail.stamps.push(performance.now());
    onProgress?.(trail);
  });
  const finish = (ev: PointerEvent) => {
    if (!trail.active) return;
    trail.active = false;
    canvas.releasePointerCapture(ev.pointerId);
    onDone(trail);
  };
  canvas.addEventListener("pointerup", finish);
  canvas.addEventListener("pointercancel", finish);
}

function trailToStrokePoints(trail: TrailCapture): StrokePoint[] {
  return trail.points.map((p, i): StrokePoint => [p.x, p.y, trail.stamps[i] ?? 0]);
}

export function startPanel(): void {
  const video = must<HTMLCanvasElement>("video");
  const overlay = must<HTMLCanvasElement>("overlay");
  const navCanvases: Record<CanvasId, HTMLCanvasElement> = {
    translate: must<HTMLCanvasElement>("nav-translate"),
    yaw: must<HTMLCanvasElement>("nav-yaw"),
    altitude: must<HTMLCanvasElement>("nav-altitude"),
  };
  const conn = must<HTMLSpanElement>("conn");
  const banner = must<HTMLDivElement>("banner");
  const frozen = must<HTMLSpanElement>("frozen");
  const modeBadge = must<HTMLSpanElement>("mode");
  const phaseBadge = must<HTMLSpanElement>("phase");
  const captureBadge = must<HTMLSpanElement>("captures");
  const psrBadge = must<HTMLSpanElement>("psr");
  const alertLine = must<HTMLDivElement>("alert");
  const eventLog = must<HTMLUListElement>("events");
  const gainSlider = must<HTMLInputElement>("speed-gain");
  const gainLabel = must<HTMLSpanElement>("speed-gain-value");
  const capLabel = must<HTMLSpanElement>("speed-cap");

  let state: UiState = initialState();
  let dirty = true;
  const markDirty = () => {
    dirty = true;
  };

  let frameImage: HTMLImageElement | null = null;
  let frameImageSeq = -1;

  const wsProto = location.protocol === "https:" ? "wss" : "ws";
  const token = new URLSearchParams(location.search).get("token");
  const wsUrl = `${wsProto}://${location.host}/ws${token ? `?token=${encodeURIComponent(token)}` : ""}`;

  const client = new GatewayClient(wsUrl, {
    onMessage: (msg) => {
      state = applyServer(state, msg, performance.now());
      if (msg.type === "frame" && msg.seq > frameImageSeq) {
        const img = new Image();
        img.onload = () => {
          frameImage = img;
          frameImageSeq = msg.seq;
          markDirty();
        };
        img.src = `data:image/${msg.format};base64,${msg.image}`;
      }
      markDirty();
    },
    onStatus: (status, detail) => {
      state = setConnection(state, status, detail ?? null);
      markDirty();
    },
    onProtocolError: (err) => {
      console.warn("dropped malformed server message:", err.message);
    },
  });
  client.connect();

  setInterval(() => {
    const next = checkStale(state, performance.now());
    if (next !== state) {
      state = next;
      markDirty();
    }
  }, 500);

  // ------------------------------------------------------------- selection
  let liveTrail: Point[] | null = null;
  captureTrails(
    overlay,
    (trail) => {
      liveTrail = null;
      markDirty();
      const frameW = state.frame?.width ?? video.width;
      const frameH = state.frame?.height ?? video.height;
      const bbox = selectionFromStroke(
        trail.points,
        { w: overlay.width, h: overlay.height },
        { w: frameW, h: frameH },
      );
      if (bbox !== null) client.select(bbox);
    },
    (trail) => {
      liveTrail = trail.points;
      markDirty();
    },
  );

  // ----------------------------------------------------------- nav strokes
  const fadeTimers = new Map<CanvasId, ReturnType<typeof setTimeout>>();
  const liveNavTrails = new Map<CanvasId, Point[]>();
  for (const [id, canvas] of Object.entries(navCanvases) as [CanvasId, HTMLCanvasElement][]) {
    captureTrails(
      canvas,
      (trail) => {
        if (trail.points.length >= 2) {
          const gain = Number(gainSlider.value) / 100;
          const pts = decimateStroke(scaleStroke(trailToStrokePoints(trail), gain));
          client.stroke(id, pts, [canvas.width, canvas.height]);
        }
        const existing = fadeTimers.get(id);
        if (existing !== undefined) clearTimeout(existing);
        fadeTimers.set(
          id,
          setTimeout(() => {
            liveNavTrails.delete(id);
            markDirty();
          }, 400),
        );
      },
      (trail) => {
        liveNavTrails.set(id, [...trail.points]);
        markDirty();
      },
    );
  }

  // --------------------------------------------------------------- buttons
  must<HTMLButtonElement>("btn-takeoff").addEventListener("click", () => client.takeoff());
  must<HTMLButtonElement>("btn-land").addEventListener("click", () => client.land());
  must<HTMLButtonElement>("btn-stop").addEventListener("click", () => client.stop());
  must<HTMLButtonElement>("btn-go").addEventListener("click", () => client.go());
  for (const mode of ["manual", "tracking", "collecting"] as FlightMode[]) {
    must<HTMLButtonElement>(`mode-${mode}`).addEventListener("click", () =>
      client.setMode(mode),
    );
  }
  gainSlider.addEventListener("input", markDirty);

  // ------------------------------------------------------------- rendering
  const videoCtx = canvasContext(video);
  const overlayCtx = canvasContext(overlay);
  const navCtx = new Map<CanvasId, CanvasRenderingContext2D>(
    (Object.entries(navCanvases) as [CanvasId, HTMLCanvasElement][]).map(([id, c]) => [
      id,
      canvasContext(c),
    ]),
  );

  function drawVideo(): void {
    videoCtx.fillStyle = "#10151c";
    videoCtx.fillRect(0, 0, video.width, video.height);
    if (frameImage !== null) {
      videoCtx.drawImage(frameImage, 0, 0, video.width, video.height);
    } else {
      videoCtx.fillStyle = "#5c6773";
      videoCtx.font = "14px system-ui, sans-serif";
      videoCtx.textAlign = "center";
      videoCtx.fillText("waiting for video…", video.width / 2, video.height / 2);
    }
  }

  function drawOverlay(): void {
    overlayCtx.clearRect(0, 0, overlay.width, overlay.height);
    const frame = state.frame;
    if (state.overlay !== null && frame !== null) {
      const sx = overlay.width / frame.width;
      const sy = overlay.height / frame.height;
      const [x0, y0, x1, y1] = state.overlay.bbox;
      overlayCtx.lineWidth = 2;
      overlayCtx.strokeStyle = state.overlay.valid ? "#37d67a" : "#f5a623";
      overlayCtx.strokeRect(x0 * sx, y0 * sy, (x1 - x0) * sx, (y1 - y0) * sy);
      if (state.overlay.psr !== null) {
        overlayCtx.font = "12px system-ui, sans-serif";
        overlayCtx.fillStyle = overlayCtx.strokeStyle;
        overlayCtx.textAlign = "left";
        overlayCtx.fillText(
          `psr ${state.overlay.psr.toFixed(1)}`,
          x0 * sx,
          Math.max(12, y0 * sy - 4),
        );
      }
      const c = state.overlay.centroid;
      if (c !== null) {
        overlayCtx.beginPath();
        overlayCtx.moveTo(c[0] * sx - 5, c[1] * sy);
        overlayCtx.lineTo(c[0] * sx + 5, c[1] * sy);
        overlayCtx.moveTo(c[0] * sx, c[1] * sy - 5);
        overlayCtx.lineTo(c[0] * sx, c[1] * sy + 5);
        overlayCtx.stroke();
      }
    }
    if (liveTrail !== null && liveTrail.length > 1) {
      overlayCtx.lineWidth = 1.5;
      overlayCtx.strokeStyle = "#6fb7ff";
      overlayCtx.beginPath();
      overlayCtx.moveTo(liveTrail[0]!.x, liveTrail[0]!.y);
      for (const p of liveTrail.slice(1)) overlayCtx.lineTo(p.x, p.y);
      overlayCtx.stroke();
    }
  }

  function drawNav(): void {
    for (const [id, ctx] of navCtx) {
      const canvas = navCanvases[id];
      ctx.clearRect(0, 0, canvas.width, canvas.height);
      ctx.strokeStyle = "#2c3440";
      ctx.lineWidth = 1;
      ctx.beginPath();
      ctx.moveTo(canvas.width / 2, 0);
      ctx.lineTo(canvas.width / 2, canvas.height);
      ctx.moveTo(0, canvas.height / 2);
      ctx.lineTo(canvas.width, canvas.height / 2);
      ctx.stroke();
      const trail = liveNavTrails.get(id);
      if (trail !== undefined && trail.length > 1) {
        ctx.lineWidth = 2;
        ctx.strokeStyle = "#6fb7ff";
        ctx.beginPath();
        ctx.moveTo(trail[0]!.x, trail[0]!.y);
        for (const p of trail.slice(1)) ctx.lineTo(p.x, p.y);
        ctx.stroke();
      }
    }
  }

  function drawStatus(): void {
    conn.textContent = state.conn;
    conn.className = `badge conn-${state.conn}`;
    banner.hidden = state.conn === "open";
    banner.textContent =
      state.connDetail === "unauthorized"
        ? "unauthorized — check the access token"
        : "connection lost — reconnecting…";
    frozen.hidden = !state.stale;

    const t = state.telemetry;
    modeBadge.textContent = t?.mode ?? "—";
    modeBadge.className = `badge mode-${t?.mode ?? "none"}`;
    phaseBadge.textContent = t ? `${t.phase}${t.halted ? " · halted" : ""}` : "—";
    captureBadge.textContent = String(state.captureCount);
    const psr = t?.tracking?.psr;
    psrBadge.textContent = psr === null || psr === undefined ? "—" : psr.toFixed(1);
    capLabel.textContent = t ? t.speed_cap.toFixed(2) : "—";
    gainLabel.textContent = `${gainSlider.value}%`;

    alertLine.hidden = state.alert === null && state.lastError === null;
    alertLine.textContent = state.alert ?? state.lastError ?? "";

    const items = state.events.slice(-6).reverse();
    eventLog.replaceChildren(
      ...items.map((ev) => {
        const li = document.createElement("li");
        li.textContent = `${ev.kind}${ev.kind === "capture" && ev.data["accepted"] === false ? " (rejected)" : ""}`;
        return li;
      }),
    );
  }

  function renderLoop(): void {
    if (dirty) {
      dirty = false;
      drawVideo();
      drawOverlay();
      drawNav();
      drawStatus();
    }
    requestAnimationFrame(renderLoop);
  }
  requestAnimationFrame(renderLoop);
}

startPanel();
