/**
 * Pointer-trail geometry: turning raw pointer samples into select boxes and
 * navigation strokes, independent of any DOM or canvas API.
 */

import type { Bbox, StrokePoint } from "./protocol.js";

export interface Point {
  readonly x: number;
  readonly y: number;
}

export interface Bounds {
  readonly xMin: number;
  readonly yMin: number;
  readonly xMax: number;
  readonly yMax: number;
}

export function strokeBounds(points: readonly Point[]): Bounds | null {
  if (points.length === 0) return null;
  let xMin = Infinity;
  let yMin = Infinity;
  let xMax = -Infinity;
  let yMax = -Infinity;
  for (const p of points) {
    if (p.x < xMin) xMin = p.x;
    if (p.y < yMin) yMin = p.y;
    if (p.x > xMax) xMax = p.x;
    if (p.y > yMax) yMax = p.y;
  }
  return { xMin, yMin, xMax, yMax };
}

/**
 * A trail counts as a closed loop (a circling gesture) when its endpoints
 * meet again within a tolerance proportional to the loop's size.  Straight
 * drags end far from where they start and stay open.
 */
export function isClosedStroke(points: readonly Point[]): boolean {
  if (points.length < 3) return false;
  const bounds = strokeBounds(points);
  if (bounds === null) return false;
  const first = points[0]!;
  const last = points[points.length - 1]!;
  const gap = Math.hypot(last.x - first.x, last.y - first.y);
  const diag = Math.hypot(bounds.xMax - bounds.xMin, bounds.yMax - bounds.yMin);
  return gap <= Math.max(12, 0.3 * diag);
}

const MIN_SELECT_SPAN_PX = 4;

/**
 * Convert a closed selection stroke drawn on a canvas into a frame-pixel
 * bbox.  Returns null for trails that are not a usable selection: fewer than
 * three points, not closed, or collapsing below a few pixels once scaled.
 */
export function selectionFromStroke(
  points: readonly Point[],
  canvas: { readonly w: number; readonly h: number },
  frame: { readonly w: number; readonly h: number },
): Bbox | null {
  if (points.length < 3 || !isClosedStroke(points)) return null;
  if (canvas.w <= 0 || canvas.h <= 0 || frame.w <= 0 || frame.h <= 0) return null;
  const bounds = strokeBounds(points);
  if (bounds === null) return null;
  const sx = frame.w / canvas.w;
  const sy = frame.h / canvas.h;
  const xMin = Math.max(0, bounds.xMin * sx);
  const yMin = Math.max(0, bounds.yMin * sy);
  const xMax = Math.min(frame.w, bounds.xMax * sx);
  const yMax = Math.min(frame.h, bounds.yMax * sy);
  if (xMax - xMin < MIN_SELECT_SPAN_PX || yMax - yMin < MIN_SELECT_SPAN_PX) {
    return null;
  }
  return [xMin, yMin, xMax, yMax];
}

/**
 * Scale a navigation trail's displacement about its first point, keeping
 * timestamps.  This is the client-side speed slider: the gateway maps stroke
 * length to commanded speed, so shrinking the trail caps the speed it asks
 * for.  gain is clamped to (0, 1].
 */
export function scaleStroke(
  points: readonly StrokePoint[],
  gain: number,
): StrokePoint[] {
  const g = Math.min(1, Math.max(0.01, gain));
  if (points.length === 0) return [];
  const [ox, oy] = [points[0]![0], points[0]![1]];
  return points.map((p): StrokePoint => [
    ox + (p[0] - ox) * g,
    oy + (p[1] - oy) * g,
    p[2],
  ]);
}

/**
 * Thin a trail to at most maxPoints samples, always keeping the endpoints.
 * Keeps stroke messages far below the wire size limit on long drags.
 */
export function decimateStroke<T>(points: readonly T[], maxPoints = 256): T[] {
  if (maxPoints < 2) throw new RangeError("maxPoints must be at least 2");
  if (points.length <= maxPoints) return [...points];
  const out: T[] = [];
  const step = (points.length - 1) / (maxPoints - 1);
  for (let i = 0; i < maxPoints; i++) {
    out.push(points[Math.round(i * step)]!);
  }
  out[out.length - 1] = points[points.length - 1]!;
  return out;
}
