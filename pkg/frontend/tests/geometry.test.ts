import { describe, expect, it } from "vitest";

import {
  decimateStroke,
  isClosedStroke,
  scaleStroke,
  selectionFromStroke,
  strokeBounds,
  type Point,
} from "../src/geometry.js";

function circle(cx: number, cy: number, r: number, n = 32, closeGap = 0): Point[] {
  const pts: Point[] = [];
  for (let i = 0; i <= n; i++) {
    const a = (2 * Math.PI * i) / n;
    pts.push({ x: cx + r * Math.cos(a), y: cy + r * Math.sin(a) });
  }
  if (closeGap > 0) {
    // stop short of closing the loop by roughly closeGap pixels
    const cut = Math.ceil((closeGap / (2 * Math.PI * r)) * n);
    return pts.slice(0, Math.max(3, pts.length - cut));
  }
  return pts;
}

describe("strokeBounds", () => {
  it("is the tight axis-aligned box", () => {
    const b = strokeBounds([
      { x: 4, y: 9 },
      { x: -2, y: 3 },
      { x: 7, y: 5 },
    ]);
    expect(b).toEqual({ xMin: -2, yMin: 3, xMax: 7, yMax: 9 });
  });

  it("is null for an empty trail", () => {
    expect(strokeBounds([])).toBeNull();
  });
});

describe("isClosedStroke", () => {
  it("accepts a drawn circle, even a slightly open one", () => {
    expect(isClosedStroke(circle(100, 100, 40))).toBe(true);
    expect(isClosedStroke(circle(100, 100, 40, 32, 10))).toBe(true);
  });

  it("rejects straight drags and dots", () => {
    const line: Point[] = Array.from({ length: 20 }, (_, i) => ({ x: i * 10, y: 50 }));
    expect(isClosedStroke(line)).toBe(false);
    expect(isClosedStroke([{ x: 1, y: 1 }, { x: 2, y: 2 }])).toBe(false);
  });
});

describe("selectionFromStroke", () => {
  const canvas = { w: 960, h: 540 };
  const frame = { w: 640, h: 360 };

  it("maps a circling gesture to a frame-pixel bbox", () => {
    const bbox = selectionFromStroke(circle(480, 270, 90), canvas, frame);
    expect(bbox).not.toBeNull();
    const [x0, y0, x1, y1] = bbox!;
    // canvas is 1.5x the frame: a 90 px-radius loop at canvas centre becomes
    // a 60 px-radius box at frame centre
    expect(x0).toBeCloseTo(320 - 60, 6);
    expect(y0).toBeCloseTo(180 - 60, 6);
    expect(x1).toBeCloseTo(320 + 60, 6);
    expect(y1).toBeCloseTo(180 + 60, 6);
  });

  it("returns null for fewer than three points", () => {
    expect(selectionFromStroke([{ x: 0, y: 0 }, { x: 9, y: 9 }], canvas, frame)).toBeNull();
  });

  it("returns null for an open drag", () => {
    const line: Point[] = Array.from({ length: 30 }, (_, i) => ({ x: i * 8, y: 100 + i }));
    expect(selectionFromStroke(line, canvas, frame)).toBeNull();
  });

  it("returns null for a degenerate tiny loop", () => {
    expect(selectionFromStroke(circle(100, 100, 2), canvas, frame)).toBeNull();
  });

  it("clamps to the frame", () => {
    const bbox = selectionFromStroke(circle(10, 10, 80), canvas, frame);
    expect(bbox).not.toBeNull();
    const [x0, y0, x1, y1] = bbox!;
    expect(x0).toBe(0);
    expect(y0).toBe(0);
    expect(x1).toBeGreaterThan(x0);
    expect(y1).toBeGreaterThan(y0);
  });
});

describe("scaleStroke", () => {
  it("shrinks displacement about the first point, keeping timestamps", () => {
    const scaled = scaleStroke(
      [
        [100, 100, 0],
        [200, 100, 16],
        [300, 100, 33],
      ],
      0.5,
    );
    expect(scaled).toEqual([
      [100, 100, 0],
      [150, 100, 16],
      [200, 100, 33],
    ]);
  });

  it("clamps gain into (0, 1]", () => {
    const pts: [number, number, number][] = [
      [0, 0, 0],
      [100, 0, 10],
    ];
    expect(scaleStroke(pts, 5)[1]![0]).toBe(100);
    expect(scaleStroke(pts, -1)[1]![0]).toBeCloseTo(1);
  });
});

describe("decimateStroke", () => {
  it("keeps short trails untouched", () => {
    const pts = [1, 2, 3];
    expect(decimateStroke(pts, 10)).toEqual([1, 2, 3]);
  });

  it("caps long trails and keeps both endpoints", () => {
    const pts = Array.from({ length: 1000 }, (_, i) => i);
    const out = decimateStroke(pts, 64);
    expect(out.length).toBe(64);
    expect(out[0]).toBe(0);
    expect(out[out.length - 1]).toBe(999);
    for (let i = 1; i < out.length; i++) expect(out[i]!).toBeGreaterThan(out[i - 1]!);
  });

  it("rejects a cap below two", () => {
    expect(() => decimateStroke([1, 2, 3], 1)).toThrow(RangeError);
  });
});
