"""Tracker benchmarks: shift-recovery accuracy and raw cycle throughput.

The accuracy table is fully seeded and therefore byte-reproducible; the
throughput table measures the host machine and is reported separately, so
reproducibility checks can compare the deterministic section alone.
"""

from __future__ import annotations

import math
import time

import cv2
import numpy as np

from ..frames import BoundingBox, GrayFrame
from ..tracker import TrackerConfig, initial_result, track, train, update

DEFAULT_SEED = 2024


def _textured(width: int, height: int, rng: np.random.Generator) -> np.ndarray:
    """Aperiodic multi-scale texture in [0, 1] (what correlation peaks need)."""
    img = 0.35 + 0.08 * rng.standard_normal((height, width))
    blob = cv2.GaussianBlur(rng.standard_normal((height, width)), (0, 0), sigmaX=2.5)
    lo, hi = blob.min(), blob.max()
    img = 0.6 * img + 0.4 * (0.05 + 0.9 * (blob - lo) / (hi - lo))
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def _shifted(base: np.ndarray, dx: int, dy: int, seq: int) -> GrayFrame:
    """The same scene translated by (dx, dy) px with edge replication."""
    h, w = base.shape
    pad = max(abs(dx), abs(dy)) + 1
    padded = np.pad(base, pad, mode="edge")
    y0, x0 = pad - dy, pad - dx
    return GrayFrame.from_array(padded[y0 : y0 + h, x0 : x0 + w], seq=seq, ts_ms=seq * 33.0)


def shift_accuracy(
    trials: int = 1000,
    *,
    window: int = 64,
    seed: int = DEFAULT_SEED,
) -> dict:
    """Recover random integer translations up to a quarter window.

    Each trial synthesizes a fresh textured scene, trains a filter on a
    target box, translates the whole scene by a random (dx, dy) with
    |shift| <= window/4, and compares the tracked centroid displacement to
    the known shift.  A hit is both axes within 1 px.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    cfg = TrackerConfig(window_size=window)
    rng = np.random.default_rng(seed)
    max_shift = window // 4
    width, height = 320, 240

    hits = 0
    errors: list[float] = []
    for i in range(trials):
        cx = float(rng.integers(120, 201))
        cy = float(rng.integers(100, 141))
        box = BoundingBox(cx - 32.0, cy - 32.0, cx + 32.0, cy + 32.0)
        scene = _textured(width, height, rng)
        # Stamp strong texture inside the target so it dominates its context.
        x0, y0, x1, y1 = (int(round(v)) for v in (box.x_min, box.y_min, box.x_max, box.y_max))
        blob = cv2.GaussianBlur(rng.standard_normal((y1 - y0, x1 - x0)), (0, 0), sigmaX=2.5)
        lo, hi = blob.min(), blob.max()
        scene[y0:y1, x0:x1] = 0.05 + 0.9 * (blob - lo) / (hi - lo)

        frame0 = GrayFrame.from_array(scene, seq=0, ts_ms=0.0)
        filt = train(frame0, box, cfg, rng)
        dx = int(rng.integers(-max_shift, max_shift + 1))
        dy = int(rng.integers(-max_shift, max_shift + 1))
        result = track(filt, _shifted(scene, dx, dy, seq=i + 1), initial_result(box))
        ex = abs((result.centroid[0] - box.center[0]) - dx)
        ey = abs((result.centroid[1] - box.center[1]) - dy)
        errors.append(math.hypot(ex, ey))
        if ex <= 1.0 and ey <= 1.0:
            hits += 1

    return {
        "trials": trials,
        "window": window,
        "max_shift_px": max_shift,
        "seed": seed,
        "hits_within_1px": hits,
        "hit_rate": round(hits / trials, 6),
        "mean_err_px": round(float(np.mean(errors)), 6),
        "max_err_px": round(float(np.max(errors)), 6),
    }


def throughput(
    cycles: int = 500,
    *,
    window: int = 64,
    seed: int = DEFAULT_SEED,
) -> dict:
    """Measure track+update cycles per second on a pre-rendered sequence.

    Frame synthesis is excluded from the timed region: the figure reported
    is the tracker's own arithmetic, which is what a camera pipeline would
    see per frame.
    """
    if cycles < 1:
        raise ValueError(f"cycles must be >= 1, got {cycles}")
    cfg = TrackerConfig(window_size=window)
    rng = np.random.default_rng(seed)
    box = BoundingBox(128.0, 88.0, 192.0, 152.0)
    scene = _textured(320, 240, rng)
    x0, y0, x1, y1 = (int(round(v)) for v in (box.x_min, box.y_min, box.x_max, box.y_max))
    blob = cv2.GaussianBlur(rng.standard_normal((y1 - y0, x1 - x0)), (0, 0), sigmaX=2.5)
    lo, hi = blob.min(), blob.max()
    scene[y0:y1, x0:x1] = 0.05 + 0.9 * (blob - lo) / (hi - lo)
    frame0 = GrayFrame.from_array(scene, seq=0, ts_ms=0.0)

    # A small orbit of pre-rendered shifts keeps the target moving without
    # ever drifting away from the trained appearance.
    ring = []
    for k in range(16):
        angle = 2.0 * math.pi * k / 16
        ring.append(_shifted(scene, int(round(3 * math.cos(angle))),
                             int(round(3 * math.sin(angle))), seq=k + 1))

    filt = train(frame0, box, cfg, rng)
    result = initial_result(box)
    t0 = time.perf_counter()
    for i in range(cycles):
        frame = ring[i % len(ring)]
        result = track(filt, frame, result)
        filt = update(filt, frame, result)
    elapsed = time.perf_counter() - t0

    return {
        "cycles": cycles,
        "window": window,
        "elapsed_s": round(elapsed, 6),
        "cycles_per_sec": round(cycles / elapsed, 3) if elapsed > 0 else float("inf"),
        "final_psr": round(result.psr, 3),
        "final_valid": result.valid,
    }


def bench_tracker(
    *,
    trials: int = 1000,
    cycles: int = 500,
    window: int = 64,
    seed: int = DEFAULT_SEED,
) -> dict:
    """Full benchmark: deterministic accuracy table + measured throughput."""
    return {
        "accuracy": shift_accuracy(trials, window=window, seed=seed),
        "throughput": throughput(cycles, window=window, seed=seed),
        "config": {"trials": trials, "cycles": cycles, "window": window, "seed": seed},
    }


def format_bench_report(report: dict) -> str:
    """Stable text rendering of a benchmark report."""
    acc = report["accuracy"]
    thr = report["throughput"]
    lines = [
        "tracker benchmark",
        f"  window          : {acc['window']}x{acc['window']} px",
        f"  seed            : {acc['seed']}",
        "accuracy (deterministic)",
        f"  trials          : {acc['trials']}",
        f"  max shift       : {acc['max_shift_px']} px",
        f"  within 1 px     : {acc['hits_within_1px']}/{acc['trials']}"
        f" ({100.0 * acc['hit_rate']:.1f}%)",
        f"  mean error      : {acc['mean_err_px']:.3f} px",
        f"  max error       : {acc['max_err_px']:.3f} px",
        "throughput (measured on this host)",
        f"  cycles          : {thr['cycles']}",
        f"  elapsed         : {thr['elapsed_s']:.3f} s",
        f"  cycles/sec      : {thr['cycles_per_sec']:.1f}",
        f"  final psr       : {thr['final_psr']:.1f} (valid={thr['final_valid']})",
    ]
    return "\n".join(lines)
