"""Adaptive correlation-filter tracker.

The filter lives in the Fourier domain.  Training crops a context-padded
region around the selected target box, resamples it to a fixed power-of-two
window, and accumulates a numerator A = sum(G * conj(F)) and denominator
B = sum(F * conj(F) + eps) over randomly warped copies of the crop, where F
is the FFT of a preprocessed sample and G is the FFT of a Gaussian peaked at
the window centre.  Tracking correlates A / B with a preprocessed window
extracted around the previous target position and reads off the response
peak; confidence is the peak-to-sidelobe ratio.  A per-frame running average
keeps the filter tuned to appearance changes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import cv2
import numpy as np

from .frames import BoundingBox, GrayFrame


class TrackerInputError(ValueError):
    """Tracker asked to operate on inputs it cannot use."""


PSR_EXCLUSION = 11  # side of the square blanked around the peak when scoring
MIN_TARGET_AREA = 64.0  # px^2; smaller selections carry too little texture


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class TrackerConfig:
    window_size: int = 64        # side of the square correlation window, px
    target_sigma: float = 2.0    # std-dev of the desired response peak, px
    learn_rate: float = 0.125    # running-average weight for new frames
    regularizer: float = 1e-5    # eps added to each energy term in B
    train_samples: int = 8       # crops used at train time (first is unwarped)
    psr_threshold: float = 8.0   # below this the target counts as lost
    context: float = 2.0         # window covers bbox scaled by this factor

    def __post_init__(self) -> None:
        if not _is_pow2(self.window_size) or self.window_size < PSR_EXCLUSION + 1:
            raise TrackerInputError(
                f"window_size must be a power of two >= 16, got {self.window_size}"
            )
        if not 0.0 <= self.learn_rate <= 1.0:
            raise TrackerInputError(f"learn_rate must lie in [0, 1], got {self.learn_rate}")
        if self.target_sigma <= 0.0:
            raise TrackerInputError(f"target_sigma must be positive, got {self.target_sigma}")
        if self.regularizer < 0.0:
            raise TrackerInputError(f"regularizer must be >= 0, got {self.regularizer}")
        if self.train_samples < 1:
            raise TrackerInputError("need at least one training sample")
        if self.context < 1.0:
            raise TrackerInputError(f"context must be >= 1, got {self.context}")

    def region_for(self, bbox: BoundingBox) -> tuple[float, float]:
        """Frame-pixel extent of the correlation window around a target box.

        Padding the box with surrounding context keeps quarter-window shifts
        inside the trained region, where a tight crop would run out of
        overlap under the edge taper.
        """
        return bbox.width * self.context, bbox.height * self.context


@dataclass(frozen=True)
class CorrelationFilter:
    """Trained filter state: complex spectra plus the config that shaped them."""

    numerator: np.ndarray    # A, complex (size, size)
    denominator: np.ndarray  # B, complex (size, size)
    size: int
    config: TrackerConfig

    @property
    def spectrum(self) -> np.ndarray:
        """The effective (conjugated) filter A / B applied to window spectra."""
        return self.numerator / self.denominator


@dataclass(frozen=True)
class TrackResult:
    centroid: tuple[float, float]  # full-frame px
    bbox: BoundingBox
    peak: float
    psr: float
    valid: bool
    seq: int


def initial_result(bbox: BoundingBox, seq: int = 0) -> TrackResult:
    """Seed result for a freshly selected target: trusted by construction."""
    return TrackResult(
        centroid=bbox.center, bbox=bbox, peak=0.0, psr=float("inf"), valid=True, seq=seq
    )


def hann_window(size: int) -> np.ndarray:
    """2-D Hann taper (outer product of 1-D Hann windows, zero at the edges)."""
    col = np.hanning(size).astype(np.float64)
    return np.outer(col, col)


def gaussian_target(size: int, sigma: float) -> np.ndarray:
    """Desired response: unit Gaussian peaked at (size//2, size//2)."""
    xs = np.arange(size, dtype=np.float64)
    c = size // 2
    g1 = np.exp(-0.5 * ((xs - c) / sigma) ** 2)
    return np.outer(g1, g1)


def preprocess(patch: np.ndarray) -> np.ndarray:
    """Log-compress, normalise to zero mean / unit variance, and taper.

    A constant patch has no structure to normalise; it maps to all zeros.
    """
    if patch.ndim != 2 or patch.shape[0] != patch.shape[1]:
        raise TrackerInputError(f"expected a square window, got shape {patch.shape}")
    p = np.log1p(patch.astype(np.float64))
    p -= p.mean()
    std = p.std()
    if std > 0.0:
        p /= std
    else:
        p = np.zeros_like(p)
    return p * hann_window(p.shape[0])


def _region_px(rw: float, rh: float) -> tuple[int, int]:
    """Integer crop extent actually used for a requested region size."""
    return max(2, int(round(rw))), max(2, int(round(rh)))


def extract_region(
    frame: GrayFrame, cx: float, cy: float, rw: float, rh: float, out_size: int
) -> np.ndarray:
    """Crop a rw x rh region centred on (cx, cy) and resample to out_size square.

    Pixels outside the frame are edge-replicated, so windows near the border
    stay well-defined; a centre more than one region off-frame is rejected.
    """
    w, h = _region_px(rw, rh)
    x0 = int(round(cx - w / 2.0))
    y0 = int(round(cy - h / 2.0))
    if x0 + w < -w or y0 + h < -h or x0 > frame.width + w or y0 > frame.height + h:
        raise TrackerInputError(
            f"window centre ({cx:.1f}, {cy:.1f}) too far outside a "
            f"{frame.width}x{frame.height} frame"
        )
    pad_x = max(w, 2)
    pad_y = max(h, 2)
    padded = cv2.copyMakeBorder(
        frame.pixels, pad_y, pad_y, pad_x, pad_x, borderType=cv2.BORDER_REPLICATE
    )
    crop = padded[y0 + pad_y : y0 + pad_y + h, x0 + pad_x : x0 + pad_x + w]
    if crop.shape != (h, w):  # pragma: no cover - guarded by the range check
        raise TrackerInputError("window fell outside the padded frame")
    if crop.shape != (out_size, out_size):
        crop = cv2.resize(crop, (out_size, out_size), interpolation=cv2.INTER_LINEAR)
    return crop.astype(np.float64)


def _random_warp(patch: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Small random rotation / scale of a square patch, about its centre.

    Centre-symmetric warps only: a translation component would bias the
    learned peak position, and correlation already tolerates translation.
    """
    size = patch.shape[0]
    angle = rng.uniform(-10.0, 10.0)   # degrees
    scale = rng.uniform(0.95, 1.05)
    m = cv2.getRotationMatrix2D((size / 2.0, size / 2.0), angle, scale)
    return cv2.warpAffine(
        patch, m, (size, size), flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_REPLICATE
    )


def _accumulate(
    sample: np.ndarray, g_hat: np.ndarray, eps: float
) -> tuple[np.ndarray, np.ndarray]:
    f_hat = np.fft.fft2(preprocess(sample))
    return g_hat * np.conj(f_hat), f_hat * np.conj(f_hat) + eps


def train(
    frame: GrayFrame,
    bbox: BoundingBox,
    config: TrackerConfig | None = None,
    rng: np.random.Generator | None = None,
) -> CorrelationFilter:
    """Build a fresh filter from one frame and a target box.

    The first training sample is the unwarped crop; the remaining samples are
    random small affine warps of it, which buys tolerance to rotation and
    scale without needing more frames.
    """
    cfg = config or TrackerConfig()
    if rng is None:
        rng = np.random.default_rng(0)
    if not bbox.inside(frame.width, frame.height):
        raise TrackerInputError("target box must lie inside the frame")
    if bbox.area < MIN_TARGET_AREA:
        raise TrackerInputError(
            f"target box area {bbox.area:.0f} px^2 is below the {MIN_TARGET_AREA:.0f} minimum"
        )

    size = cfg.window_size
    cx, cy = bbox.center
    rw, rh = cfg.region_for(bbox)
    base = extract_region(frame, cx, cy, rw, rh, size)
    g_hat = np.fft.fft2(gaussian_target(size, cfg.target_sigma))

    num = np.zeros((size, size), dtype=np.complex128)
    den = np.zeros((size, size), dtype=np.complex128)
    samples = [base] + [_random_warp(base, rng) for _ in range(cfg.train_samples - 1)]
    for sample in samples:
        dn, dd = _accumulate(sample, g_hat, cfg.regularizer)
        num += dn
        den += dd
    return CorrelationFilter(numerator=num, denominator=den, size=size, config=cfg)


def response_map(filt: CorrelationFilter, frame: GrayFrame, bbox: BoundingBox) -> np.ndarray:
    """Real correlation response over the window centred on bbox."""
    cx, cy = bbox.center
    rw, rh = filt.config.region_for(bbox)
    window = extract_region(frame, cx, cy, rw, rh, filt.size)
    f_hat = np.fft.fft2(preprocess(window))
    return np.real(np.fft.ifft2(f_hat * filt.spectrum))


def peak_to_sidelobe(response: np.ndarray, peak_yx: tuple[int, int]) -> float:
    """(peak - sidelobe mean) / sidelobe std, blanking 11x11 around the peak.

    The exclusion block is clipped at the response borders.  A flat sidelobe
    (zero std) cannot be scored and maps to the +inf sentinel.
    """
    if response.shape[0] < PSR_EXCLUSION or response.shape[1] < PSR_EXCLUSION:
        raise TrackerInputError(
            f"response {response.shape} smaller than the {PSR_EXCLUSION}x{PSR_EXCLUSION} "
            "peak exclusion window"
        )
    py, px = peak_yx
    half = PSR_EXCLUSION // 2
    mask = np.ones(response.shape, dtype=bool)
    mask[max(0, py - half) : py + half + 1, max(0, px - half) : px + half + 1] = False
    sidelobe = response[mask]
    mean = float(sidelobe.mean())
    std = float(sidelobe.std())
    if std == 0.0:
        return float("inf")
    return (float(response[py, px]) - mean) / std


def _argmax_yx(response: np.ndarray) -> tuple[int, int]:
    # np.argmax scans row-major, so ties already break to the lowest (y, x).
    flat = int(np.argmax(response))
    return flat // response.shape[1], flat % response.shape[1]


def _parabolic_offset(m1: float, p0: float, p1: float) -> float:
    """Vertex of the parabola through (-1, m1), (0, p0), (+1, p1), in [-0.5, 0.5].

    Falls back to the integer peak when the three samples are not strictly
    concave (flat or corrupted neighbourhoods).
    """
    denom = m1 - 2.0 * p0 + p1
    if denom >= 0.0:
        return 0.0
    return float(np.clip(0.5 * (m1 - p1) / denom, -0.5, 0.5))


def _subpixel_peak(response: np.ndarray, py: int, px: int) -> tuple[float, float]:
    """Refine the integer argmax along each axis; border peaks stay integer."""
    dy = dx = 0.0
    if 0 < py < response.shape[0] - 1:
        dy = _parabolic_offset(
            float(response[py - 1, px]), float(response[py, px]), float(response[py + 1, px])
        )
    if 0 < px < response.shape[1] - 1:
        dx = _parabolic_offset(
            float(response[py, px - 1]), float(response[py, px]), float(response[py, px + 1])
        )
    return dy, dx


def track(filt: CorrelationFilter, frame: GrayFrame, prev: TrackResult) -> TrackResult:
    """Locate the target near its previous box and report the shifted box.

    The response peak's offset from the window centre, refined to sub-pixel
    precision and mapped back from window pixels to frame pixels, is the
    target motion.  The previous box is shifted by that motion and nudged
    back inside the frame if it ran off an edge; loss of the target shows up
    as a low peak-to-sidelobe ratio, never as an exception.
    """
    bbox = prev.bbox.clamped_into(frame.width, frame.height)
    resp = response_map(filt, frame, bbox)
    py, px = _argmax_yx(resp)
    psr = peak_to_sidelobe(resp, (py, px))
    sub_y, sub_x = _subpixel_peak(resp, py, px)
    centre = filt.size // 2
    # The window was resampled from the context region: scale offsets back.
    rw, rh = _region_px(*filt.config.region_for(bbox))
    dx = (px + sub_x - centre) * rw / filt.size
    dy = (py + sub_y - centre) * rh / filt.size
    moved = bbox.shifted(dx, dy).clamped_into(frame.width, frame.height)
    return TrackResult(
        centroid=moved.center,
        bbox=moved,
        peak=float(resp[py, px]),
        psr=psr,
        valid=psr >= filt.config.psr_threshold,
        seq=frame.seq,
    )


def update(filt: CorrelationFilter, frame: GrayFrame, result: TrackResult) -> CorrelationFilter:
    """Fold the tracked appearance into the filter with the configured rate.

    Skipped (filter returned untouched) when the result is invalid — learning
    from a lost target would corrupt the model.  With learn_rate 0 the filter
    is likewise unchanged; with 1 it is rebuilt from this frame alone.
    """
    eta = filt.config.learn_rate
    if not result.valid or eta == 0.0:
        return filt
    cx, cy = result.bbox.center
    rw, rh = filt.config.region_for(result.bbox)
    window = extract_region(frame, cx, cy, rw, rh, filt.size)
    g_hat = np.fft.fft2(gaussian_target(filt.size, filt.config.target_sigma))
    dn, dd = _accumulate(window, g_hat, filt.config.regularizer)
    return replace(
        filt,
        numerator=eta * dn + (1.0 - eta) * filt.numerator,
        denominator=eta * dd + (1.0 - eta) * filt.denominator,
    )
