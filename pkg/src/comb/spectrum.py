"""Line-scan spectral estimation of oscillatory payload motion.

A fixed line segment is placed through the region of apparent motion in a
video; intensities sampled along it are collapsed into a scalar per frame
(or per frame transition), and the dominant frequency of that temporal
signal is taken from a windowed, zero-padded FFT with parabolic peak
interpolation.

The frame-difference signal rectifies the motion and can double the
apparent frequency, so characterize() also evaluates the raw mean
intensity signal and keeps whichever candidate shows the higher SNR.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CombError

DEFAULT_SNR_THRESHOLD = 3.0
MIN_SIGNAL_LEN = 16


class EmptySequence(CombError):
    pass


class LineOutOfBounds(CombError):
    pass


class NoDominantPeak(CombError):
    def __init__(self, msg: str, snr: float = 0.0):
        super().__init__(msg)
        self.snr = snr


class SignalTooShort(CombError):
    pass


@dataclass(frozen=True)
class LineScanSignal:
    fps: float
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        if len(self.values) < MIN_SIGNAL_LEN:
            raise SignalTooShort(
                f"need at least {MIN_SIGNAL_LEN} samples, got {len(self.values)}"
            )

    @classmethod
    def from_csv(cls, path, fps: float | None = None) -> "LineScanSignal":
        """One value per line; optional header row ``value`` or ``fps,<hz>``."""
        rows = Path(path).read_text().strip().splitlines()
        if rows and rows[0].lower().startswith("fps"):
            fps = float(rows[0].split(",")[1])
            rows = rows[1:]
        if rows and not _is_number(rows[0]):
            rows = rows[1:]
        if fps is None:
            raise ValueError("fps must come from the file header or the caller")
        return cls(fps=fps, values=np.array([float(r) for r in rows]))


def _is_number(text: str) -> bool:
    try:
        float(text.split(",")[0])
        return True
    except ValueError:
        return False


@dataclass(frozen=True)
class SpectrumPeak:
    freq: float
    magnitude: float
    bin_width: float
    snr: float

    def to_dict(self) -> dict:
        return {
            "freq_hz": self.freq,
            "magnitude": self.magnitude,
            "bin_width_hz": self.bin_width,
            "snr": self.snr,
        }


def _sample_line(frame: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear samples of a grayscale frame at fractional pixel coordinates."""
    h, w = frame.shape
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    f = frame.astype(float)
    return (
        f[y0, x0] * (1 - fx) * (1 - fy)
        + f[y0, x1] * fx * (1 - fy)
        + f[y1, x0] * (1 - fx) * fy
        + f[y1, x1] * fx * fy
    )


def extract_line_signal(
    frames,
    line: tuple[float, float, float, float],
    fps: float,
    n_samples: int = 256,
    mode: str = "absdiff",
) -> LineScanSignal:
    """Collapse frames to a temporal signal along a fixed line segment.

    mode "absdiff": one value per frame transition, the mean absolute
    intensity change along the line. mode "mean": one value per frame, the
    mean intensity along the line.
    """
    frames = list(frames)
    if len(frames) < 2:
        raise EmptySequence("need at least 2 frames")
    x0, y0, x1, y1 = line
    h, w = np.asarray(frames[0]).shape
    for xi, yi in ((x0, y0), (x1, y1)):
        if not (0 <= xi <= w - 1 and 0 <= yi <= h - 1):
            raise LineOutOfBounds(f"line endpoint ({xi}, {yi}) outside {w}x{h} frame")
    ts = np.arange(n_samples) / (n_samples - 1)
    xs = x0 + (x1 - x0) * ts
    ys = y0 + (y1 - y0) * ts

    profiles = np.stack([_sample_line(np.asarray(f), xs, ys) for f in frames])
    if mode == "absdiff":
        values = np.mean(np.abs(np.diff(profiles, axis=0)), axis=1)
    elif mode == "mean":
        values = profiles.mean(axis=1)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return LineScanSignal(fps=fps, values=values)


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


def dominant_frequency(
    signal: LineScanSignal,
    snr_threshold: float = DEFAULT_SNR_THRESHOLD,
    pad_factor: int = 4,
) -> SpectrumPeak:
    """Dominant peak of the magnitude spectrum over (0, fps/2].

    Mean is removed, a Hann window applied, and the transform zero-padded
    to pad_factor times the next power of two. The peak bin is refined by
    parabolic interpolation on log magnitude; SNR is peak over median
    magnitude in the searched band.
    """
    x = signal.values - signal.values.mean()
    n = len(x)
    window = np.hanning(n)
    n_fft = _next_pow2(n) * pad_factor
    mag = np.abs(np.fft.rfft(x * window, n_fft))
    freqs = np.fft.rfftfreq(n_fft, 1.0 / signal.fps)
    bin_width = signal.fps / n_fft

    band = (freqs > 0) & (freqs <= signal.fps / 2 + 1e-12)
    band_idx = np.flatnonzero(band)
    k = band_idx[int(np.argmax(mag[band_idx]))]

    median = float(np.median(mag[band_idx]))
    snr = float(mag[k] / median) if median > 0 else math.inf
    if snr < snr_threshold:
        raise NoDominantPeak(
            f"peak SNR {snr:.2f} below threshold {snr_threshold}", snr=snr
        )

    freq = freqs[k]
    if 1 <= k < len(mag) - 1 and mag[k - 1] > 0 and mag[k + 1] > 0:
        eps = np.finfo(float).tiny
        la = math.log(mag[k - 1] + eps)
        lb = math.log(mag[k] + eps)
        lc = math.log(mag[k + 1] + eps)
        denom = la - 2.0 * lb + lc
        if denom < 0:
            delta = 0.5 * (la - lc) / denom
            delta = max(-0.5, min(0.5, delta))
            freq = (k + delta) * bin_width
    return SpectrumPeak(
        freq=float(freq),
        magnitude=float(mag[k]),
        bin_width=bin_width,
        snr=snr,
    )


def characterize(
    frames,
    line: tuple[float, float, float, float],
    fps: float,
    n_samples: int = 256,
    snr_threshold: float = DEFAULT_SNR_THRESHOLD,
) -> dict:
    """Run both line-signal variants and keep the higher-SNR dominant peak."""
    candidates: dict[str, SpectrumPeak | None] = {}
    for mode in ("absdiff", "mean"):
        sig = extract_line_signal(frames, line, fps, n_samples=n_samples, mode=mode)
        try:
            candidates[mode] = dominant_frequency(sig, snr_threshold=snr_threshold)
        except NoDominantPeak:
            candidates[mode] = None
    usable = {m: p for m, p in candidates.items() if p is not None}
    if not usable:
        raise NoDominantPeak("no line-signal variant shows a dominant peak")
    best_mode = max(usable, key=lambda m: usable[m].snr)
    return {"best_mode": best_mode, "peak": usable[best_mode], "candidates": candidates}


_FRAME_NUM = re.compile(r"(\d+)")


def load_frames(directory) -> list[np.ndarray]:
    """Grayscale frames from numbered image files (PGM, PNG, ...)."""
    from PIL import Image

    paths = [p for p in Path(directory).iterdir() if p.is_file()]

    def order(p: Path):
        m = _FRAME_NUM.search(p.stem)
        return (int(m.group(1)) if m else 0, p.name)

    paths.sort(key=order)
    if not paths:
        raise EmptySequence(f"no frames found in {directory}")
    frames = []
    for p in paths:
        with Image.open(p) as img:
            frames.append(np.asarray(img.convert("L"), dtype=np.uint8))
    return frames


def max_variance_line(frames, axis: str = "auto") -> tuple[float, float, float, float]:
    """Heuristic line through the region of strongest temporal variance.

    Returns a full-width horizontal or full-height vertical segment through
    the variance centroid. Intended as a documented fallback when no manual
    line is given; callers should prefer explicit placement.
    """
    stack = np.stack([np.asarray(f, dtype=float) for f in frames])
    var = stack.var(axis=0)
    total = var.sum()
    h, w = var.shape
    if total == 0:
        return (0.0, (h - 1) / 2.0, w - 1.0, (h - 1) / 2.0)
    ys, xs = np.mgrid[0:h, 0:w]
    cy = float((var * ys).sum() / total)
    cx = float((var * xs).sum() / total)
    row_spread = float(var.sum(axis=1).std())
    col_spread = float(var.sum(axis=0).std())
    if axis == "vertical" or (axis == "auto" and col_spread < row_spread):
        return (cx, 0.0, cx, h - 1.0)
    return (0.0, cy, w - 1.0, cy)
