"""Frame-rate-aware smoothing, differentiation and extremum search on ELA series."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import InsufficientDataError

KERNEL_TRUNCATE = 4.0
MAX_INTERPOLATED_GAP = 0.5


@dataclass(frozen=True)
class ElaSeries:
    """Uniformly sampled ELA values in degrees."""

    values: np.ndarray
    fps: float
    start_time: float = 0.0
    segment_id: int = 0
    start_index: int = 0  # position of values[0] in the originating frame stream

    def __post_init__(self):
        if not self.fps > 0:
            raise ValueError("fps must be positive")

    def __len__(self):
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self.values)) / self.fps

    def time_of(self, index: float) -> float:
        return self.start_time + index / self.fps

    def with_values(self, values) -> "ElaSeries":
        return replace(self, values=np.asarray(values, dtype=float))


def smoothing_sigma(fps: float) -> float:
    """Gaussian standard deviation in samples; grows with the frame rate."""
    return fps / 30.0


def gaussian_kernel(sigma: float, truncate: float = KERNEL_TRUNCATE) -> np.ndarray:
    radius = int(truncate * sigma + 0.5)
    x = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_smooth(series: ElaSeries, sigma: float | None = None) -> ElaSeries:
    """Gaussian-filter the series with sigma = fps / 30 samples.

    The kernel is cut at 4 sigma and renormalized; edges are mirrored
    (``d c b a | a b c d``) so the ends are not pulled toward zero.

    Args:
        series: input series.
        sigma: override of the kernel width in samples.
    """
    values = np.asarray(series.values, dtype=float)
    if len(values) == 0:
        raise InsufficientDataError("cannot smooth an empty series")
    sigma = smoothing_sigma(series.fps) if sigma is None else float(sigma)
    if sigma <= 0:
        return series.with_values(values.copy())
    kernel = gaussian_kernel(sigma)
    radius = len(kernel) // 2
    padded = np.pad(values, radius, mode="symmetric")
    return series.with_values(np.convolve(padded, kernel, mode="valid"))


def central_derivative(series: ElaSeries) -> np.ndarray:
    """Time derivative in degrees per second.

    Central differences inside, one-sided differences at both ends.
    """
    values = np.asarray(series.values, dtype=float)
    if len(values) < 3:
        raise InsufficientDataError(f"need at least 3 samples to differentiate, got {len(values)}")
    return np.gradient(values) * series.fps


def local_extrema(values: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Indices of interior local maxima and minima.

    A flat run counts once, at its first sample, and only when the signal
    rises into it and falls out of it (or the reverse, for minima).
    """
    v = np.asarray(values, dtype=float)
    if len(v) < 3:
        return np.array([], dtype=int), np.array([], dtype=int)
    # collapse plateaus to runs, then compare each run with its neighbours
    change = np.flatnonzero(np.diff(v) != 0) + 1
    starts = np.concatenate(([0], change))
    levels = v[starts]
    if len(levels) < 3:
        return np.array([], dtype=int), np.array([], dtype=int)
    mid = levels[1:-1]
    is_max = (mid > levels[:-2]) & (mid > levels[2:])
    is_min = (mid < levels[:-2]) & (mid < levels[2:])
    inner = starts[1:-1]
    return inner[is_max], inner[is_min]


def series_from_samples(
    timestamps: Sequence[float],
    values: Sequence[float | None],
    fps: float | None = None,
    max_gap: float = MAX_INTERPOLATED_GAP,
) -> list[ElaSeries]:
    """Build uniformly sampled segments from a per-frame value stream.

    Frames are assumed consecutive at ``fps`` (default: the stream's mean
    rate). Missing values (``None`` or NaN) spanning at most ``max_gap``
    seconds are linearly interpolated; longer gaps split the stream into
    separate segments. Leading and trailing gaps are dropped.
    """
    t = np.asarray(timestamps, dtype=float)
    v = np.array([np.nan if x is None else float(x) for x in values], dtype=float)
    if len(t) != len(v):
        raise ValueError("timestamps and values differ in length")
    if len(t) == 0:
        return []
    if fps is None:
        if len(t) < 2 or t[-1] <= t[0]:
            raise InsufficientDataError("cannot infer a frame rate from fewer than two frames")
        fps = (len(t) - 1) / (t[-1] - t[0])
    valid = np.isfinite(v)
    max_missing = int(math.floor(max_gap * fps + 1e-9))

    segments: list[ElaSeries] = []
    idx = np.flatnonzero(valid)
    if len(idx) == 0:
        return []
    run_start = idx[0]
    prev = idx[0]

    def close(a, b):
        seg = v[a : b + 1].copy()
        missing = ~np.isfinite(seg)
        if missing.any():
            x = np.arange(len(seg))
            seg[missing] = np.interp(x[missing], x[~missing], seg[~missing])
        segments.append(ElaSeries(seg, fps, float(t[a]), len(segments), int(a)))

    for i in idx[1:]:
        if i - prev - 1 > max_missing:
            close(run_start, prev)
            run_start = i
        prev = i
    close(run_start, prev)
    return segments
