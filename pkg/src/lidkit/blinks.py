"""Blink segmentation on a smoothed ELA series.

Peaks of the ELA derivative are split into blink and noise classes with a
two-cluster 1D k-means, descending and ascending flanks are paired, and
each pair is grown to a window bounded by the nearest local maxima of the
signal. Windows whose interior rises above either boundary are rejected as
merged blinks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import InsufficientDataError
from .filtering import ElaSeries, central_derivative, gaussian_smooth, local_extrema

log = logging.getLogger(__name__)

MIN_PEAKS = 4
# if the weaker cluster centre is at least this fraction of the stronger one,
# the peaks form a single population and all count as blink flanks
SINGLE_CLUSTER_RATIO = 0.4


@dataclass(frozen=True)
class Blink:
    """A detected blink; indices are relative to the series it was found on.

    ``frame_offset`` maps them back to the originating frame stream.
    """

    i_start: int
    i_end: int
    m1_index: int
    m2_index: int
    m1: float
    m2: float
    ela_start: float
    ela_end: float
    ela_min: float
    segment_id: int = 0
    frame_offset: int = 0

    @property
    def frame_window(self) -> tuple[int, int]:
        return self.frame_offset + self.i_start, self.frame_offset + self.i_end

    def check(self) -> None:
        """Raise ``AssertionError`` if the blink violates its invariants."""
        assert self.i_start <= self.m1_index < self.m2_index <= self.i_end, self
        assert self.ela_min <= min(self.ela_start, self.ela_end), self
        assert self.m1 < 0 < self.m2, self


@dataclass(frozen=True)
class AnalysisEpoch:
    epoch_end_time: float
    window_span: float
    period: float
    blinks: list[Blink] = field(default_factory=list)


def _two_means(mags: np.ndarray) -> np.ndarray:
    """Exact 1D two-means: the best split of the sorted values by within-cluster sum of squares."""
    order = np.argsort(mags, kind="stable")
    x = mags[order]
    n = len(x)
    k = np.arange(1, n)
    c1, c2 = np.cumsum(x)[:-1], np.cumsum(x**2)[:-1]
    total1, total2 = x.sum(), (x**2).sum()
    cost = (c2 - c1**2 / k) + ((total2 - c2) - (total1 - c1) ** 2 / (n - k))
    split = int(np.argmin(cost)) + 1
    is_high = np.zeros(n, dtype=bool)
    is_high[order[split:]] = True
    return is_high


def cluster_peaks(peak_values: Sequence[float], seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Split derivative peaks into blink and noise classes.

    Two-means on the absolute peak values, solved exactly: in one dimension
    the optimal clusters are a split of the sorted values, so every split is
    scored. The cluster with the larger mean is the blink class. No random
    initialisation is involved, so ``seed`` does not change the result; it is
    accepted so callers can thread one seed through every stage.

    Returns:
        ``(blink_indices, noise_indices)`` into ``peak_values``.

    Raises:
        InsufficientDataError: fewer than four peaks.
    """
    mags = np.abs(np.asarray(peak_values, dtype=float))
    if len(mags) < MIN_PEAKS:
        raise InsufficientDataError(f"need at least {MIN_PEAKS} peaks to cluster, got {len(mags)}")
    everything = np.arange(len(mags))
    if mags.max() == mags.min():
        return everything, np.array([], dtype=int)
    is_blink = _two_means(mags)
    if mags[~is_blink].mean() >= SINGLE_CLUSTER_RATIO * mags[is_blink].mean():
        return everything, np.array([], dtype=int)
    return everything[is_blink], everything[~is_blink]


def pair_flanks(neg_peaks: Sequence[int], pos_peaks: Sequence[int]) -> list[tuple[int, int]]:
    """Pair each descent with the next ascent.

    Walking in time order, a descent opens a pair and the first following
    ascent closes it. Descents arriving while a pair is open, and ascents
    with nothing open, are discarded.
    """
    events = sorted([(int(i), 0) for i in neg_peaks] + [(int(i), 1) for i in pos_peaks])
    pairs = []
    pending = None
    for index, kind in events:
        if kind == 0:
            if pending is None:
                pending = index
        elif pending is not None and index > pending:
            pairs.append((pending, index))
            pending = None
    return pairs


def build_blink_window(
    signal: ElaSeries, m1_index: int, m2_index: int, derivative: np.ndarray | None = None
) -> Blink:
    """Grow a blink window outward from the flank extrema.

    The window starts at the nearest local maximum at or before ``m1_index``
    and ends at the first local maximum at or after ``m2_index``; on a flat
    stretch the sample nearest the blink is taken. Missing maxima clamp to the
    series ends.
    """
    v = np.asarray(signal.values, dtype=float)
    d = central_derivative(signal) if derivative is None else derivative
    i_start = int(m1_index)
    while i_start > 0 and v[i_start - 1] > v[i_start]:
        i_start -= 1
    i_end = int(m2_index)
    while i_end < len(v) - 1 and v[i_end + 1] > v[i_end]:
        i_end += 1
    return Blink(
        i_start=i_start,
        i_end=i_end,
        m1_index=int(m1_index),
        m2_index=int(m2_index),
        m1=float(d[m1_index]),
        m2=float(d[m2_index]),
        ela_start=float(v[i_start]),
        ela_end=float(v[i_end]),
        ela_min=float(v[i_start : i_end + 1].min()),
        segment_id=signal.segment_id,
        frame_offset=signal.start_index,
    )


def reject_merged(signal: ElaSeries, blink: Blink) -> bool:
    """True if the signal between the two flanks climbs above the window's start or end level."""
    interior = np.asarray(signal.values)[blink.m1_index + 1 : blink.m2_index]
    if len(interior) == 0:
        return False
    peak = interior.max()
    return bool(peak > blink.ela_start or peak > blink.ela_end)


def _refine(blink: Blink, d: np.ndarray) -> Blink:
    # steepest descent and ascent inside the window
    m1_index = blink.i_start + int(np.argmin(d[blink.i_start : blink.m2_index]))
    m2_index = m1_index + 1 + int(np.argmax(d[m1_index + 1 : blink.i_end + 1]))
    return replace(blink, m1_index=m1_index, m2_index=m2_index, m1=float(d[m1_index]), m2=float(d[m2_index]))


def _overlaps(a: Blink, b: Blink) -> bool:
    # windows that merely share a boundary sample do not overlap
    return a.i_start < b.i_end and b.i_start < a.i_end


def detect_blinks(signal: ElaSeries, seed: int = 0) -> list[Blink]:
    """Find blinks on an already smoothed series.

    Returns:
        Non-overlapping blinks sorted by start index; empty when the series
        has too few derivative peaks to cluster.
    """
    if len(signal) < 3:
        return []
    d = central_derivative(signal)
    maxima, minima = local_extrema(d)
    neg = minima[d[minima] < 0]
    pos = maxima[d[maxima] > 0]
    try:
        neg_blink, _ = cluster_peaks(d[neg], seed)
        pos_blink, _ = cluster_peaks(d[pos], seed)
    except InsufficientDataError as exc:
        log.debug("no blinks on segment %d: %s", signal.segment_id, exc)
        return []

    found = []
    for m1_index, m2_index in pair_flanks(np.sort(neg[neg_blink]), np.sort(pos[pos_blink])):
        blink = _refine(build_blink_window(signal, m1_index, m2_index, d), d)
        if not (blink.m1 < 0 < blink.m2):
            continue
        if blink.ela_start <= blink.ela_min or blink.ela_end <= blink.ela_min:
            continue
        if reject_merged(signal, blink):
            continue
        found.append(blink)

    found.sort(key=lambda b: b.i_start)
    kept: list[Blink] = []
    for blink in found:
        if kept and _overlaps(kept[-1], blink):
            continue
        kept.append(blink)
    return kept


def _slice(series: ElaSeries, a: int, b: int) -> ElaSeries:
    return replace(
        series,
        values=np.asarray(series.values[a:b], dtype=float),
        start_time=series.time_of(a),
        start_index=series.start_index + a,
    )


def sliding_analysis(
    segments: ElaSeries | Sequence[ElaSeries],
    window_span: float = 90.0,
    period: float = 60.0,
    seed: int = 0,
    sigma: float | None = None,
) -> list[AnalysisEpoch]:
    """Periodic blink analysis over a trailing window.

    Every ``period`` seconds of stream time, blinks are detected on the most
    recent ``window_span`` seconds of raw ELA (smoothed per window). A blink
    already reported by an earlier epoch (same steepest-descent frame within
    one frame) is not reported again. Returned blink indices are relative to
    the segment they lie in.
    """
    if isinstance(segments, ElaSeries):
        segments = [segments]
    segments = [s for s in segments if len(s)]
    if window_span < period:
        raise ValueError("window span must be at least the analysis period")
    if not segments:
        return []
    t0 = segments[0].start_time
    stream_end = segments[-1].time_of(len(segments[-1]))
    epochs = []
    seen: list[int] = []
    k = 1
    eps = 1e-9
    while t0 + k * period <= stream_end + eps:
        end = t0 + k * period
        begin = end - window_span
        new = []
        for seg in segments:
            a = max(0, int(np.ceil((begin - seg.start_time) * seg.fps - eps)))
            b = min(len(seg), int(np.ceil((end - seg.start_time) * seg.fps - eps)))
            if b - a < 3:
                continue
            window = _slice(seg, a, b)
            for blink in detect_blinks(gaussian_smooth(window, sigma), seed):
                blink = replace(
                    blink,
                    i_start=blink.i_start + a,
                    i_end=blink.i_end + a,
                    m1_index=blink.m1_index + a,
                    m2_index=blink.m2_index + a,
                    frame_offset=seg.start_index,
                )
                key = blink.frame_offset + blink.m1_index
                if any(abs(key - s) <= 1 for s in seen):
                    continue
                seen.append(key)
                new.append(blink)
        new.sort(key=lambda b: (b.frame_offset, b.i_start))
        epochs.append(AnalysisEpoch(end, window_span, period, new))
        k += 1
    return epochs
