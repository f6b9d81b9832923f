"""Per-blink timing and shape features from tangent intersections."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid

from .blinks import Blink
from .errors import DegenerateBlinkError
from .filtering import ElaSeries

log = logging.getLogger(__name__)

PERCLOS_THRESHOLD = 20.0


@dataclass(frozen=True)
class BlinkFeatures:
    t1: float
    t2: float
    t3: float
    t4: float
    closing_d1: float
    closed_d2: float
    reopening_d3: float
    previous_time: float | None
    amplitude: float
    av_ratio: float
    normal_area: float
    perclos: float
    peropening: float

    def as_dict(self) -> dict:
        return asdict(self)


FEATURE_FIELDS = tuple(f.name for f in fields(BlinkFeatures))


def tangent_intersections(signal: ElaSeries, blink: Blink) -> tuple[float, float, float, float]:
    """Phase boundaries from the steepest-descent and steepest-ascent tangents.

    ``t1``/``t2`` are where the descent tangent crosses the window's start
    level and minimum; ``t3``/``t4`` where the ascent tangent crosses the
    minimum and end level. If the tangents meet above the minimum, ``t2`` and
    ``t3`` collapse to their crossing point.

    Raises:
        DegenerateBlinkError: a tangent is flat or the boundaries are out of order.
    """
    if blink.m1 == 0 or blink.m2 == 0:
        raise DegenerateBlinkError("flat flank tangent")
    v = signal.values
    t_m1, v1 = signal.time_of(blink.m1_index), float(v[blink.m1_index])
    t_m2, v2 = signal.time_of(blink.m2_index), float(v[blink.m2_index])
    t1 = t_m1 + (blink.ela_start - v1) / blink.m1
    t2 = t_m1 + (blink.ela_min - v1) / blink.m1
    t3 = t_m2 + (blink.ela_min - v2) / blink.m2
    t4 = t_m2 + (blink.ela_end - v2) / blink.m2
    if t2 > t3:
        cross = (v2 - v1 + blink.m1 * t_m1 - blink.m2 * t_m2) / (blink.m1 - blink.m2)
        t2 = t3 = min(max(cross, t1), t4)
    if not (t1 <= t2 <= t3 <= t4):
        raise DegenerateBlinkError(f"tangent intersections out of order: {t1}, {t2}, {t3}, {t4}")
    return t1, t2, t3, t4


def _integrate_above(signal: ElaSeries, level: float, a: float, b: float) -> float:
    """Trapezoidal integral of ``signal - level`` over [a, b], linearly interpolating between samples."""
    if b <= a:
        return 0.0
    t = signal.times
    inner = t[(t > a) & (t < b)]
    grid = np.concatenate(([a], inner, [b]))
    return float(trapezoid(np.interp(grid, t, signal.values) - level, grid))


def compute_features(
    signal: ElaSeries,
    blink: Blink,
    previous: tuple[Blink, BlinkFeatures] | None = None,
    perclos_threshold: float = PERCLOS_THRESHOLD,
) -> BlinkFeatures:
    """Feature record of one blink.

    Args:
        signal: the smoothed series the blink was detected on.
        blink: the blink.
        previous: the preceding blink and its features, if any; it sets
            ``previous_time`` and where the PERCLOS count starts.
        perclos_threshold: ELA in degrees below which a frame counts as closed.
    """
    t1, t2, t3, t4 = tangent_intersections(signal, blink)
    d1, d2, d3 = t2 - t1, t3 - t2, t4 - t3
    total = d1 + d2 + d3
    if total <= 0:
        raise DegenerateBlinkError("blink has zero duration")
    rise = blink.ela_end - blink.ela_min
    if rise <= 0 or d3 <= 0:
        raise DegenerateBlinkError("blink has no reopening phase")

    v = np.asarray(signal.values, dtype=float)
    window = v[blink.i_start : blink.i_end + 1]
    top, bottom = float(window.max()), float(window.min())
    amplitude = min(1.0, max(0.0, (top - bottom) / top)) if top > 0 else 0.0

    # area under the reopening phase over twice its duration, clipped to the series
    series_end = signal.time_of(len(v) - 1)
    area = _integrate_above(signal, blink.ela_min, t3, min(t3 + 2 * d3, series_end))

    first = 0
    previous_time = None
    if previous is not None:
        prev_blink, prev_features = previous
        previous_time = t1 - prev_features.t1
        if prev_blink.segment_id == blink.segment_id:
            first = prev_blink.i_end + 1
    span = v[first : blink.i_end + 1]
    perclos = float(np.count_nonzero(span < perclos_threshold) / len(span)) if len(span) else 0.0

    return BlinkFeatures(
        t1=t1,
        t2=t2,
        t3=t3,
        t4=t4,
        closing_d1=d1,
        closed_d2=d2,
        reopening_d3=d3,
        previous_time=previous_time,
        amplitude=amplitude,
        av_ratio=rise / blink.m2,
        normal_area=area / (rise * 2 * d3),
        perclos=perclos,
        peropening=d3 / total,
    )


def extract_features(
    signals: ElaSeries | Sequence[ElaSeries],
    blinks: Sequence[Blink],
    perclos_threshold: float = PERCLOS_THRESHOLD,
) -> list[tuple[Blink, BlinkFeatures]]:
    """Features for a time-ordered blink list, chaining each blink to its predecessor.

    ``signals`` is one smoothed series or a list indexed by ``segment_id``.
    Degenerate blinks are logged and skipped.
    """
    if isinstance(signals, ElaSeries):
        by_segment = {signals.segment_id: signals}
    else:
        by_segment = {s.segment_id: s for s in signals}
    out: list[tuple[Blink, BlinkFeatures]] = []
    for blink in blinks:
        signal = by_segment[blink.segment_id]
        try:
            feats = compute_features(signal, blink, out[-1] if out else None, perclos_threshold)
        except DegenerateBlinkError as exc:
            log.warning("dropping blink at frame %d: %s", blink.frame_window[0], exc)
            continue
        out.append((blink, feats))
    return out
