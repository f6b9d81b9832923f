"""Stage wiring shared by the CLI and the evaluation reports."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .blinks import Blink, detect_blinks, sliding_analysis
from .drowsiness import EpochFeatureVector, clip_vectors
from .features import BlinkFeatures, extract_features
from .filtering import ElaSeries, gaussian_smooth


@dataclass(frozen=True)
class Analysis:
    smoothed: list[ElaSeries]
    blinks: list[Blink]
    features: list[tuple[Blink, BlinkFeatures]]


def find_blinks(
    segments: ElaSeries | Sequence[ElaSeries],
    seed: int = 0,
    sigma: float | None = None,
    sliding: bool = False,
) -> tuple[list[ElaSeries], list[Blink]]:
    """Smooth each segment and detect blinks on it.

    With ``sliding`` the blinks come from the periodic trailing-window
    analysis instead of one pass over each whole segment.
    """
    if isinstance(segments, ElaSeries):
        segments = [segments]
    smoothed = [gaussian_smooth(s, sigma) for s in segments]
    if sliding:
        found = [b for epoch in sliding_analysis(segments, seed=seed, sigma=sigma) for b in epoch.blinks]
    else:
        found = [b for s in smoothed for b in detect_blinks(s, seed)]
    found.sort(key=lambda b: (b.segment_id, b.i_start))
    return smoothed, found


def analyze(
    segments: ElaSeries | Sequence[ElaSeries],
    seed: int = 0,
    sigma: float | None = None,
    sliding: bool = False,
    perclos_threshold: float = 20.0,
) -> Analysis:
    """Smoothing, blink detection and per-blink features in one call."""
    smoothed, found = find_blinks(segments, seed, sigma, sliding)
    return Analysis(smoothed, found, extract_features(smoothed, found, perclos_threshold))


def signal_vectors(
    raw: ElaSeries | Sequence[ElaSeries], label: str | None, seed: int = 0, sigma: float | None = None
) -> list[EpochFeatureVector]:
    """Classifier input vectors of one recording, one per blink."""
    result = analyze(raw, seed, sigma)
    return clip_vectors([f for _, f in result.features], label)
