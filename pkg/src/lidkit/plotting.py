"""PNG figures that accompany the CSV reports.

Figures are rendered with the Agg backend and saved without a software or
date stamp, so the same data always gives the same bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .blinks import Blink  # noqa: E402
from .drowsiness import FEATURE_NAMES  # noqa: E402
from .filtering import ElaSeries  # noqa: E402

_PNG_METADATA = {"Software": None}


def _save(fig, path: str | Path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_METADATA)
    plt.close(fig)


def plot_blinks(path: str | Path, smoothed: Sequence[ElaSeries], blinks: Sequence[Blink]) -> None:
    """Smoothed ELA with detected blink windows shaded."""
    fig, ax = plt.subplots(figsize=(10, 3.5))
    by_segment = {s.segment_id: s for s in smoothed}
    for s in smoothed:
        ax.plot(s.times, s.values, lw=0.8, color="tab:blue")
    for b in blinks:
        s = by_segment[b.segment_id]
        ax.axvspan(s.time_of(b.i_start), s.time_of(b.i_end), color="tab:orange", alpha=0.3, lw=0)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("ELA [deg]")
    ax.set_title(f"{len(blinks)} blinks")
    _save(fig, path)


def plot_detection(path: str | Path, detected, truth, fps: float, da: float) -> None:
    """Detected and labelled windows on two lanes."""
    fig, ax = plt.subplots(figsize=(10, 2.2))
    for lane, windows, color in ((1, truth, "tab:green"), (0, detected, "tab:orange")):
        ax.broken_barh([(a / fps, (b - a + 1) / fps) for a, b in windows], (lane - 0.35, 0.7), color=color)
    ax.set_yticks([0, 1], ["detected", "labelled"])
    ax.set_xlabel("time [s]")
    ax.set_title(f"DA = {da:.1f}%")
    _save(fig, path)


def plot_sweep(path: str | Path, overall: Sequence[dict]) -> None:
    """MAE per set ELA."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar([r["set_ela"] for r in overall], [r["mae"] for r in overall], width=6)
    ax.set_xlabel("set ELA [deg]")
    ax.set_ylabel("MAE [deg]")
    _save(fig, path)


def plot_variance(path: str | Path, sweep: dict) -> None:
    """Measured ELA and EAR over a pose sweep, each relative to its mean."""
    fig, axes = plt.subplots(3, 1, figsize=(8, 6), sharex=True)
    t = sweep["time"]
    axes[0].plot(t, sweep["pitch"], label="pitch")
    axes[0].plot(t, sweep["yaw"], label="yaw")
    axes[0].set_ylabel("pose [deg]")
    axes[0].legend(loc="upper right")
    for ax, label in ((axes[1], "ELA - mean [deg]"), (axes[2], "EAR - mean")):
        v = sweep[label[:3].lower()]
        ax.plot(t, v - np.nanmean(v))
        ax.set_ylabel(label)
    axes[2].set_xlabel("time [s]")
    _save(fig, path)


def plot_fps(path: str | Path, rows: Sequence[dict]) -> None:
    """Mean detected phase durations against frame rate, with the ground-truth means."""
    fig, ax = plt.subplots(figsize=(6, 4))
    fps = [r["fps"] for r in rows]
    for name, truth, color in (
        ("closing_d1", "truth_closing", "tab:blue"),
        ("closed_d2", "truth_closed", "tab:orange"),
        ("reopening_d3", "truth_reopening", "tab:green"),
    ):
        ax.plot(fps, [r[f"mean_{name}"] for r in rows], "o-", color=color, label=name)
        ax.axhline(rows[0][truth], color=color, ls=":", lw=1)
    ax.set_xlabel("frame rate [Hz]")
    ax.set_ylabel("mean duration [s]")
    ax.legend()
    _save(fig, path)


def plot_features(path: str | Path, features) -> None:
    """Histogram of every blink feature."""
    fig, axes = plt.subplots(3, 3, figsize=(9, 7))
    for ax, name in zip(axes.ravel(), FEATURE_NAMES):
        vals = [getattr(f, name) for f in features if getattr(f, name) is not None]
        ax.hist(vals, bins=15)
        ax.set_title(name, fontsize=9)
    _save(fig, path)
