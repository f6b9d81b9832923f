"""Detection accuracy, ELA reconstruction sweeps, EAR comparison and frame-rate bias reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .drowsiness import FEATURE_NAMES
from .geometry import ela_samples, frame_ear
from .landmarks import EyelidIndexConfig, load_eyelid_config, normalize_frame
from .pipeline import analyze
from .synth import BlinkSchedule, SynthScenario, generate_landmark_sequence, render_schedule

Window = tuple[int, int]


@dataclass(frozen=True)
class DetectionScore:
    tp: int
    fp: int
    fn: int
    labels_hit: int = 0

    @property
    def da(self) -> float:
        """Detection accuracy in percent; 100 when there is nothing to detect and nothing detected."""
        denom = self.tp + self.fn + self.fp
        return 100.0 * self.tp / denom if denom else 100.0

    def as_row(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "labels_hit": self.labels_hit, "da": self.da}


def _check_windows(windows: Sequence[Window], name: str) -> list[Window]:
    out = sorted((int(a), int(b)) for a, b in windows)
    for a, b in out:
        if b < a:
            raise ValueError(f"{name}: window ({a}, {b}) ends before it starts")
    for (a0, b0), (a1, b1) in zip(out, out[1:]):
        # a shared boundary frame is allowed, as between back-to-back blinks
        if a1 < b0:
            raise ValueError(f"{name}: windows ({a0}, {b0}) and ({a1}, {b1}) overlap")
    return out


def _intersects(a: Window, b: Window) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def detection_accuracy(detected: Sequence[Window], ground_truth: Sequence[Window]) -> DetectionScore:
    """Score detected blink windows against labelled ones (inclusive frame ranges).

    A detection that intersects any label is a true positive, so several
    detections inside one long label each count. A label no detection
    touches is a false negative; a detection touching no label is a false
    positive.

    Raises:
        ValueError: windows within one list overlap, or a window is reversed.
    """
    det = _check_windows(detected, "detected")
    gt = _check_windows(ground_truth, "ground truth")
    tp = sum(any(_intersects(d, g) for g in gt) for d in det)
    hit = sum(any(_intersects(g, d) for d in det) for g in gt)
    return DetectionScore(tp=tp, fp=len(det) - tp, fn=len(gt) - hit, labels_hit=hit)


def score_signal(series, annotations, seed: int = 0, sigma: float | None = None, sliding: bool = False) -> DetectionScore:
    """Run smoothing and detection on ``series`` and score it against the annotations."""
    result = analyze(series, seed, sigma, sliding)
    return detection_accuracy(
        [b.frame_window for b in result.blinks], [(a.start_frame, a.end_frame) for a in annotations]
    )


# -- pose sweeps -----------------------------------------------------------------


def pose_sweep(scenario: SynthScenario, set_ela: float, cfg: EyelidIndexConfig | None = None) -> dict:
    """Measured ELA and EAR per frame for a constant lid angle under the scenario's poses.

    Returns:
        Dict of equal-length arrays: ``time``, ``pitch``, ``yaw``, ``ela``, ``ear``.
        Frames where no angle could be measured hold NaN.
    """
    cfg = cfg or load_eyelid_config("compact")
    scenario = replace(scenario, set_ela=float(set_ela))
    frames, truth = generate_landmark_sequence(np.full(scenario.n_frames, float(set_ela)), scenario)
    ela = np.array([np.nan if s is None else s.ela_combined for s in ela_samples(frames, cfg)])
    ear = np.array([frame_ear(normalize_frame(f), cfg) for f in frames])
    return {
        "time": scenario.times,
        "pitch": truth.poses[:, 0],
        "yaw": truth.poses[:, 1],
        "ela": ela,
        "ear": ear,
    }


def ear_ela_variance(scenario: SynthScenario, set_ela: float, cfg: EyelidIndexConfig | None = None) -> tuple[float, float]:
    """Population variance of measured ELA and of EAR over a pose sweep."""
    sweep = pose_sweep(scenario, set_ela, cfg)
    ela = sweep["ela"][np.isfinite(sweep["ela"])]
    return float(np.var(ela)) if len(ela) else math.nan, float(np.var(sweep["ear"]))


SWEEP_COLUMNS = ("set_ela", "pitch_bin", "yaw_bin", "n", "mae", "mse", "var_ela", "var_ear")


@dataclass(frozen=True)
class SweepReport:
    """Per pose-bin rows and one overall row per set ELA (bins empty)."""

    bins: list[dict]
    overall: list[dict]

    def rows(self) -> list[dict]:
        out = []
        for summary in self.overall:
            out.extend(r for r in self.bins if r["set_ela"] == summary["set_ela"])
            out.append(summary)
        return out


def ela_error_sweep(
    set_elas: Sequence[float],
    scenario: SynthScenario,
    bin_width: float = 5.0,
    cfg: EyelidIndexConfig | None = None,
) -> SweepReport:
    """ELA reconstruction error against the set angle, per pose bin and overall.

    Pose bins are ``bin_width`` degrees wide and labelled by their lower edge.
    """
    bins, overall = [], []
    for set_ela in set_elas:
        sweep = pose_sweep(scenario, set_ela, cfg)
        ok = np.isfinite(sweep["ela"])
        err = sweep["ela"][ok] - float(set_ela)
        pitch_bin = np.floor(sweep["pitch"][ok] / bin_width) * bin_width
        yaw_bin = np.floor(sweep["yaw"][ok] / bin_width) * bin_width
        keys = sorted(set(zip(pitch_bin.tolist(), yaw_bin.tolist())))
        for p, y in keys:
            e = err[(pitch_bin == p) & (yaw_bin == y)]
            bins.append({
                "set_ela": float(set_ela), "pitch_bin": p, "yaw_bin": y, "n": len(e),
                "mae": float(np.mean(np.abs(e))), "mse": float(np.mean(e**2)),
            })
        overall.append({
            "set_ela": float(set_ela),
            "n": len(err),
            "mae": float(np.mean(np.abs(err))) if len(err) else math.nan,
            "mse": float(np.mean(err**2)) if len(err) else math.nan,
            "var_ela": float(np.var(sweep["ela"][ok])) if len(err) else math.nan,
            "var_ear": float(np.var(sweep["ear"])),
        })
    return SweepReport(bins, overall)


# -- frame-rate bias ---------------------------------------------------------------


FPS_COLUMNS = (
    ("fps", "n_truth", "n_detected", "truth_closing", "truth_closed", "truth_reopening")
    + tuple(f"mean_{n}" for n in FEATURE_NAMES)
)


def framerate_bias_report(
    schedule: BlinkSchedule,
    fps_list: Sequence[float],
    noise_std: float = 0.0,
    seed: int = 0,
) -> list[dict]:
    """Mean detected features of one blink train rendered at each frame rate.

    Raises:
        ValueError: empty ``fps_list``.
    """
    if len(fps_list) == 0:
        raise ValueError("at least one frame rate is required")
    truth = {
        "truth_closing": float(np.mean([s.closing for _, s in schedule.blinks])) if schedule.blinks else math.nan,
        "truth_closed": float(np.mean([s.closed for _, s in schedule.blinks])) if schedule.blinks else math.nan,
        "truth_reopening": float(np.mean([s.reopening for _, s in schedule.blinks])) if schedule.blinks else math.nan,
    }
    rows = []
    for fps in fps_list:
        series, _ = render_schedule(schedule, fps, noise_std, seed)
        feats = [f for _, f in analyze(series, seed).features]
        row = {"fps": float(fps), "n_truth": len(schedule.blinks), "n_detected": len(feats), **truth}
        for name in FEATURE_NAMES:
            vals = [getattr(f, name) for f in feats if getattr(f, name) is not None]
            row[f"mean_{name}"] = float(np.mean(vals)) if vals else math.nan
        rows.append(row)
    return rows
