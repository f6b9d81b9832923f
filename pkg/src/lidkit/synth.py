"""Ground-truth ELA waveforms and parametric eyelid landmark sequences.

Blink shapes are drawn from state-conditional distributions kept in a config
file (see ``data/blink_params_example.json``); nothing here hardcodes blink
statistics. All randomness comes from ``numpy.random.default_rng`` seeded by
the scenario seed, with separate streams for the blink schedule, the signal
noise and the landmark jitter so the same schedule can be rendered at any
frame rate.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import InsufficientDataError
from .filtering import ElaSeries
from .landmarks import RawLandmarkFrame, Z_SCALE

STATES = ("alert", "drowsy")

# closed-phase sag above the minimum, as a fraction of the blink amplitude
CLOSED_SAG = 0.03
# the reopening line hands over to an ease-out this far below baseline
TAIL_FRACTION = 0.1
MIN_GAP = 0.3
MAX_REDRAWS = 100

# parametric eye model, in model units (interocular distance 1.0)
EYE_HALF_WIDTH = 0.15
EYE_FORWARD = 0.6
UPPER_BULGE = 0.06
LOWER_BULGE = 0.045
LOWER_LID_TILT = 20.0
IMAGE_SCALE = 0.15
CAMERA_DISTANCE = 8.0
N_COMPACT_LANDMARKS = 32
MAX_POSE = 89.0


@dataclass(frozen=True)
class Dist:
    """Normal distribution truncated to [low, high]."""

    mean: float
    std: float = 0.0
    low: float = -math.inf
    high: float = math.inf

    def __post_init__(self):
        if self.std < 0 or self.low > self.high or not (self.low <= self.mean <= self.high):
            raise ValueError(f"invalid distribution {self}")

    def sample(self, rng: np.random.Generator) -> float:
        if self.std == 0:
            return self.mean
        for _ in range(10_000):
            x = rng.normal(self.mean, self.std)
            if self.low <= x <= self.high:
                return float(x)
        raise InsufficientDataError(f"could not sample inside [{self.low}, {self.high}]")

    @classmethod
    def from_config(cls, value) -> "Dist":
        if isinstance(value, (int, float)):
            return cls(float(value), 0.0, float(value), float(value))
        return cls(
            float(value["mean"]),
            float(value.get("std", 0.0)),
            float(value.get("low", -math.inf)),
            float(value.get("high", math.inf)),
        )


@dataclass(frozen=True)
class BlinkShapeParams:
    """Distributions of one state's blink shape and inter-blink interval (seconds, degrees)."""

    state: str
    baseline_ela: Dist
    min_ela: Dist
    closing_duration: Dist
    closed_duration: Dist
    reopening_duration: Dist
    inter_blink_interval: Dist

    def __post_init__(self):
        if self.state not in STATES:
            raise ValueError(f"unknown state {self.state!r}")
        for name in ("closing_duration", "reopening_duration", "inter_blink_interval"):
            if getattr(self, name).low <= 0:
                raise ValueError(f"{name}: truncation bounds must be positive")
        if self.closed_duration.low < 0:
            raise ValueError("closed_duration: truncation bounds must be non-negative")
        if self.min_ela.high >= self.baseline_ela.low:
            raise ValueError("min_ela must stay below baseline_ela")

    @classmethod
    def from_config(cls, state: str, data: dict) -> "BlinkShapeParams":
        return cls(state=state, **{k: Dist.from_config(data[k]) for k in (
            "baseline_ela", "min_ela", "closing_duration", "closed_duration",
            "reopening_duration", "inter_blink_interval",
        )})


def load_blink_params(source: str | Path | dict = "example") -> dict[str, BlinkShapeParams]:
    """Per-state blink parameters from a JSON file, an inline dict, or ``"example"``."""
    if isinstance(source, dict):
        data = source
    elif str(source) == "example":
        data = json.loads(resources.files("lidkit").joinpath("data", "blink_params_example.json").read_text())
    else:
        data = json.loads(Path(source).read_text())
    return {s: BlinkShapeParams.from_config(s, data[s]) for s in STATES if s in data}


@dataclass(frozen=True)
class BlinkShape:
    """One concrete blink. Durations in seconds, angles in degrees."""

    closing: float
    closed: float
    reopening: float
    baseline: float
    min_ela: float

    @property
    def amplitude(self) -> float:
        return self.baseline - self.min_ela

    @property
    def support(self) -> float:
        """Time from onset until the signal is back at baseline."""
        return self.closing + self.closed + self.reopening * (1 + TAIL_FRACTION)


def _clamped_slope(slope: float, secant: float) -> float:
    # Fritsch-Carlson bound keeps the Hermite piece monotone
    return math.copysign(min(abs(slope), 3 * abs(secant)), secant) if secant else 0.0


def blink_profile(tau, shape: BlinkShape) -> np.ndarray:
    """ELA of a single blink at times ``tau`` after onset.

    Linear closing and reopening flanks whose extensions hit the minimum at
    ``closing`` and ``closing + closed`` and the baseline at onset and at
    ``closing + closed + reopening``; a monotone cubic through the closed
    phase touches ``min_ela``; a monotone ease-out returns to baseline.
    """
    tau = np.asarray(tau, dtype=float)
    b, m = shape.baseline, shape.min_ela
    a = b - m
    d1, d2, d3 = shape.closing, shape.closed, shape.reopening
    s_close, s_open = -a / d1, a / d3
    sag = CLOSED_SAG * a
    c0 = d1 * (1 - CLOSED_SAG)
    c1 = d1 + d2 + d3 * CLOSED_SAG
    mid = 0.5 * (c0 + c1)
    half = mid - c0
    trough = CubicHermiteSpline(
        [c0, mid, c1],
        [m + sag, m, m + sag],
        [_clamped_slope(s_close, -sag / half), 0.0, _clamped_slope(s_open, sag / half)],
    )
    q = TAIL_FRACTION * a
    tq = d1 + d2 + d3 - q / s_open
    te = tq + 2 * q / s_open
    tail = CubicHermiteSpline([tq, te], [b - q, b], [s_open, 0.0])

    out = np.full(tau.shape, b, dtype=float)
    closing = (tau > 0) & (tau < c0)
    out[closing] = b + s_close * tau[closing]
    closed = (tau >= c0) & (tau <= c1)
    out[closed] = trough(tau[closed])
    opening = (tau > c1) & (tau < tq)
    out[opening] = m + s_open * (tau[opening] - (d1 + d2))
    ease = (tau >= tq) & (tau < te)
    out[ease] = tail(tau[ease])
    return out


def generate_blink_waveform(shape: BlinkShape, fps: float, pad: float = 0.1) -> tuple[ElaSeries, BlinkShape]:
    """Sample one blink on the grid ``k / fps`` with ``pad`` seconds of baseline on each side.

    The onset sits at t = 0, so grids of different rates share sample times.
    """
    if min(shape.closing, shape.reopening) < 1.0 / fps or 0 < shape.closed < 1.0 / fps:
        warnings.warn("blink phase shorter than one frame; waveform is under-resolved", stacklevel=2)
    k0 = -math.ceil(pad * fps - 1e-9)
    k1 = math.ceil((shape.support + pad) * fps - 1e-9)
    t = np.arange(k0, k1 + 1) / fps
    return ElaSeries(blink_profile(t, shape), fps, start_time=float(t[0])), shape


@dataclass(frozen=True)
class SynthScenario:
    duration: float
    fps: float
    noise_std: float = 0.0
    seed: int = 0
    state: str = "alert"
    pose_keyframes: tuple[tuple[float, float, float], ...] = ()  # (time s, pitch deg, yaw deg)
    set_ela: float | None = None
    landmark_jitter: float = 0.0
    projection: str = "orthographic"
    image_size: tuple[int, int] = (1280, 720)
    blink_params: object = "example"

    def __post_init__(self):
        if not self.fps > 0 or not self.duration > 0:
            raise ValueError("duration and fps must be positive")
        for t, _, _ in self.pose_keyframes:
            if not 0 <= t <= self.duration:
                raise ValueError(f"pose keyframe time {t} outside [0, {self.duration}]")
        if self.projection not in ("orthographic", "perspective"):
            raise ValueError(f"unknown projection {self.projection!r}")

    @property
    def n_frames(self) -> int:
        return int(round(self.duration * self.fps))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_frames) / self.fps

    def params(self) -> BlinkShapeParams:
        return load_blink_params(self.blink_params)[self.state]


def bundled_scenarios() -> list[str]:
    """Names of the scenario files shipped with the package."""
    data = resources.files("lidkit") / "data"
    return sorted(p.name[len("scenario_") : -len(".json")] for p in data.iterdir() if p.name.startswith("scenario_"))


def load_scenario(path: str | Path, **overrides) -> SynthScenario:
    """Read a scenario JSON file; relative ``blink_params`` paths resolve against it.

    A bare name such as ``yaw_sweep`` that is not an existing file selects a
    bundled scenario.
    """
    path = Path(path)
    if not path.exists() and str(path) in bundled_scenarios():
        path = Path(str(resources.files("lidkit") / "data" / f"scenario_{path}.json"))
    data = json.loads(path.read_text())
    params = data.get("blink_params", "example")
    if isinstance(params, str) and params != "example" and not Path(params).is_absolute():
        params = str(path.parent / params)
    kw = dict(
        duration=float(data["duration"]),
        fps=float(data["fps"]),
        noise_std=float(data.get("noise_std", 0.0)),
        seed=int(data.get("seed", 0)),
        state=data.get("state", "alert"),
        pose_keyframes=tuple(tuple(float(v) for v in k) for k in data.get("pose_keyframes", [])),
        set_ela=None if data.get("set_ela") is None else float(data["set_ela"]),
        landmark_jitter=float(data.get("landmark_jitter", 0.0)),
        projection=data.get("projection", "orthographic"),
        image_size=tuple(int(v) for v in data.get("image_size", (1280, 720))),
        blink_params=params,
    )
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return SynthScenario(**kw)


@dataclass(frozen=True)
class BlinkAnnotation:
    start_frame: int
    end_frame: int
    closing: float
    closed: float
    reopening: float
    onset: float
    label: str = "blink"


@dataclass(frozen=True)
class GroundTruth:
    true_ela: np.ndarray
    annotations: list[BlinkAnnotation] = field(default_factory=list)
    state: str | None = None
    poses: np.ndarray | None = None  # (n, 2) pitch, yaw in degrees


@dataclass(frozen=True)
class BlinkSchedule:
    """A rate-independent blink train: baseline plus (onset, shape) pairs."""

    duration: float
    baseline: float
    blinks: tuple[tuple[float, BlinkShape], ...]
    state: str | None = None


def sample_schedule(params: BlinkShapeParams, duration: float, seed: int) -> BlinkSchedule:
    """Draw blink onsets and shapes for ``duration`` seconds.

    Raises:
        InsufficientDataError: no admissible inter-blink interval after 100 draws.
    """
    rng = np.random.default_rng([seed, 0])
    baseline = params.baseline_ela.sample(rng)
    onset = 0.5 + rng.uniform() * params.inter_blink_interval.mean
    blinks = []
    while True:
        min_ela = min(params.min_ela.sample(rng), baseline - 1.0)
        shape = BlinkShape(
            closing=params.closing_duration.sample(rng),
            closed=params.closed_duration.sample(rng),
            reopening=params.reopening_duration.sample(rng),
            baseline=baseline,
            min_ela=min_ela,
        )
        if onset + shape.support > duration - 0.2:
            break
        blinks.append((onset, shape))
        for _ in range(MAX_REDRAWS):
            interval = params.inter_blink_interval.sample(rng)
            if interval > shape.support + MIN_GAP:
                break
        else:
            raise InsufficientDataError("inter-blink interval distribution keeps producing overlapping blinks")
        onset += interval
    return BlinkSchedule(duration, baseline, tuple(blinks), params.state)


def render_schedule(
    schedule: BlinkSchedule, fps: float, noise_std: float = 0.0, seed: int = 0
) -> tuple[ElaSeries, GroundTruth]:
    """Sample a blink train at ``fps`` and add zero-mean Gaussian noise."""
    n = int(round(schedule.duration * fps))
    t = np.arange(n) / fps
    clean = np.full(n, schedule.baseline, dtype=float)
    notes = []
    for onset, shape in schedule.blinks:
        a = max(0, int(math.floor(onset * fps)))
        b = min(n - 1, int(math.ceil((onset + shape.support) * fps)))
        clean[a : b + 1] = blink_profile(t[a : b + 1] - onset, shape)
        notes.append(BlinkAnnotation(a, b, shape.closing, shape.closed, shape.reopening, onset))
    values = clean.copy()
    if noise_std > 0:
        values += np.random.default_rng([seed, 1]).normal(0.0, noise_std, n)
    return ElaSeries(values, fps), GroundTruth(clean, notes, schedule.state)


def generate_ela_signal(
    params: BlinkShapeParams | None, scenario: SynthScenario
) -> tuple[ElaSeries, GroundTruth]:
    """ELA signal for ``scenario``; a constant one if ``scenario.set_ela`` is given."""
    if scenario.set_ela is not None:
        clean = np.full(scenario.n_frames, float(scenario.set_ela))
        values = clean.copy()
        if scenario.noise_std > 0:
            values += np.random.default_rng([scenario.seed, 1]).normal(0.0, scenario.noise_std, len(values))
        return ElaSeries(values, scenario.fps), GroundTruth(clean, [], scenario.state)
    params = params if params is not None else scenario.params()
    schedule = sample_schedule(params, scenario.duration, scenario.seed)
    return render_schedule(schedule, scenario.fps, scenario.noise_std, scenario.seed)


# -- landmark geometry --------------------------------------------------------


def _rot_x(deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def _rot_y(deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def head_rotation(pitch: float, yaw: float) -> np.ndarray:
    """Yaw about the vertical axis applied after pitch about the horizontal axis."""
    return _rot_y(yaw) @ _rot_x(pitch)


def eye_model(ela: float) -> np.ndarray:
    """Canonical head-frame landmarks (32, 3) for a given lid angle in degrees.

    Axes: x to the viewer's right, y up, z toward the camera. Per eye the
    layout is 7 upper-lid points, 7 lower-lid points, inner corner, outer
    corner (left eye first, matching the ``compact`` eyelid config). Each lid
    is an arc hinged on the corner-to-corner axis; the angle between the two
    arc planes equals ``ela``.
    """
    u = np.linspace(-1.0, 1.0, 9)[1:-1]
    lower_dir = np.array([0.0, -math.sin(math.radians(LOWER_LID_TILT)), math.cos(math.radians(LOWER_LID_TILT))])
    upper_tilt = math.radians(ela - LOWER_LID_TILT)
    upper_dir = np.array([0.0, math.sin(upper_tilt), math.cos(upper_tilt)])
    pts = []
    # subject's left eye sits on the viewer's right; inner corners face the nose
    for centre_x, inward in ((0.5, -1.0), (-0.5, 1.0)):
        centre = np.array([centre_x, 0.0, EYE_FORWARD])
        axis = np.array([-inward, 0.0, 0.0])  # inner -> outer
        along = centre + np.outer(u * EYE_HALF_WIDTH, axis)
        bulge = 1 - u**2
        pts.extend(along + np.outer(UPPER_BULGE * bulge, upper_dir))
        pts.extend(along + np.outer(LOWER_BULGE * bulge, lower_dir))
        pts.append(centre - EYE_HALF_WIDTH * axis)
        pts.append(centre + EYE_HALF_WIDTH * axis)
    return np.array(pts)


def interpolate_poses(keyframes: Sequence[tuple[float, float, float]], times: np.ndarray) -> np.ndarray:
    """Linear (pitch, yaw) interpolation between keyframes; identity pose without keyframes."""
    if not keyframes:
        return np.zeros((len(times), 2))
    k = np.array(sorted(keyframes), dtype=float)
    return np.column_stack([np.interp(times, k[:, 0], k[:, 1]), np.interp(times, k[:, 0], k[:, 2])])


def _to_image(points: np.ndarray, rot: np.ndarray, projection: str, width: int, height: int) -> np.ndarray:
    """Detector-style raw landmarks for head-frame points under rotation ``rot``."""
    cam = points @ rot.T
    x, y, z = cam[:, 0], cam[:, 1], cam[:, 2]
    if projection == "perspective":
        f = CAMERA_DISTANCE / (CAMERA_DISTANCE - z)
        x, y = x * f, y * f
    aspect = height / width
    x_img = 0.5 + IMAGE_SCALE * x
    # image y grows downward and is stored relative to height
    y_img = (0.5 * aspect - IMAGE_SCALE * y) / aspect
    z_norm = -IMAGE_SCALE * z
    z_raw = z_norm / (Z_SCALE * rot[2, 2])
    return np.column_stack([x_img, y_img, z_raw])


def generate_landmark_sequence(
    true_ela: Sequence[float], scenario: SynthScenario
) -> tuple[list[RawLandmarkFrame], GroundTruth]:
    """Pose the eye model frame by frame and emit it as a landmark stream.

    The transform of each frame carries the head rotation, so normalizing the
    stream recovers the posed geometry exactly (orthographic projection) and
    the yaw can be read back from it.

    Raises:
        ValueError: ELA outside [0, 90] degrees or a pose beyond 89 degrees.
    """
    ela = np.asarray(true_ela, dtype=float)
    if np.any(ela < 0) or np.any(ela > 90):
        raise ValueError("true ELA must lie in [0, 90] degrees")
    times = np.arange(len(ela)) / scenario.fps
    poses = interpolate_poses(scenario.pose_keyframes, times)
    if np.any(np.abs(poses) > MAX_POSE):
        raise ValueError(f"head pose beyond +/-{MAX_POSE} degrees")
    rng = np.random.default_rng([scenario.seed, 2])
    width, height = scenario.image_size
    frames = []
    for i, (value, (pitch, yaw)) in enumerate(zip(ela, poses)):
        rot = head_rotation(pitch, yaw)
        pts = eye_model(value)
        if scenario.landmark_jitter > 0:
            pts = pts + rng.normal(0.0, scenario.landmark_jitter, pts.shape)
        transform = np.eye(4)
        transform[:3, :3] = rot
        transform[:3, 3] = (0.0, 0.0, -CAMERA_DISTANCE)
        frames.append(
            RawLandmarkFrame(
                frame_index=i,
                timestamp=float(times[i]),
                detected=True,
                landmarks=_to_image(pts, rot, scenario.projection, width, height),
                transform=transform,
                image_width=width,
                image_height=height,
            )
        )
    return frames, GroundTruth(ela.copy(), [], scenario.state, poses)


# -- animation curves ----------------------------------------------------------


def export_animation_curve(signal: ElaSeries, path: str | Path) -> None:
    """Write ``time_s,ela_deg`` keyframes; values are written with full precision."""
    with open(path, "w", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["time_s", "ela_deg"])
        for t, v in zip(signal.times, signal.values):
            writer.writerow([repr(float(t)), repr(float(v))])


def read_animation_curve(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fp:
        reader = csv.reader(fp)
        header = next(reader)
        if header != ["time_s", "ela_deg"]:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = [(float(a), float(b)) for a, b in reader]
    if not rows:
        return np.empty(0), np.empty(0)
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1]
