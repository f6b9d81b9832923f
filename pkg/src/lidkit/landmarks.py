"""Landmark stream parsing, coordinate normalization and eyelid selection.

A landmark stream holds one record per video frame. Detected frames carry a
flat list of ``(x, y, z_raw)`` triples in detector units (x and y relative to
image width and height) plus the 4x4 inference transform ``T`` (row-major).

Two on-disk layouts are accepted:

* ``jsonl``: one JSON object per line with keys ``frame``, ``t``,
  ``detected``, ``w``, ``h``, ``T`` (16 numbers) and ``lm`` (flat
  ``x, y, z`` sequence). ``T`` and ``lm`` may be omitted for undetected frames.
* ``csv``: header ``frame,t,detected,w,h,T0..T15,x0,y0,z0,x1,...``; the
  landmark count is declared by the header. Undetected rows leave the
  transform and landmark cells empty.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ParseError

Z_SCALE = 1.7
LIDS_PER_EYE = ("upper", "lower")
POINTS_PER_LID = 7

_BASE_CSV_FIELDS = ("frame", "t", "detected", "w", "h")


@dataclass(frozen=True)
class RawLandmarkFrame:
    """One frame as produced by the detector.

    ``landmarks`` has shape (N, 3); it is empty for undetected frames.
    """

    frame_index: int
    timestamp: float
    detected: bool
    landmarks: np.ndarray
    transform: np.ndarray = field(default_factory=lambda: np.eye(4))
    image_width: int = 1
    image_height: int = 1


@dataclass(frozen=True)
class LandmarkFrame:
    """A frame with aspect-corrected y, rescaled z and the extracted head yaw."""

    frame_index: int
    timestamp: float
    detected: bool
    landmarks: np.ndarray
    transform: np.ndarray
    image_width: int
    image_height: int
    yaw: float


@dataclass(frozen=True)
class EyelidIndexConfig:
    """Landmark indices of each lid, ordered inner corner to outer corner.

    ``*_corners`` hold ``(inner, outer)`` canthus indices and are only needed
    for the EAR baseline.
    """

    left_upper: tuple[int, ...]
    left_lower: tuple[int, ...]
    right_upper: tuple[int, ...]
    right_lower: tuple[int, ...]
    left_corners: tuple[int, int] | None = None
    right_corners: tuple[int, int] | None = None
    name: str = ""

    def __post_init__(self):
        for lid in ("left_upper", "left_lower", "right_upper", "right_lower"):
            idx = getattr(self, lid)
            if len(idx) != POINTS_PER_LID:
                raise ValueError(f"{lid}: expected {POINTS_PER_LID} indices, got {len(idx)}")
            if len(set(idx)) != len(idx):
                raise ValueError(f"{lid}: repeated landmark index")
            if any(i < 0 for i in idx):
                raise ValueError(f"{lid}: negative landmark index")

    def all_indices(self) -> list[int]:
        out = [*self.left_upper, *self.left_lower, *self.right_upper, *self.right_lower]
        for corners in (self.left_corners, self.right_corners):
            if corners is not None:
                out.extend(corners)
        return out

    def validate(self, n_landmarks: int) -> None:
        """Raise ``IndexError`` if any index does not exist in an ``n_landmarks`` frame."""
        bad = [i for i in self.all_indices() if i >= n_landmarks]
        if bad:
            raise IndexError(f"landmark index {bad[0]} out of range for {n_landmarks} landmarks")

    @classmethod
    def from_dict(cls, data: dict) -> "EyelidIndexConfig":
        def corners(eye):
            c = data[eye].get("corners")
            return None if c is None else (int(c[0]), int(c[1]))

        return cls(
            left_upper=tuple(int(i) for i in data["left"]["upper"]),
            left_lower=tuple(int(i) for i in data["left"]["lower"]),
            right_upper=tuple(int(i) for i in data["right"]["upper"]),
            right_lower=tuple(int(i) for i in data["right"]["lower"]),
            left_corners=corners("left"),
            right_corners=corners("right"),
            name=data.get("name", ""),
        )

    def to_dict(self) -> dict:
        def eye(upper, lower, c):
            d = {"upper": list(upper), "lower": list(lower)}
            if c is not None:
                d["corners"] = list(c)
            return d

        return {
            "name": self.name,
            "left": eye(self.left_upper, self.left_lower, self.left_corners),
            "right": eye(self.right_upper, self.right_lower, self.right_corners),
        }


class EyelidPoints(NamedTuple):
    """Four (3, 7) point sets, columns ordered inner to outer corner."""

    left_upper: np.ndarray
    left_lower: np.ndarray
    right_upper: np.ndarray
    right_lower: np.ndarray


BUNDLED_CONFIGS = {"mediapipe": "eyelids_mediapipe.json", "compact": "eyelids_compact.json"}


def load_eyelid_config(source: str | Path) -> EyelidIndexConfig:
    """Load an eyelid index config from a JSON file or a bundled name.

    Bundled names are ``mediapipe`` (Face Mesh V2 topology, 478 landmarks)
    and ``compact`` (the 32-landmark layout emitted by :mod:`lidkit.synth`).
    """
    name = str(source)
    if name in BUNDLED_CONFIGS:
        text = resources.files("lidkit").joinpath("data", BUNDLED_CONFIGS[name]).read_text()
    else:
        text = Path(source).read_text()
    return EyelidIndexConfig.from_dict(json.loads(text))


# -- parsing -----------------------------------------------------------------


def _lines(source) -> Iterable[str]:
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    if isinstance(source, str):
        source = io.StringIO(source)
    for raw in source:
        yield raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw


def _as_float(value, line, name):
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ParseError(f"expected a number, got {value!r}", line, name) from None
    return out


def _as_bool(value, line):
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)) and value in (0, 1):
        return bool(value)
    if isinstance(value, str) and value.strip().lower() in ("true", "false", "1", "0"):
        return value.strip().lower() in ("true", "1")
    raise ParseError(f"expected a boolean, got {value!r}", line, "detected")


def _transform(values, line) -> np.ndarray:
    if values is None:
        return np.eye(4)
    if len(values) != 16:
        raise ParseError(f"expected 16 transform entries, got {len(values)}", line, "T")
    return np.array([_as_float(v, line, "T") for v in values], dtype=float).reshape(4, 4)


def _landmarks(values, line) -> np.ndarray:
    if values is None:
        return np.empty((0, 3))
    # nested [[x, y, z], ...] is accepted alongside the flat layout
    if len(values) and isinstance(values[0], (list, tuple)):
        for i, triple in enumerate(values):
            if len(triple) != 3:
                raise ParseError(
                    f"landmark {i} has {len(triple)} coordinates, expected 3 (x, y, z)", line, "lm"
                )
        values = [c for triple in values for c in triple]
    if len(values) % 3:
        raise ParseError(
            f"{len(values)} values is not a whole number of (x, y, z) triples", line, "lm"
        )
    return np.array([_as_float(v, line, "lm") for v in values], dtype=float).reshape(-1, 3)


def _parse_jsonl(source) -> list[tuple[int, RawLandmarkFrame]]:
    out = []
    for lineno, text in enumerate(_lines(source), start=1):
        if not text.strip():
            continue
        try:
            rec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
        if not isinstance(rec, dict):
            raise ParseError("record is not a JSON object", lineno)
        for key in ("frame", "t", "detected"):
            if key not in rec:
                raise ParseError("missing required key", lineno, key)
        detected = _as_bool(rec["detected"], lineno)
        frame = RawLandmarkFrame(
            frame_index=int(_as_float(rec["frame"], lineno, "frame")),
            timestamp=_as_float(rec["t"], lineno, "t"),
            detected=detected,
            landmarks=_landmarks(rec.get("lm"), lineno),
            transform=_transform(rec.get("T"), lineno),
            image_width=int(_as_float(rec.get("w", 1), lineno, "w")),
            image_height=int(_as_float(rec.get("h", 1), lineno, "h")),
        )
        out.append((lineno, frame))
    return out


def _parse_csv(source) -> list[tuple[int, RawLandmarkFrame]]:
    reader = csv.reader(_lines(source))
    try:
        header = next(reader)
    except StopIteration:
        return []
    header = [h.strip() for h in header]
    for name in (*_BASE_CSV_FIELDS, *(f"T{i}" for i in range(16))):
        if name not in header:
            raise ParseError("missing header column", 1, name)
    n = sum(1 for h in header if h.startswith("x") and h[1:].isdigit())
    for i in range(n):
        for axis in "xyz":
            if f"{axis}{i}" not in header:
                raise ParseError("missing header column", 1, f"{axis}{i}")
    col = {h: j for j, h in enumerate(header)}
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} cells, got {len(row)}", lineno)
        detected = _as_bool(row[col["detected"]], lineno)
        t_cells = [row[col[f"T{i}"]] for i in range(16)]
        lm_cells = [row[col[f"{a}{i}"]] for i in range(n) for a in "xyz"]
        if detected:
            transform = _transform(t_cells, lineno)
            lm = np.array([_as_float(v, lineno, "lm") for v in lm_cells]).reshape(-1, 3)
        else:
            transform = np.eye(4) if not all(t_cells) else _transform(t_cells, lineno)
            lm = np.empty((0, 3))
        out.append(
            (
                lineno,
                RawLandmarkFrame(
                    frame_index=int(_as_float(row[col["frame"]], lineno, "frame")),
                    timestamp=_as_float(row[col["t"]], lineno, "t"),
                    detected=detected,
                    landmarks=lm,
                    transform=transform,
                    image_width=int(_as_float(row[col["w"]], lineno, "w")),
                    image_height=int(_as_float(row[col["h"]], lineno, "h")),
                ),
            )
        )
    return out


def parse_landmark_stream(source, format: str = "jsonl") -> list[RawLandmarkFrame]:
    """Parse a landmark stream.

    Args:
        source: bytes, text, or a binary/text file object.
        format: ``"jsonl"`` or ``"csv"``.

    Returns:
        Frames in stream order. Undetected frames are kept with
        ``detected=False`` and an empty landmark array.

    Raises:
        ParseError: on malformed records, non-increasing timestamps, or a
            landmark count that changes between detected frames.
    """
    if format == "jsonl":
        records = _parse_jsonl(source)
    elif format == "csv":
        records = _parse_csv(source)
    else:
        raise ValueError(f"unknown landmark stream format {format!r}")

    frames = []
    n_landmarks = None
    prev_t = -math.inf
    for lineno, frame in records:
        if not math.isfinite(frame.timestamp) or frame.timestamp <= prev_t:
            raise ParseError(f"timestamp {frame.timestamp} is not increasing", lineno, "t")
        prev_t = frame.timestamp
        if frame.detected:
            if len(frame.landmarks) == 0:
                raise ParseError("detected frame without landmarks", lineno, "lm")
            if not np.all(np.isfinite(frame.landmarks)):
                raise ParseError("non-finite landmark coordinate", lineno, "lm")
            if n_landmarks is None:
                n_landmarks = len(frame.landmarks)
            elif len(frame.landmarks) != n_landmarks:
                raise ParseError(
                    f"{len(frame.landmarks)} landmarks, earlier frames had {n_landmarks}",
                    lineno,
                    "lm",
                )
        frames.append(frame)
    return frames


def _json_floats(a: np.ndarray) -> list[float]:
    return [float(v) for v in np.asarray(a, dtype=float).ravel()]


def frame_record(frame: RawLandmarkFrame | LandmarkFrame) -> dict:
    rec = {
        "frame": int(frame.frame_index),
        "t": float(frame.timestamp),
        "detected": bool(frame.detected),
        "w": int(frame.image_width),
        "h": int(frame.image_height),
    }
    if frame.detected:
        rec["T"] = _json_floats(frame.transform)
        rec["lm"] = _json_floats(frame.landmarks)
    if isinstance(frame, LandmarkFrame):
        rec["yaw"] = float(frame.yaw)
    return rec


def write_landmark_stream(frames: Sequence, fp: IO[str], format: str = "jsonl") -> None:
    """Write frames in the JSONL or wide CSV layout read by :func:`parse_landmark_stream`."""
    if format == "jsonl":
        for frame in frames:
            fp.write(json.dumps(frame_record(frame), separators=(",", ":")) + "\n")
        return
    if format != "csv":
        raise ValueError(f"unknown landmark stream format {format!r}")
    n = max((len(f.landmarks) for f in frames if f.detected), default=0)
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(
        [*_BASE_CSV_FIELDS, *(f"T{i}" for i in range(16)), *(f"{a}{i}" for i in range(n) for a in "xyz")]
    )
    for f in frames:
        base = [f.frame_index, repr(float(f.timestamp)), "true" if f.detected else "false", f.image_width, f.image_height]
        if f.detected:
            row = base + [repr(v) for v in _json_floats(f.transform)] + [repr(v) for v in _json_floats(f.landmarks)]
        else:
            row = base + [""] * (16 + 3 * n)
        writer.writerow(row)


# -- normalization -----------------------------------------------------------


def rotation_block(transform: np.ndarray) -> np.ndarray:
    """Nearest proper rotation to the upper-left 3x3 block of ``transform``."""
    u, _, vt = np.linalg.svd(np.asarray(transform, dtype=float)[:3, :3])
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] *= -1
        r = u @ vt
    return r


def yaw_from_transform(transform: np.ndarray) -> float:
    """Rotation about the vertical axis, in radians.

    Uses ``atan2(-R[2,0], hypot(R[2,1], R[2,2]))`` on the orthonormalized
    rotation block, so a pure rotation about y by ``b`` returns ``b``.
    """
    r = rotation_block(transform)
    return math.atan2(-r[2, 0], math.hypot(r[2, 1], r[2, 2]))


def normalize_frame(frame: RawLandmarkFrame, z_scale: float = Z_SCALE) -> LandmarkFrame:
    """Apply aspect correction to y and the depth heuristic to z.

    ``y' = y * h / w`` and ``z' = z_scale * z_raw * T[2][2]``; x is unchanged.
    """
    if not frame.detected:
        raise ValueError(f"frame {frame.frame_index} has no detection")
    if frame.image_width <= 0 or frame.image_height <= 0:
        raise ValueError(f"frame {frame.frame_index}: image dimensions must be positive")
    transform = np.asarray(frame.transform, dtype=float)
    if transform.shape != (4, 4) or not np.all(np.isfinite(transform)):
        raise ValueError(f"frame {frame.frame_index}: transform must be a finite 4x4 matrix")
    lm = np.array(frame.landmarks, dtype=float)
    lm[:, 1] *= frame.image_height / frame.image_width
    lm[:, 2] = z_scale * lm[:, 2] * transform[2, 2]
    return LandmarkFrame(
        frame_index=frame.frame_index,
        timestamp=frame.timestamp,
        detected=True,
        landmarks=lm,
        transform=transform,
        image_width=frame.image_width,
        image_height=frame.image_height,
        yaw=yaw_from_transform(transform),
    )


def detection_ratio(frames: Sequence[RawLandmarkFrame]) -> float:
    """Fraction of frames with a successful face detection."""
    if len(frames) == 0:
        raise ValueError("detection ratio of an empty sequence is undefined")
    return sum(1 for f in frames if f.detected) / len(frames)


def select_eyelids(frame: LandmarkFrame, cfg: EyelidIndexConfig) -> EyelidPoints:
    """Copy the four lid point sets out of ``frame`` as (3, 7) arrays."""
    if not frame.detected:
        raise ValueError(f"frame {frame.frame_index} has no detection")
    cfg.validate(len(frame.landmarks))
    lm = frame.landmarks
    return EyelidPoints(*(lm[list(idx)].T.copy() for idx in (
        cfg.left_upper, cfg.left_lower, cfg.right_upper, cfg.right_lower
    )))


def mean_fps(frames: Sequence[RawLandmarkFrame | LandmarkFrame]) -> float:
    """Mean frame rate of a stream; variable-rate streams are treated as constant at this rate."""
    if len(frames) < 2:
        raise ValueError("need at least two frames to estimate a frame rate")
    span = frames[-1].timestamp - frames[0].timestamp
    return (len(frames) - 1) / span
