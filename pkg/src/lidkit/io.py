"""Readers and writers for the delimited files exchanged between pipeline stages.

Floats are written with ``repr`` so every file round-trips exactly and
repeated runs are byte-identical. Missing values are empty CSV fields.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, fields
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .blinks import Blink
from .errors import ParseError
from .features import FEATURE_FIELDS, BlinkFeatures
from .filtering import ElaSeries
from .geometry import ElaSample
from .synth import BlinkAnnotation

ELA_COLUMNS = ("timestamp", "ela_left", "ela_right", "ela_combined", "yaw")
BLINK_FIELDS = tuple(f.name for f in fields(Blink))


def fmt(value) -> str:
    """CSV cell text: ``repr`` for floats, empty for ``None`` and NaN."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "" if math.isnan(value) else repr(float(value))
    return str(value)


def write_rows(fp: IO[str], columns: Sequence[str], rows: Iterable[dict]) -> None:
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c)) for c in columns])


def _opt_float(text: str, line: int, name: str) -> float | None:
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"{name} is not a number: {text!r}", line=line, field=name) from None


def _read_csv(path: str | Path, expected: Sequence[str]) -> list[tuple[int, dict]]:
    with open(path, newline="") as fp:
        reader = csv.DictReader(fp)
        missing = [c for c in expected if c not in (reader.fieldnames or [])]
        if missing:
            raise ParseError(f"{path}: missing columns {missing}", line=1, field=missing[0])
        return [(i + 2, row) for i, row in enumerate(reader)]


# -- ELA series ---------------------------------------------------------------


def write_ela_csv(fp: IO[str], timestamps: Sequence[float], samples: Sequence[ElaSample | None]) -> None:
    """One row per frame; frames without a sample keep their timestamp and leave the rest empty."""
    rows = []
    for t, s in zip(timestamps, samples):
        if s is None:
            rows.append({"timestamp": float(t)})
        else:
            rows.append(
                {"timestamp": float(t), "ela_left": s.ela_left, "ela_right": s.ela_right,
                 "ela_combined": s.ela_combined, "yaw": s.yaw}
            )
    write_rows(fp, ELA_COLUMNS, rows)


def write_series_csv(fp: IO[str], series: ElaSeries) -> None:
    """A single synthetic ELA series in the ELA CSV layout (both eyes equal, zero yaw)."""
    samples = [ElaSample(float(t), float(v), float(v), float(v), 0.0) for t, v in zip(series.times, series.values)]
    write_ela_csv(fp, series.times, samples)


def read_ela_csv(path: str | Path) -> tuple[np.ndarray, list[float | None]]:
    """Timestamps and combined ELA (``None`` where missing) from an ELA CSV."""
    rows = _read_csv(path, ELA_COLUMNS)
    t = np.array([_opt_float(r["timestamp"], n, "timestamp") for n, r in rows], dtype=float)
    values = [_opt_float(r["ela_combined"], n, "ela_combined") for n, r in rows]
    return t, values


# -- blinks -------------------------------------------------------------------


def blink_record(blink: Blink, series: ElaSeries, sigma: float) -> dict:
    rec = asdict(blink)
    rec["frame_start"], rec["frame_end"] = blink.frame_window
    rec["t_m1"] = series.time_of(blink.m1_index)
    rec["fps"] = float(series.fps)
    rec["sigma"] = float(sigma)
    return rec


def write_blinks_jsonl(fp: IO[str], records: Iterable[dict]) -> None:
    for rec in records:
        fp.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_blinks_jsonl(path: str | Path) -> tuple[list[Blink], list[dict]]:
    """Blinks and their full records (which also carry ``fps`` and ``sigma``)."""
    blinks, records = [], []
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            blinks.append(Blink(**{k: rec[k] for k in BLINK_FIELDS}))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"{path}: bad blink record ({exc})", line=n) from None
        records.append(rec)
    return blinks, records


# -- features -------------------------------------------------------------------


def write_features_csv(fp: IO[str], features: Iterable[BlinkFeatures]) -> None:
    write_rows(fp, FEATURE_FIELDS, (f.as_dict() for f in features))


def read_features_csv(path: str | Path) -> list[BlinkFeatures]:
    out = []
    for n, row in _read_csv(path, FEATURE_FIELDS):
        values = {name: _opt_float(row[name], n, name) for name in FEATURE_FIELDS}
        absent = [k for k, v in values.items() if v is None and k != "previous_time"]
        if absent:
            raise ParseError(f"{path}: empty {absent[0]}", line=n, field=absent[0])
        out.append(BlinkFeatures(**values))
    return out


# -- ground truth -----------------------------------------------------------------


def write_truth_jsonl(fp: IO[str], annotations: Iterable[BlinkAnnotation]) -> None:
    for a in annotations:
        fp.write(json.dumps(asdict(a), separators=(",", ":")) + "\n")


def read_windows_jsonl(path: str | Path, start: str, end: str) -> list[tuple[int, int]]:
    """Frame windows from a JSONL file of blinks or annotations."""
    out = []
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            out.append((int(rec[start]), int(rec[end])))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: bad window record ({exc})", line=n) from None
    return out
