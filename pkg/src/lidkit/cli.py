"""``lidkit`` command line: ingest, ELA, blinks, features, drowsiness, synthesis and evaluation.

Exit codes: 0 success, 1 invalid input or arguments, 2 a ``--assert`` check failed.
Diagnostics go to stderr; data goes to the named files or stdout.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, plotting
from .drowsiness import (
    LABELS,
    clip_vectors,
    cross_validate,
    fit,
    load_model,
    predict,
    save_model,
)
from .errors import LidkitError
from .evaluation import (
    FPS_COLUMNS,
    SWEEP_COLUMNS,
    detection_accuracy,
    ela_error_sweep,
    framerate_bias_report,
    pose_sweep,
)
from .features import extract_features
from .filtering import ElaSeries, gaussian_smooth, series_from_samples, smoothing_sigma
from .geometry import ela_samples
from .io import (
    blink_record,
    fmt,
    read_blinks_jsonl,
    read_ela_csv,
    read_features_csv,
    read_windows_jsonl,
    write_blinks_jsonl,
    write_ela_csv,
    write_features_csv,
    write_rows,
    write_series_csv,
    write_truth_jsonl,
)
from .landmarks import (
    EyelidIndexConfig,
    detection_ratio,
    load_eyelid_config,
    mean_fps,
    normalize_frame,
    parse_landmark_stream,
    write_landmark_stream,
)
from .pipeline import find_blinks
from .synth import (
    export_animation_curve,
    generate_ela_signal,
    generate_landmark_sequence,
    load_scenario,
    render_schedule,
    sample_schedule,
)

log = logging.getLogger("lidkit")

MEDIAPIPE_LANDMARKS = 468


class UsageError(LidkitError):
    pass


class AssertionFailed(LidkitError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- helpers ------------------------------------------------------------------------


def _existing(path: str | None, what: str) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


def _out_dir_ok(path: str) -> Path:
    p = Path(path)
    if p.parent and not p.parent.exists():
        raise UsageError(f"output directory does not exist: {p.parent}")
    return p


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _eyelid_config(name: str, frames) -> EyelidIndexConfig:
    if name != "auto":
        return load_eyelid_config(name)
    n = max((len(f.landmarks) for f in frames if f.detected), default=0)
    return load_eyelid_config("mediapipe" if n >= MEDIAPIPE_LANDMARKS else "compact")


def _read_stream(args):
    path = _existing(args.inp, "landmark stream")
    with open(path, newline="") as fp:
        return parse_landmark_stream(fp, args.format)


def _segments(ela_path: Path, fps: float | None) -> list[ElaSeries]:
    t, values = read_ela_csv(ela_path)
    return series_from_samples(t, values, fps)


# -- stages --------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    frames = _read_stream(args)
    cfg = _eyelid_config(args.eyelid_config, frames)
    n = max((len(f.landmarks) for f in frames if f.detected), default=0)
    if n:
        cfg.validate(n)
    normalized = [normalize_frame(f, args.z_scale) if f.detected else f for f in frames]
    if args.out:
        with open(_out_dir_ok(args.out), "w", newline="") as fp:
            write_landmark_stream(normalized, fp, "jsonl")
    summary = {
        "frames": len(frames),
        "detected": sum(f.detected for f in frames),
        "detection_ratio": detection_ratio(frames),
        "fps": mean_fps(frames) if len(frames) > 1 else None,
        "landmarks": n,
    }
    write_rows(sys.stdout, list(summary), [summary])
    return 0


def cmd_ela(args) -> int:
    frames = _read_stream(args)
    cfg = _eyelid_config(args.eyelid_config, frames)
    samples = ela_samples(frames, cfg, args.z_scale)
    with open(_out_dir_ok(args.out), "w", newline="") as fp:
        write_ela_csv(fp, [f.timestamp for f in frames], samples)
    log.info("ELA for %d of %d frames", sum(s is not None for s in samples), len(frames))
    return 0


def cmd_blinks(args) -> int:
    segments = _segments(_existing(args.inp, "ELA file"), args.fps)
    out = _out_dir_ok(args.out)
    smoothed, blinks = find_blinks(segments, args.seed, args.smooth_sigma_override, args.sliding)
    by_segment = {s.segment_id: s for s in smoothed}
    with open(out, "w") as fp:
        write_blinks_jsonl(
            fp,
            (
                blink_record(b, by_segment[b.segment_id], args.smooth_sigma_override or smoothing_sigma(by_segment[b.segment_id].fps))
                for b in blinks
            ),
        )
    if args.figure:
        plotting.plot_blinks(args.figure, smoothed, blinks)
    log.info("%d blinks in %d segments", len(blinks), len(segments))
    return 0


def cmd_features(args) -> int:
    blinks, records = read_blinks_jsonl(_existing(args.blinks, "blink file"))
    fps = args.fps or (records[0]["fps"] if records else None)
    segments = _segments(_existing(args.ela, "ELA file"), fps)
    sigma = args.smooth_sigma_override or (records[0]["sigma"] if records else None)
    smoothed = [gaussian_smooth(s, sigma) for s in segments]
    known = {s.segment_id for s in smoothed}
    for b in blinks:
        if b.segment_id not in known:
            raise UsageError(f"blink refers to segment {b.segment_id}, absent from the ELA file")
    feats = extract_features(smoothed, blinks, args.perclos_threshold)
    with open(_out_dir_ok(args.out), "w", newline="") as fp:
        write_features_csv(fp, (f for _, f in feats))
    if args.figure:
        plotting.plot_features(args.figure, [f for _, f in feats])
    return 0


def cmd_pipeline(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    common = dict(format=args.format, eyelid_config=args.eyelid_config, z_scale=args.z_scale)
    cmd_ela(argparse.Namespace(inp=args.inp, out=str(out / "ela.csv"), **common))
    cmd_blinks(
        argparse.Namespace(
            inp=str(out / "ela.csv"), out=str(out / "blinks.jsonl"), fps=args.fps, seed=args.seed,
            sliding=args.sliding, smooth_sigma_override=args.smooth_sigma_override, figure=None,
        )
    )
    cmd_features(
        argparse.Namespace(
            blinks=str(out / "blinks.jsonl"), ela=str(out / "ela.csv"), out=str(out / "features.csv"),
            fps=args.fps, smooth_sigma_override=args.smooth_sigma_override,
            perclos_threshold=args.perclos_threshold, figure=None,
        )
    )
    return 0


# -- drowsiness -------------------------------------------------------------------------


def _labelled_vectors(labels_path: Path, clip: float):
    vectors, subjects = [], []
    with open(labels_path, newline="") as fp:
        reader = csv.DictReader(fp)
        need = {"features", "label"}
        if not need <= set(reader.fieldnames or []):
            raise UsageError(f"{labels_path}: needs columns features,label[,subject]")
        for n, row in enumerate(reader, start=2):
            if row["label"] not in LABELS:
                raise UsageError(f"{labels_path}: line {n}: unknown label {row['label']!r}")
            feats = read_features_csv(_existing(str(labels_path.parent / row["features"]), "features file"))
            vecs = clip_vectors(feats, row["label"], clip)
            vectors.extend(vecs)
            subjects.extend([row.get("subject") or row["features"]] * len(vecs))
    return vectors, subjects


def cmd_drowsy_fit(args) -> int:
    vectors, _ = _labelled_vectors(_existing(args.labels, "labels file"), args.clip)
    model = fit(vectors, k=args.k, n_components=args.components)
    save_model(model, _out_dir_ok(args.model))
    log.info("model fitted on %d vectors", len(vectors))
    return 0


def cmd_drowsy_predict(args) -> int:
    model = load_model(_existing(args.model, "model file"))
    feats = read_features_csv(_existing(args.features, "features file"))
    rows = [
        {"epoch_end_time": v.epoch_end_time, "blink_count": v.blink_count, "label": predict(model, v)}
        for v in clip_vectors(feats, None, args.clip)
    ]
    columns = ("epoch_end_time", "blink_count", "label")
    if args.out:
        with open(_out_dir_ok(args.out), "w", newline="") as fp:
            write_rows(fp, columns, rows)
    else:
        write_rows(sys.stdout, columns, rows)
    return 0


def cmd_drowsy_cv(args) -> int:
    vectors, subjects = _labelled_vectors(_existing(args.labels, "labels file"), args.clip)
    result = cross_validate(vectors, subjects, args.folds, args.k, args.components)
    rows = [
        {"fold": i, "subjects": " ".join(s), "accuracy": a}
        for i, (s, a) in enumerate(zip(result.fold_subjects, result.fold_accuracies))
    ]
    rows.append({"fold": "mean", "accuracy": result.mean_accuracy})
    columns = ("fold", "subjects", "accuracy")
    if args.out:
        with open(_out_dir_ok(args.out), "w", newline="") as fp:
            write_rows(fp, columns, rows)
    else:
        write_rows(sys.stdout, columns, rows)
    return 0


# -- synthesis ----------------------------------------------------------------------------


def _scenario(args):
    return load_scenario(
        args.config,
        seed=args.seed,
        fps=getattr(args, "fps", None),
        duration=getattr(args, "duration", None),
        state=getattr(args, "state", None),
        noise_std=getattr(args, "noise", None),
    )


def cmd_synth_signal(args) -> int:
    scenario = _scenario(args)
    series, truth = generate_ela_signal(None, scenario)
    with open(_out_dir_ok(args.out), "w", newline="") as fp:
        write_series_csv(fp, series)
    if args.truth:
        with open(_out_dir_ok(args.truth), "w") as fp:
            write_truth_jsonl(fp, truth.annotations)
    return 0


def cmd_synth_landmarks(args) -> int:
    scenario = _scenario(args)
    series, truth = generate_ela_signal(None, scenario)
    # the rendered lid follows the clean angle; noise enters through landmark jitter
    frames, _ = generate_landmark_sequence(np.clip(truth.true_ela, 0.0, 90.0), scenario)
    with open(_out_dir_ok(args.out), "w", newline="") as fp:
        write_landmark_stream(frames, fp, args.format)
    if args.truth:
        with open(_out_dir_ok(args.truth), "w") as fp:
            write_truth_jsonl(fp, truth.annotations)
    return 0


def cmd_synth_curve(args) -> int:
    scenario = _scenario(args)
    series, truth = generate_ela_signal(None, scenario)
    export_animation_curve(series.with_values(truth.true_ela), _out_dir_ok(args.out))
    return 0


# -- evaluation ----------------------------------------------------------------------------


def _check(ok: bool, enabled: bool, message: str) -> None:
    if enabled and not ok:
        raise AssertionFailed(message)
    if enabled:
        log.info("check passed: %s", message)


def cmd_eval_da(args) -> int:
    out = _out_dir_ok(args.out)
    if args.blinks or args.truth:
        if not (args.blinks and args.truth):
            raise UsageError("--blinks and --truth go together")
        detected = read_windows_jsonl(_existing(args.blinks, "blink file"), "frame_start", "frame_end")
        labelled = read_windows_jsonl(_existing(args.truth, "annotation file"), "start_frame", "end_frame")
        fps = args.fps or 30.0
    else:
        scenario = _scenario(args)
        schedule = sample_schedule(scenario.params(), scenario.duration, scenario.seed)
        series, truth = render_schedule(schedule, scenario.fps, scenario.noise_std, scenario.seed)
        _, blinks = find_blinks(series, scenario.seed, args.smooth_sigma_override, args.sliding)
        detected = [b.frame_window for b in blinks]
        labelled = [(a.start_frame, a.end_frame) for a in truth.annotations]
        fps = scenario.fps
    score = detection_accuracy(detected, labelled)
    with open(out, "w", newline="") as fp:
        write_rows(fp, ("tp", "fp", "fn", "labels_hit", "da"), [score.as_row()])
    if not args.no_figure:
        plotting.plot_detection(out.with_suffix(".png"), detected, labelled, fps, score.da)
    _check(score.da >= args.min_da, args.check, f"DA {score.da:.2f}% >= {args.min_da}%")
    return 0


def cmd_eval_sweep(args) -> int:
    out = _out_dir_ok(args.out)
    scenario = _scenario(args)
    report = ela_error_sweep(_floats(args.set_elas), scenario, args.bin_width)
    with open(out, "w", newline="") as fp:
        write_rows(fp, SWEEP_COLUMNS, report.rows())
    if not args.no_figure:
        plotting.plot_sweep(out.with_suffix(".png"), report.overall)
    worst = max(r["mae"] for r in report.overall)
    _check(worst < args.max_mae, args.check, f"worst MAE {worst:.4g} deg < {args.max_mae}")
    return 0


def cmd_eval_variance(args) -> int:
    out = _out_dir_ok(args.out)
    scenario = _scenario(args)
    set_ela = args.set_ela if args.set_ela is not None else (scenario.set_ela if scenario.set_ela is not None else 60.0)
    sweep = pose_sweep(scenario, set_ela)
    ela = sweep["ela"][np.isfinite(sweep["ela"])]
    var_ela, var_ear = float(np.var(ela)), float(np.var(sweep["ear"]))
    with open(out, "w", newline="") as fp:
        write_rows(fp, ("set_ela", "frames", "var_ela", "var_ear"), [
            {"set_ela": float(set_ela), "frames": len(sweep["ear"]), "var_ela": var_ela, "var_ear": var_ear}
        ])
    if not args.no_figure:
        plotting.plot_variance(out.with_suffix(".png"), sweep)
    _check(var_ela < var_ear, args.check, f"ELA variance {var_ela:.3g} < EAR variance {var_ear:.3g}")
    return 0


def cmd_eval_fps(args) -> int:
    out = _out_dir_ok(args.out)
    scenario = _scenario(args)
    rates = sorted(_floats(args.fps_list))
    if not rates:
        raise UsageError("--fps-list is empty")
    schedule = sample_schedule(scenario.params(), scenario.duration, scenario.seed)
    rows = framerate_bias_report(schedule, rates, scenario.noise_std, scenario.seed)
    with open(out, "w", newline="") as fp:
        write_rows(fp, FPS_COLUMNS, rows)
    if not args.no_figure:
        plotting.plot_fps(out.with_suffix(".png"), rows)
    closing = [r["mean_closing_d1"] for r in rows]
    decreasing = all(b < a for a, b in zip(closing, closing[1:]))
    _check(decreasing, args.check, "mean closing duration decreases with frame rate: " + ", ".join(fmt(c) for c in closing))
    return 0


# -- parser ----------------------------------------------------------------------------------


def _stream_args(p, out_required=True):
    p.add_argument("--in", dest="inp", required=True, help="landmark stream")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--eyelid-config", default="auto", help="path, 'mediapipe', 'compact' or 'auto' (by landmark count)")
    p.add_argument("--z-scale", type=float, default=1.7, help="depth scale applied to raw z")
    p.add_argument("--out", required=out_required)


def _smoothing_args(p):
    p.add_argument("--fps", type=float, help="frame rate; default from the timestamps")
    p.add_argument("--smooth-sigma-override", type=float, help="Gaussian sigma in samples instead of fps/30")


def _scenario_args(p, default: str | None):
    p.add_argument("--config", default=default, required=default is None, help="scenario JSON or bundled name")
    p.add_argument("--seed", type=int, help="overrides the scenario seed")
    p.add_argument("--fps", type=float)
    p.add_argument("--duration", type=float)
    p.add_argument("--state", choices=("alert", "drowsy"))
    p.add_argument("--noise", type=float, help="ELA noise std in degrees")


def _eval_args(p):
    p.add_argument("--out", required=True, help="CSV report; a PNG figure is written next to it")
    p.add_argument("--no-figure", action="store_true")
    p.add_argument("--assert", dest="check", action="store_true", help="exit 2 if the directional check fails")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lidkit", description="Eyelid-angle blink and drowsiness analysis.")
    parser.add_argument("--version", action="version", version=f"lidkit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse and normalize a landmark stream")
    _stream_args(p, out_required=False)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("ela", help="per-frame eyelid angles")
    _stream_args(p)
    p.set_defaults(func=cmd_ela)

    p = sub.add_parser("blinks", help="detect blinks in an ELA CSV")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sliding", action="store_true", help="90 s window analysed every 60 s")
    p.add_argument("--figure", help="optional PNG of the smoothed signal and blink windows")
    _smoothing_args(p)
    p.set_defaults(func=cmd_blinks)

    p = sub.add_parser("features", help="per-blink features")
    p.add_argument("--blinks", required=True)
    p.add_argument("--ela", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--perclos-threshold", type=float, default=20.0)
    p.add_argument("--figure", help="optional PNG of feature histograms")
    _smoothing_args(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("pipeline", help="ela, blinks and features in one go")
    _stream_args(p, out_required=False)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sliding", action="store_true")
    p.add_argument("--perclos-threshold", type=float, default=20.0)
    _smoothing_args(p)
    p.set_defaults(func=cmd_pipeline)

    drowsy = sub.add_parser("drowsy", help="drowsiness classifier").add_subparsers(
        dest="action", required=True, parser_class=_Parser
    )
    for name, func in (("fit", cmd_drowsy_fit), ("predict", cmd_drowsy_predict), ("cv", cmd_drowsy_cv)):
        p = drowsy.add_parser(name)
        p.add_argument("--clip", type=float, default=60.0, help="seconds of blinks per vector")
        p.add_argument("--k", type=int, default=10)
        p.add_argument("--components", type=int, default=5)
        p.set_defaults(func=func)
        if name == "predict":
            p.add_argument("--model", required=True)
            p.add_argument("--features", required=True)
            p.add_argument("--out")
        else:
            p.add_argument("--labels", required=True, help="CSV with columns features,label,subject")
        if name == "fit":
            p.add_argument("--model", required=True)
        if name == "cv":
            p.add_argument("--folds", type=int, default=5)
            p.add_argument("--out")

    synth = sub.add_parser("synth", help="synthetic signals and landmark streams").add_subparsers(
        dest="action", required=True, parser_class=_Parser
    )
    p = synth.add_parser("signal")
    _scenario_args(p, None)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="blink annotation JSONL")
    p.set_defaults(func=cmd_synth_signal)
    p = synth.add_parser("landmarks")
    _scenario_args(p, None)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--truth", help="blink annotation JSONL")
    p.set_defaults(func=cmd_synth_landmarks)
    p = synth.add_parser("curve")
    _scenario_args(p, None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth_curve)

    ev = sub.add_parser("eval", help="evaluation reports").add_subparsers(
        dest="action", required=True, parser_class=_Parser
    )
    p = ev.add_parser("da", help="blink detection accuracy")
    _scenario_args(p, "alert")
    p.add_argument("--blinks", help="detected blinks JSONL (with --truth, instead of --config)")
    p.add_argument("--truth", help="annotation JSONL")
    p.add_argument("--sliding", action="store_true")
    p.add_argument("--smooth-sigma-override", type=float)
    p.add_argument("--min-da", type=float, default=90.0)
    _eval_args(p)
    p.set_defaults(func=cmd_eval_da)
    p = ev.add_parser("sweep", help="ELA error against set angles over a pose sweep")
    _scenario_args(p, "grid_sweep")
    p.add_argument("--set-elas", default="0,10,20,30,40,50,60,70")
    p.add_argument("--bin-width", type=float, default=5.0)
    p.add_argument("--max-mae", type=float, default=0.5)
    _eval_args(p)
    p.set_defaults(func=cmd_eval_sweep)
    p = ev.add_parser("variance", help="ELA vs EAR variance over a pose sweep")
    _scenario_args(p, "yaw_sweep")
    p.add_argument("--set-ela", type=float)
    _eval_args(p)
    p.set_defaults(func=cmd_eval_variance)
    p = ev.add_parser("fps", help="feature bias against frame rate")
    _scenario_args(p, "alert")
    p.add_argument("--fps-list", default="10,30,50,100")
    _eval_args(p)
    p.set_defaults(func=cmd_eval_fps)
    return parser


def run(argv: list[str] | None = None) -> int:
    """Parse ``argv`` and run the command; returns the exit code."""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except AssertionFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 2
    except (LidkitError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
