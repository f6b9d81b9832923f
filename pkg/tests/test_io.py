import numpy as np
import pytest

from lidkit.blinks import detect_blinks
from lidkit.errors import ParseError
from lidkit.features import extract_features
from lidkit.filtering import gaussian_smooth
from lidkit.geometry import ElaSample
from lidkit.io import (
    blink_record,
    fmt,
    read_blinks_jsonl,
    read_ela_csv,
    read_features_csv,
    read_windows_jsonl,
    write_blinks_jsonl,
    write_ela_csv,
    write_features_csv,
    write_truth_jsonl,
)
from lidkit.synth import SynthScenario, generate_ela_signal


@pytest.mark.parametrize("value, text", [(None, ""), (float("nan"), ""), (0.1, "0.1"), (3, "3"), (True, "true")])
def test_cell_format(value, text):
    assert fmt(value) == text


def test_ela_csv_round_trip(tmp_path):
    samples = [ElaSample(0.0, 40.0, None, 40.0, 0.1), None, ElaSample(0.2, 1 / 3, 2 / 3, 0.5, -0.2)]
    p = tmp_path / "ela.csv"
    with open(p, "w", newline="") as fp:
        write_ela_csv(fp, [0.0, 0.1, 0.2], samples)
    t, v = read_ela_csv(p)
    np.testing.assert_array_equal(t, [0.0, 0.1, 0.2])
    assert v == [40.0, None, 0.5]
    assert p.read_text().splitlines()[2] == "0.1,,,,"


def test_ela_csv_bad_number(tmp_path):
    p = tmp_path / "ela.csv"
    p.write_text("timestamp,ela_left,ela_right,ela_combined,yaw\n0.0,1,1,abc,0\n")
    with pytest.raises(ParseError) as err:
        read_ela_csv(p)
    assert err.value.line == 2 and err.value.field == "ela_combined"


def test_ela_csv_missing_column(tmp_path):
    p = tmp_path / "ela.csv"
    p.write_text("timestamp,ela\n0.0,1\n")
    with pytest.raises(ParseError):
        read_ela_csv(p)


@pytest.fixture(scope="module")
def analysed():
    raw, truth = generate_ela_signal(None, SynthScenario(duration=30, fps=30, noise_std=0.5, seed=2))
    sm = gaussian_smooth(raw)
    blinks = detect_blinks(sm)
    return sm, blinks, extract_features(sm, blinks), truth


def test_blinks_round_trip(tmp_path, analysed):
    sm, blinks, _, _ = analysed
    p = tmp_path / "b.jsonl"
    with open(p, "w") as fp:
        write_blinks_jsonl(fp, (blink_record(b, sm, 1.0) for b in blinks))
    again, records = read_blinks_jsonl(p)
    assert again == blinks
    assert records[0]["frame_start"] == blinks[0].frame_window[0]
    assert records[0]["t_m1"] == sm.time_of(blinks[0].m1_index)


def test_features_round_trip(tmp_path, analysed):
    _, _, feats, _ = analysed
    p = tmp_path / "f.csv"
    with open(p, "w", newline="") as fp:
        write_features_csv(fp, (f for _, f in feats))
    again = read_features_csv(p)
    assert again == [f for _, f in feats]
    assert again[0].previous_time is None


def test_truth_windows(tmp_path, analysed):
    *_, truth = analysed
    path = tmp_path / "t.jsonl"
    with open(path, "w") as fp:
        write_truth_jsonl(fp, truth.annotations)
    assert read_windows_jsonl(path, "start_frame", "end_frame") == [
        (a.start_frame, a.end_frame) for a in truth.annotations
    ]


def test_bad_blink_record(tmp_path):
    p = tmp_path / "b.jsonl"
    p.write_text('{"i_start": 1}\n')
    with pytest.raises(ParseError) as err:
        read_blinks_jsonl(p)
    assert err.value.line == 1
