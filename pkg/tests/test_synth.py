import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lidkit.geometry import ela_samples, frame_ear
from lidkit.landmarks import load_eyelid_config, normalize_frame
from lidkit.filtering import ElaSeries
from lidkit.synth import (
    BlinkSchedule,
    BlinkShape,
    SynthScenario,
    blink_profile,
    bundled_scenarios,
    export_animation_curve,
    generate_blink_waveform,
    generate_ela_signal,
    generate_landmark_sequence,
    load_blink_params,
    load_scenario,
    read_animation_curve,
    render_schedule,
    sample_schedule,
)

COMPACT = load_eyelid_config("compact")


def test_v_shape_reaches_minimum():
    shape = BlinkShape(0.1, 0.0, 0.15, 60.0, 5.0)
    series, _ = generate_blink_waveform(shape, 1000)
    assert series.values.min() == pytest.approx(5.0, abs=0.1)


def test_example_waveform():
    shape = BlinkShape(0.1, 0.05, 0.15, 60.0, 5.0)
    series, _ = generate_blink_waveform(shape, 100)
    assert series.values.min() == pytest.approx(5.0, abs=0.1)
    below = series.times[series.values < 60.0 - 1e-9]
    assert below[-1] - below[0] == pytest.approx(0.3, abs=0.03)


def test_decimation_matches_low_rate():
    shape = BlinkShape(0.1, 0.05, 0.15, 60.0, 5.0)
    fine, _ = generate_blink_waveform(shape, 1000)
    with pytest.warns(UserWarning, match="shorter than one frame"):
        coarse, _ = generate_blink_waveform(shape, 10)
    decimated = np.interp(coarse.times, fine.times, fine.values)
    assert np.max(np.abs(decimated - coarse.values)) < 0.5


def test_flank_extensions_hit_phase_boundaries():
    shape = BlinkShape(0.1, 0.05, 0.2, 50.0, 10.0)
    t = np.array([0.02, 0.05, 0.2, 0.25])
    v = blink_profile(t, shape)
    # closing line: 50 -> 10 over 0.1 s; reopening line: 10 -> 50 from 0.15 to 0.35 s
    np.testing.assert_allclose(v, [42.0, 30.0, 20.0, 30.0], atol=1e-9)


@given(st.floats(0.03, 0.3), st.floats(0.0, 0.3), st.floats(0.05, 0.5), st.floats(30, 70), st.floats(0, 20))
def test_profile_bounded_and_continuous(d1, d2, d3, base, low):
    shape = BlinkShape(d1, d2, d3, base, low)
    t = np.linspace(-0.1, shape.support + 0.1, 4001)
    v = blink_profile(t, shape)
    assert v.min() >= low - 1e-9 and v.max() <= base + 1e-9
    # no jumps: steps stay within a few times the steepest flank slope
    dt = t[1] - t[0]
    assert np.max(np.abs(np.diff(v))) <= 3 * (base - low) / min(d1, d3) * dt + 1e-9


def test_single_blink_embedded_in_baseline():
    shape = BlinkShape(0.1, 0.05, 0.15, 55.0, 5.0)
    schedule = BlinkSchedule(3.0, 55.0, ((1.0, shape),))
    series, truth = render_schedule(schedule, 50)
    np.testing.assert_array_equal(series.values, truth.true_ela)
    expected = blink_profile(series.times - 1.0, shape)
    np.testing.assert_allclose(series.values, expected, atol=1e-12)
    (note,) = truth.annotations
    assert note.start_frame == 50 and note.end_frame == int(np.ceil((1.0 + shape.support) * 50))


@pytest.mark.parametrize("seed", [1, 2, 3, 4])
def test_drowsy_blink_count(seed):
    _, truth = generate_ela_signal(None, SynthScenario(duration=180, fps=30, seed=seed, state="drowsy"))
    assert 43 <= len(truth.annotations) <= 53


def test_same_seed_is_bit_identical():
    sc = SynthScenario(duration=60, fps=30, noise_std=0.7, seed=9)
    a, _ = generate_ela_signal(None, sc)
    b, _ = generate_ela_signal(None, sc)
    assert a.values.tobytes() == b.values.tobytes()


def test_schedule_independent_of_frame_rate():
    params = load_blink_params()["alert"]
    s30 = [a.onset for a in render_schedule(sample_schedule(params, 60, 3), 30)[1].annotations]
    s50 = [a.onset for a in render_schedule(sample_schedule(params, 60, 3), 50)[1].annotations]
    assert s30 == s50


@given(st.integers(0, 10_000), st.sampled_from(["alert", "drowsy"]))
def test_annotations_ordered_and_disjoint(seed, state):
    _, truth = generate_ela_signal(None, SynthScenario(duration=60, fps=30, seed=seed, state=state))
    notes = truth.annotations
    for a, b in zip(notes, notes[1:]):
        assert a.end_frame < b.start_frame
    for a in notes:
        assert 0 <= a.start_frame < a.end_frame < 60 * 30


def test_closed_eye_recovered():
    sc = SynthScenario(duration=0.5, fps=30)
    frames, _ = generate_landmark_sequence(np.zeros(sc.n_frames), sc)
    assert max(s.ela_combined for s in ela_samples(frames, COMPACT)) <= 1.0


@pytest.mark.parametrize("projection", ["orthographic", "perspective"])
def test_yaw_sweep_keeps_ela_steady(projection):
    sc = load_scenario("yaw_sweep", projection=projection)
    frames, truth = generate_landmark_sequence(np.full(sc.n_frames, 60.0), sc)
    ela = np.array([s.ela_combined for s in ela_samples(frames, COMPACT)])
    ear = np.array([frame_ear(normalize_frame(f), COMPACT) for f in frames])
    assert truth.poses[:, 1].min() == -40 and truth.poses[:, 1].max() == pytest.approx(40, abs=0.3)
    assert ela.std() <= 1.0
    assert ear.std() > 0


def test_transform_carries_pose():
    sc = SynthScenario(duration=1, fps=10, pose_keyframes=((0, 0, 30), (1, 0, 30)), set_ela=50)
    frames, _ = generate_landmark_sequence(np.full(sc.n_frames, 50.0), sc)
    assert np.degrees(normalize_frame(frames[0]).yaw) == pytest.approx(30.0)


def test_invalid_angles_rejected():
    sc = SynthScenario(duration=1, fps=10)
    with pytest.raises(ValueError):
        generate_landmark_sequence(np.full(10, 95.0), sc)
    with pytest.raises(ValueError):
        generate_landmark_sequence(np.full(10, 30.0), SynthScenario(duration=1, fps=10, pose_keyframes=((0, 0, 95),)))


def test_curve_round_trip(tmp_path):
    s = ElaSeries(np.array([50.0, 12.5, 49.99999]), 30)
    p = tmp_path / "c.csv"
    export_animation_curve(s, p)
    t, v = read_animation_curve(p)
    assert len(p.read_text().splitlines()) == 4
    np.testing.assert_array_equal(v, s.values)
    np.testing.assert_array_equal(t, s.times)


def test_empty_curve(tmp_path):
    p = tmp_path / "c.csv"
    export_animation_curve(ElaSeries(np.array([]), 30), p)
    assert p.read_text() == "time_s,ela_deg\n"


def test_long_curve_row_count(tmp_path):
    series, _ = generate_ela_signal(None, SynthScenario(duration=180, fps=30, seed=1))
    p = tmp_path / "c.csv"
    export_animation_curve(series, p)
    assert len(p.read_text().splitlines()) == 5400 + 1


def test_bundled_scenarios_load():
    names = bundled_scenarios()
    assert {"alert", "drowsy", "yaw_sweep", "pitch_sweep", "fixture_10s"} <= set(names)
    for name in names:
        load_scenario(name)


def test_scenario_file_overrides(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"duration": 5, "fps": 25, "seed": 2}))
    sc = load_scenario(p, seed=7, fps=None)
    assert (sc.duration, sc.fps, sc.seed) == (5.0, 25.0, 7)


def test_blink_params_validation():
    with pytest.raises(ValueError):
        load_blink_params({"alert": {
            "baseline_ela": 50, "min_ela": 60, "closing_duration": 0.1, "closed_duration": 0.05,
            "reopening_duration": 0.15, "inter_blink_interval": 3,
        }})
