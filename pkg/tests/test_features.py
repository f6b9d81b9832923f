import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from support import trapezoid_train, v_train

from lidkit.blinks import Blink, build_blink_window, detect_blinks
from lidkit.features import compute_features, extract_features, tangent_intersections
from lidkit.filtering import ElaSeries, central_derivative, gaussian_smooth
from lidkit.synth import load_blink_params, render_schedule, sample_schedule


def single_blink(series):
    d = central_derivative(series)
    return build_blink_window(series, int(np.argmin(d)), int(np.argmax(d)), d)


def test_trapezoid_corners_within_one_sample():
    fps = 30
    raw, corners = trapezoid_train([(0.1, 0.05, 0.15)], fps, base=40, low=10)
    sm = gaussian_smooth(raw)
    got = tangent_intersections(sm, single_blink(sm))
    np.testing.assert_allclose(got, corners[0], atol=1 / fps)


def test_v_blink_has_no_closed_phase():
    raw, _ = v_train(1, 20)  # vertex falls on a sample
    assert compute_features(raw, single_blink(raw)).closed_d2 == pytest.approx(0.0, abs=1e-9)
    raw, _ = v_train(1, 30)
    # smoothing lifts the vertex, which opens a gap of about 1.6 sigma between the tangents
    sm = gaussian_smooth(raw)
    assert compute_features(sm, single_blink(sm)).closed_d2 < 2 / 30


def test_shaped_blinks_at_50fps_within_20_percent():
    # phases several smoothing widths long, so the tangents are not flattened
    params = load_blink_params({
        "drowsy": {
            "baseline_ela": 50, "min_ela": 4,
            "closing_duration": {"mean": 0.16, "std": 0.02, "low": 0.12, "high": 0.2},
            "closed_duration": {"mean": 0.12, "std": 0.02, "low": 0.08, "high": 0.16},
            "reopening_duration": {"mean": 0.3, "std": 0.04, "low": 0.22, "high": 0.4},
            "inter_blink_interval": {"mean": 3.0, "std": 0.5, "low": 2.0, "high": 4.0},
        }
    })["drowsy"]
    schedule = sample_schedule(params, 40, seed=2)
    raw, _ = render_schedule(schedule, 50)
    sm = gaussian_smooth(raw)
    feats = extract_features(sm, detect_blinks(sm))
    assert len(feats) == len(schedule.blinks)
    for (_, f), (_, shape) in zip(feats, schedule.blinks):
        for got, want in ((f.closing_d1, shape.closing), (f.closed_d2, shape.closed), (f.reopening_d3, shape.reopening)):
            assert abs(got - want) <= 0.2 * want


def hand_blink(values, fps=10, i_start=0, i_end=None, m1_index=1, m2_index=None, m1=-10.0, m2=10.0):
    v = np.asarray(values, dtype=float)
    i_end = len(v) - 1 if i_end is None else i_end
    m2_index = i_end - 1 if m2_index is None else m2_index
    blink = Blink(i_start, i_end, m1_index, m2_index, m1, m2, float(v[i_start]), float(v[i_end]),
                  float(v[i_start:i_end + 1].min()))
    return ElaSeries(v, fps), blink


def test_peropening_arithmetic():
    raw, _ = trapezoid_train([(0.1, 0.05, 0.15)], 1000, base=40, low=10)
    f = compute_features(raw, single_blink(raw))
    d1, d2, d3 = f.closing_d1, f.closed_d2, f.reopening_d3
    assert f.peropening == d3 / (d1 + d2 + d3)
    assert (d1, d2, d3) == pytest.approx((0.1, 0.05, 0.15), abs=2e-3)
    assert f.peropening == pytest.approx(0.5, abs=0.01)


def test_amplitude_arithmetic():
    series, blink = hand_blink([40, 25, 10, 10, 25, 40], m1=-150, m2=150, m2_index=4)
    assert compute_features(series, blink).amplitude == pytest.approx(0.75)


def test_normal_area_of_linear_reopening():
    # open linearly over d3 then stay flat: area is 1.5 * delta * d3 over [t3, t3 + 2 d3]
    fps = 1000
    raw, corners = trapezoid_train([(0.1, 0.05, 0.15)], fps, base=40, low=10, gap=1.0)
    f = compute_features(raw, single_blink(raw))
    assert f.normal_area == pytest.approx(0.75, abs=0.01)


def test_av_ratio_and_previous_time():
    raw, corners = trapezoid_train([(0.1, 0.05, 0.15)] * 2, 1000, base=40, low=10, gap=1.0)
    d = central_derivative(raw)
    mid = len(raw) // 2
    first = build_blink_window(raw, int(np.argmin(d[:mid])), int(np.argmax(d[:mid])), d)
    second = build_blink_window(raw, mid + int(np.argmin(d[mid:])), mid + int(np.argmax(d[mid:])), d)
    f1 = compute_features(raw, first)
    f2 = compute_features(raw, second, (first, f1))
    assert f1.previous_time is None
    assert f2.previous_time == pytest.approx(corners[1][0] - corners[0][0], abs=2e-3)
    assert f2.av_ratio == pytest.approx((second.ela_end - second.ela_min) / second.m2)
    assert f2.av_ratio == pytest.approx(0.15, abs=2e-3)


def test_perclos_counts_frames_since_previous_blink():
    raw, _ = trapezoid_train([(0.1, 0.05, 0.15)] * 2, 100, base=40, low=10, gap=1.0)
    d = central_derivative(raw)
    mid = len(raw) // 2
    first = build_blink_window(raw, int(np.argmin(d[:mid])), int(np.argmax(d[:mid])), d)
    second = build_blink_window(raw, mid + int(np.argmin(d[mid:])), mid + int(np.argmax(d[mid:])), d)
    f2 = compute_features(raw, second, (first, compute_features(raw, first)))
    span = raw.values[first.i_end + 1 : second.i_end + 1]
    assert f2.perclos == np.count_nonzero(span < 20) / len(span)


@given(
    st.floats(0.1, 0.3), st.floats(0.0, 0.3), st.floats(0.15, 0.5),
    st.floats(30, 70), st.floats(0, 15), st.sampled_from([30, 60, 100]),
)
def test_feature_invariants(d1, d2, d3, base, low, fps):
    raw, _ = trapezoid_train([(d1, d2, d3)], fps, base=base, low=low)
    sm = gaussian_smooth(raw)
    f = compute_features(sm, single_blink(sm))
    assert f.t1 <= f.t2 <= f.t3 <= f.t4
    assert f.peropening == pytest.approx(f.reopening_d3 / (f.closing_d1 + f.closed_d2 + f.reopening_d3), rel=1e-12)
    assert 0 <= f.amplitude <= 1 and 0 <= f.perclos <= 1 and 0 <= f.peropening <= 1
    assert min(f.closing_d1, f.closed_d2, f.reopening_d3) >= 0
