import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newsload.errors import FrameInvariantError, SpanTooShort
from newsload.timeseries import (
    LAG_STEPS,
    SEGMENT_LABELS,
    SeriesFrame,
    encode_calendar,
    make_windows,
    segment_of,
    segment_slots,
)

from conftest import make_frame


def test_calendar_monday_midnight():
    enc = encode_calendar(dt.datetime(2016, 6, 6, 0, 0))  # a Monday
    assert enc.week_sin == pytest.approx(0.0, abs=1e-12)
    assert enc.week_cos == pytest.approx(1.0, abs=1e-12)


def test_calendar_thursday_noon_is_half_period():
    enc = encode_calendar("2016-06-09T12:00Z")
    assert enc.week_sin == pytest.approx(0.0, abs=1e-12)
    assert enc.week_cos == pytest.approx(-1.0, abs=1e-12)


def test_calendar_new_year():
    enc = encode_calendar(np.datetime64("2019-01-01T00:00"))
    assert enc.year_sin == pytest.approx(0.0, abs=1e-12)
    assert enc.year_cos == pytest.approx(1.0, abs=1e-12)


def test_calendar_timezone_aware_input_is_converted():
    aware = dt.datetime(2016, 6, 6, 1, 0, tzinfo=dt.timezone(dt.timedelta(hours=1)))
    assert encode_calendar(aware) == encode_calendar("2016-06-06T00:00Z")


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=60 * 24 * 365 * 30))
def test_calendar_unit_circle_and_week_periodic(minutes):
    t = np.datetime64("1995-01-01T00:00") + np.timedelta64(minutes, "m")
    a = encode_calendar(t)
    b = encode_calendar(t + np.timedelta64(7, "D"))
    assert a.week_sin**2 + a.week_cos**2 == pytest.approx(1.0, abs=1e-9)
    assert a.year_sin**2 + a.year_cos**2 == pytest.approx(1.0, abs=1e-9)
    assert abs(a.week_sin - b.week_sin) < 1e-9 and abs(a.week_cos - b.week_cos) < 1e-9


def test_ten_day_frame_gives_two_windows(frame10):
    train, test = make_windows(frame10, frame10.dates[-1] + 1)
    assert test == []
    assert [w.anchor_day for w in train] == [frame10.dates[7], frame10.dates[8]]
    n_feat = len(frame10.columns)
    for w in train:
        assert w.lag_block.shape == (LAG_STEPS, n_feat)
        assert w.target_block.shape == (48,)


def test_window_contents_follow_the_day_ahead_geometry(frame10):
    (w, _), _ = make_windows(frame10, frame10.dates[-1] + 1)
    names = list(w.feature_names)
    assert names == sorted(names)
    demand = frame10.daily("demand_mw")
    j = names.index("demand_mw")
    # lag block = days 0..6 for anchor day 7, target = day 8
    np.testing.assert_array_equal(w.lag_block[:, j], demand[0:7].ravel())
    np.testing.assert_array_equal(w.target_block, demand[8])


def test_too_short_frame():
    with pytest.raises(SpanTooShort):
        make_windows(_truncate(make_frame(9), 8), "2016-06-05")


def _truncate(frame, days):
    n = days * 48
    return SeriesFrame(
        frame.timestamps[:n], {k: v[:n] for k, v in frame.columns.items()}, frame.roles
    )


def _brute_force_counts(n_days, split_index):
    train = test = 0
    for d in range(n_days):
        if d - 7 >= 0 and d + 1 <= n_days - 1:
            if d < split_index:
                train += 1
            else:
                test += 1
    return train, test


def test_five_year_window_counts():
    frame = make_frame(1826)
    split = np.datetime64("2020-06-01")
    train, test = make_windows(frame, split)
    split_index = int((split - frame.dates[0]).astype(int))
    assert (len(train), len(test)) == _brute_force_counts(1826, split_index)
    assert abs(len(train) - (4 * 365 - 8)) <= 3
    assert abs(len(test) - 365) <= 1


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=9, max_value=100), st.floats(min_value=0.0, max_value=1.0))
def test_window_count_matches_enumeration(n_days, frac):
    frame = _truncate(make_frame(100), n_days)
    split_index = int(frac * n_days)
    train, test = make_windows(frame, frame.dates[0] + split_index)
    assert (len(train), len(test)) == _brute_force_counts(n_days, split_index)


def test_segment_boundaries():
    assert segment_of(0).label == "midnight"
    assert segment_of(11).label == "midnight"
    assert segment_of(12).label == "morning"  # 06:00-06:30 ends in hour 7
    assert segment_of(13).label == "morning"
    assert segment_of(47).label == "evening"
    with pytest.raises(ValueError):
        segment_of(48)


def test_segments_partition_the_day():
    counts = {label: 0 for label in SEGMENT_LABELS}
    for k in range(48):
        counts[segment_of(k).label] += 1
    assert counts == {label: 12 for label in SEGMENT_LABELS}
    joined = np.sort(np.concatenate([segment_slots(label) for label in SEGMENT_LABELS]))
    np.testing.assert_array_equal(joined, np.arange(48))


class TestFrameInvariants:
    def test_gap_rejected(self, frame10):
        ts = frame10.timestamps.copy()
        ts[5:] = ts[5:] + np.timedelta64(30, "m")
        with pytest.raises(FrameInvariantError):
            SeriesFrame(ts, frame10.columns, frame10.roles)

    def test_two_targets_rejected(self, frame10):
        roles = dict(frame10.roles, temp_c="target")
        with pytest.raises(FrameInvariantError):
            SeriesFrame(frame10.timestamps, frame10.columns, roles)

    def test_text_must_be_daily_constant(self, frame10):
        cols = dict(frame10.columns)
        cols["sentiment__signal"] = cols["sentiment__signal"].copy()
        cols["sentiment__signal"][3] += 1.0
        with pytest.raises(FrameInvariantError):
            SeriesFrame(frame10.timestamps, cols, frame10.roles)

    def test_length_mismatch(self, frame10):
        cols = dict(frame10.columns, temp_c=frame10.columns["temp_c"][:-1])
        with pytest.raises(FrameInvariantError):
            SeriesFrame(frame10.timestamps, cols, frame10.roles)
