import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newsload.errors import (
    DuplicateTimestamp,
    GapTooLong,
    MissingTargetTable,
    NonMonotonicTime,
    ParseError,
)
from newsload.ingest import (
    SyntheticSpec,
    assemble_frame,
    generate_synthetic,
    load_directory,
    read_csv,
    read_frame_csv,
    seasonal_component,
    write_frame_csv,
    write_source_files,
)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def _demand_rows(n_days, start="2016-06-01", skip=()):
    t0 = np.datetime64(start + "T00:00")
    rows = ["timestamp,demand_mw"]
    for k in range(n_days * 48):
        if k in skip:
            continue
        t = t0 + np.timedelta64(30 * k, "m")
        rows.append(f"{t}Z,{30000 + k % 48}")
    return "\n".join(rows) + "\n"


def test_read_two_row_demand(tmp_path):
    p = _write(tmp_path / "demand.csv", "timestamp,demand_mw\n2016-06-01T00:00Z,100\n2016-06-01T00:30Z,110\n")
    t = read_csv(p, "demand")
    assert len(t.times) == 2
    np.testing.assert_array_equal(t.values[:, 0], [100.0, 110.0])


def test_hourly_temperature_is_interpolated(tmp_path):
    p = _write(tmp_path / "temperature.csv", "timestamp,temp_c\n2016-06-01T00:00Z,10.0\n2016-06-01T01:00Z,12.0\n")
    t = read_csv(p, "temperature")
    assert t.times[1] == np.datetime64("2016-06-01T00:30")
    assert t.values[1, 0] == 11.0


def test_backwards_timestamp_reports_line(tmp_path):
    p = _write(
        tmp_path / "demand.csv",
        "timestamp,demand_mw\n2016-06-01T01:00Z,1\n2016-06-01T01:30Z,2\n2016-06-01T00:30Z,3\n",
    )
    with pytest.raises(NonMonotonicTime) as err:
        read_csv(p, "demand")
    assert err.value.line == 4


def test_duplicate_timestamp(tmp_path):
    p = _write(tmp_path / "demand.csv", "timestamp,demand_mw\n2016-06-01T00:00Z,1\n2016-06-01T00:00Z,2\n")
    with pytest.raises(DuplicateTimestamp):
        read_csv(p, "demand")


def test_malformed_value_reports_line(tmp_path):
    p = _write(tmp_path / "demand.csv", "timestamp,demand_mw\n2016-06-01T00:00Z,1\n2016-06-01T00:30Z,abc\n")
    with pytest.raises(ParseError) as err:
        read_csv(p, "demand")
    assert err.value.line == 3


def test_holiday_dummy(tmp_path):
    d = _write(tmp_path / "demand.csv", _demand_rows(9))
    h = _write(tmp_path / "holidays.csv", "date\n2016-06-03\n")
    frame = assemble_frame([read_csv(d, "demand"), read_csv(h, "holidays")], ("2016-06-01", "2016-06-09"))
    hol = frame.daily("holiday")
    assert hol[2].tolist() == [1.0] * 48
    assert hol.sum() == 48


def test_column_count(tmp_path):
    d = _write(tmp_path / "demand.csv", _demand_rows(9))
    temp = _write(tmp_path / "temperature.csv", _demand_rows(9).replace("demand_mw", "temp_c"))
    h = _write(tmp_path / "holidays.csv", "date\n")
    txt = "date,a,b,c\n" + "".join(f"2016-06-{d:02d},1,2,3\n" for d in range(1, 10))
    s = _write(tmp_path / "text_sentiment.csv", txt)
    tables = [read_csv(d, "demand"), read_csv(temp, "temperature"), read_csv(h, "holidays"),
              read_csv(s, "text_features")]
    frame = assemble_frame(tables, ("2016-06-01", "2016-06-09"))
    assert len(frame.columns) == 1 + 1 + 1 + 4 + 3
    assert frame.names("text") == ["sentiment__a", "sentiment__b", "sentiment__c"]


def test_short_gap_interpolated_long_gap_rejected(tmp_path):
    d2 = _write(tmp_path / "d2.csv", _demand_rows(9, skip={100, 101}))
    frame = assemble_frame([read_csv(d2, "demand")], ("2016-06-01", "2016-06-09"))
    y = frame.columns["demand_mw"]
    assert y[100] == pytest.approx(y[99] + (y[102] - y[99]) / 3)
    d3 = _write(tmp_path / "d3.csv", _demand_rows(9, skip={100, 101, 102}))
    with pytest.raises(GapTooLong):
        assemble_frame([read_csv(d3, "demand")], ("2016-06-01", "2016-06-09"))


def test_missing_demand_table(tmp_path):
    h = _write(tmp_path / "holidays.csv", "date\n2016-06-03\n")
    with pytest.raises(MissingTargetTable):
        assemble_frame([read_csv(h, "holidays")], ("2016-06-01", "2016-06-09"))


def test_synthetic_noise_free_is_deterministic():
    spec = SyntheticSpec(n_days=20, noise_sd=0.0, text_signal_gain=0.0, seed=3)
    f1, _ = generate_synthetic(spec)
    f2, _ = generate_synthetic(spec)
    for k in f1.columns:
        assert np.array_equal(f1.columns[k], f2.columns[k])
    np.testing.assert_allclose(f1.columns["demand_mw"], seasonal_component(spec, f1.timestamps), rtol=0, atol=1e-9)


def test_synthetic_seed_changes_demand():
    a, _ = generate_synthetic(SyntheticSpec(n_days=20, noise_sd=10.0, seed=1))
    b, _ = generate_synthetic(SyntheticSpec(n_days=20, noise_sd=10.0, seed=2))
    assert not np.array_equal(a.columns["demand_mw"], b.columns["demand_mw"])


def _daily_residual(spec):
    frame, _ = generate_synthetic(spec)
    resid = frame.columns["demand_mw"] - seasonal_component(spec, frame.timestamps)
    return frame.daily("sentiment__signal")[:, 0], resid.reshape(-1, 48).mean(axis=1)


def test_zero_gain_text_uncorrelated():
    s, resid = _daily_residual(SyntheticSpec(n_days=1000, noise_sd=500.0, text_signal_gain=0.0, seed=7))
    assert abs(np.corrcoef(s, resid)[0, 1]) < 0.05


def test_lagged_signal_peaks_at_configured_lag():
    s, resid = _daily_residual(
        SyntheticSpec(n_days=1000, noise_sd=500.0, text_signal_gain=400.0, text_signal_lag=1, seed=7)
    )
    lag0 = np.corrcoef(s, resid)[0, 1]
    lag1 = np.corrcoef(s[:-1], resid[1:])[0, 1]
    assert lag1 > lag0


@settings(max_examples=15, deadline=None)
@given(
    st.integers(min_value=9, max_value=30),
    st.integers(min_value=0, max_value=2**63 - 1),
    st.integers(min_value=0, max_value=3),
    st.integers(min_value=0, max_value=4),
)
def test_csv_round_trip(tmp_path_factory, n_days, seed, n_noise, emb):
    spec = SyntheticSpec(n_days=n_days, seed=seed, noise_sd=123.4, text_signal_gain=50.0,
                         n_noise_channels=n_noise, embedding_dims=emb)
    frame, _ = generate_synthetic(spec)
    d = tmp_path_factory.mktemp("rt")
    write_source_files(frame, d)
    back = load_directory(d)
    assert sorted(back.columns) == sorted(frame.columns)
    for k in frame.columns:
        np.testing.assert_allclose(back.columns[k], frame.columns[k], rtol=0, atol=1e-12)
    write_frame_csv(frame, d / "frame.csv")
    again = read_frame_csv(d / "frame.csv")
    for k in frame.columns:
        assert np.array_equal(again.columns[k], frame.columns[k])
    assert again.roles == frame.roles
