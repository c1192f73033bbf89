"""CSV ingestion, frame assembly and the synthetic demand generator.

File schemas (header row required, ISO-8601 UTC timestamps)::

    demand.csv          timestamp,demand_mw
    temperature.csv     timestamp,temp_c
    holidays.csv        date
    text_<group>.csv    date,f1,f2,...

Frame column names follow a fixed convention from which roles are
recovered: ``demand_mw`` (target), ``temp_c``, ``holiday``, ``cal_*`` and
``<group>__<dim>`` for daily text features.
"""
from __future__ import annotations

import csv
import logging
import math
import os
import re
from dataclasses import asdict, dataclass, field

import numpy as np

from newsload.errors import (
    DuplicateTimestamp,
    GapTooLong,
    MissingTargetTable,
    NonMonotonicTime,
    ParseError,
    DataError,
)
from newsload.timeseries import (
    SLOTS_PER_DAY,
    STEP,
    SeriesFrame,
    calendar_columns,
    calendar_phases,
    to_minutes,
)

log = logging.getLogger(__name__)

TARGET = "demand_mw"
TEMPERATURE = "temp_c"
HOLIDAY = "holiday"
KINDS = ("demand", "temperature", "holidays", "text_features")
MAX_FILL_SLOTS = 2


def role_for_column(name):
    if name == TARGET:
        return "target"
    if name == TEMPERATURE:
        return "temperature"
    if name == HOLIDAY:
        return "holiday"
    if name.startswith("cal_"):
        return "calendar"
    if "__" in name:
        return "text:" + name.split("__", 1)[0]
    raise DataError(f"cannot infer role of column {name!r}")


@dataclass
class RawTable:
    """Parsed rows of one input file.

    ``times`` holds ``datetime64[m]`` instants for demand/temperature and
    ``datetime64[D]`` dates for holidays and text features; ``values`` is
    (rows, len(names)).
    """

    source_path: str
    kind: str
    names: list
    times: np.ndarray
    values: np.ndarray
    group: str | None = None


def _parse_float(text, path, line):
    text = text.strip()
    if text == "" or text.lower() == "nan":
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise ParseError(path, line, f"not a number: {text!r}") from None


def _to_half_hourly(times, values):
    """Insert linear midpoints between rows exactly one hour apart."""
    if len(times) < 2:
        return times, values
    steps = np.diff(times).astype(np.int64)
    if not np.any(steps == 60):
        return times, values
    out_t, out_v = [times[0]], [values[0]]
    for i in range(1, len(times)):
        if steps[i - 1] == 60:
            out_t.append(times[i - 1] + STEP)
            out_v.append(0.5 * (values[i - 1] + values[i]))
        out_t.append(times[i])
        out_v.append(values[i])
    if steps[-1] == 60:
        # trailing :30 slot of an hourly series has no right neighbour
        out_t.append(times[-1] + STEP)
        out_v.append(values[-1])
    return np.array(out_t, dtype="datetime64[m]"), np.array(out_v)


def read_csv(path, kind, group=None) -> RawTable:
    """Parse one input file; hourly series are interpolated to half-hourly."""
    if kind not in KINDS:
        raise ValueError(f"unknown table kind {kind!r}")
    path = os.fspath(path)
    if kind == "text_features" and group is None:
        m = re.match(r"text_(\w+)\.csv$", os.path.basename(path))
        if not m:
            raise ParseError(path, 0, "cannot infer text group from file name")
        group = m.group(1)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(path, 1, "empty file") from None
        names = header[1:]
        if kind in ("demand", "temperature") and len(names) != 1:
            raise ParseError(path, 1, f"expected two columns, got {header}")
        times, rows = [], []
        prev = None
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(path, line, f"expected {len(header)} fields, got {len(row)}")
            try:
                if kind in ("demand", "temperature"):
                    t = to_minutes(row[0])[0]
                else:
                    t = np.datetime64(row[0].strip()[:10], "D")
            except ValueError:
                raise ParseError(path, line, f"bad timestamp {row[0]!r}") from None
            if prev is not None:
                if t == prev:
                    raise DuplicateTimestamp(path, line, f"duplicate timestamp {row[0]}")
                if t < prev:
                    raise NonMonotonicTime(path, line, f"timestamp {row[0]} goes backwards")
            prev = t
            times.append(t)
            rows.append([_parse_float(c, path, line) for c in row[1:]])
    unit = "datetime64[m]" if kind in ("demand", "temperature") else "datetime64[D]"
    times = np.array(times, dtype=unit)
    values = np.array(rows, dtype=float).reshape(len(rows), len(names))
    if kind in ("demand", "temperature"):
        t2, v2 = _to_half_hourly(times, values[:, 0])
        times, values = t2, v2.reshape(-1, 1)
    return RawTable(path, kind, names, times, values, group)


def _fill_short_gaps(values, grid, name):
    """Linearly fill runs of at most MAX_FILL_SLOTS missing slots."""
    missing = np.isnan(values)
    if not missing.any():
        return values
    if missing.all():
        raise GapTooLong(f"{name}: no data in range")
    idx = np.flatnonzero(missing)
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    for run in runs:
        if len(run) > MAX_FILL_SLOTS:
            raise GapTooLong(
                f"{name}: {len(run)} missing slots from {grid[run[0]]} to {grid[run[-1]]}"
            )
    ok = ~missing
    x = np.arange(len(values))
    out = values.copy()
    out[missing] = np.interp(x[missing], x[ok], values[ok])
    return out


def _on_grid(table, grid):
    pos = ((table.times - grid[0]) // STEP).astype(np.int64)
    keep = (pos >= 0) & (pos < len(grid)) & ((table.times - grid[0]) % STEP == np.timedelta64(0, "m"))
    out = np.full(len(grid), np.nan)
    out[pos[keep]] = table.values[keep, 0]
    return out


def assemble_frame(tables, date_range) -> SeriesFrame:
    """Align parsed tables onto a half-hourly grid covering ``date_range``.

    ``date_range`` is an inclusive ``(first_day, last_day)`` pair.
    """
    start = np.datetime64(date_range[0], "D")
    end = np.datetime64(date_range[1], "D")
    n_days = int((end - start).astype(int)) + 1
    if n_days < 1:
        raise DataError(f"empty date range {date_range}")
    grid = start.astype("datetime64[m]") + STEP * np.arange(n_days * SLOTS_PER_DAY)
    days = start + np.arange(n_days)
    by_kind = {}
    for t in tables:
        by_kind.setdefault(t.kind, []).append(t)
    if "demand" not in by_kind:
        raise MissingTargetTable("no demand table supplied")

    columns = {TARGET: _fill_short_gaps(_on_grid(by_kind["demand"][0], grid), grid, TARGET)}
    if "temperature" in by_kind:
        columns[TEMPERATURE] = _fill_short_gaps(
            _on_grid(by_kind["temperature"][0], grid), grid, TEMPERATURE
        )
    hol = np.zeros(n_days)
    for t in by_kind.get("holidays", []):
        hol[np.isin(days, t.times)] = 1.0
    columns[HOLIDAY] = np.repeat(hol, SLOTS_PER_DAY)
    columns.update(calendar_columns(grid))
    for t in by_kind.get("text_features", []):
        pos = (t.times - start).astype(np.int64)
        keep = (pos >= 0) & (pos < n_days)
        n_missing = n_days - int(keep.sum())
        if n_missing:
            log.warning("%s: %d days without rows, filled with 0", t.source_path, n_missing)
        for j, dim in enumerate(t.names):
            daily = np.zeros(n_days)
            daily[pos[keep]] = np.nan_to_num(t.values[keep, j])
            columns[f"{t.group}__{dim}"] = np.repeat(daily, SLOTS_PER_DAY)
    roles = {k: role_for_column(k) for k in columns}
    return SeriesFrame(grid, columns, roles)


def format_timestamp(t):
    return str(np.datetime64(t, "m")) + "Z"


def _fmt(x):
    return repr(float(x))


def write_frame_csv(frame, path):
    """Write a frame with full float precision (exact round trip)."""
    names = [frame.target_name] + [n for n in frame.names() if n != frame.target_name]
    data = np.stack([frame.columns[n] for n in names], axis=1)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp"] + names)
        for t, row in zip(frame.timestamps, data):
            w.writerow([format_timestamp(t)] + [_fmt(v) for v in row])


def read_frame_csv(path) -> SeriesFrame:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        times, rows = [], []
        for row in reader:
            if not row:
                continue
            times.append(row[0])
            rows.append([_parse_float(c, path, reader.line_num) for c in row[1:]])
    names = header[1:]
    data = np.array(rows, dtype=float)
    cols = {n: data[:, j] for j, n in enumerate(names)}
    return SeriesFrame(to_minutes(times), cols, {n: role_for_column(n) for n in names})


def write_source_files(frame, directory):
    """Split a frame back into the ingest-schema input files.

    Returns the list of written paths; calendar columns are not written
    since assembly recomputes them.
    """
    os.makedirs(directory, exist_ok=True)
    paths = []
    ts = [format_timestamp(t) for t in frame.timestamps]
    for name, fname, col in ((TARGET, "demand.csv", "demand_mw"), (TEMPERATURE, "temperature.csv", "temp_c")):
        if name not in frame.columns:
            continue
        p = os.path.join(directory, fname)
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["timestamp", col])
            for t, v in zip(ts, frame.columns[name]):
                w.writerow([t, _fmt(v)])
        paths.append(p)
    dates = [str(d) for d in frame.dates]
    p = os.path.join(directory, "holidays.csv")
    with open(p, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date"])
        if HOLIDAY in frame.columns:
            for d, flag in zip(dates, frame.daily(HOLIDAY)[:, 0]):
                if flag > 0.5:
                    w.writerow([d])
    paths.append(p)
    groups = {}
    for n in frame.names("text"):
        groups.setdefault(n.split("__", 1)[0], []).append(n)
    for g, names in sorted(groups.items()):
        p = os.path.join(directory, f"text_{g}.csv")
        daily = np.stack([frame.daily(n)[:, 0] for n in names], axis=1)
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date"] + [n.split("__", 1)[1] for n in names])
            for d, row in zip(dates, daily):
                w.writerow([d] + [_fmt(v) for v in row])
        paths.append(p)
    return paths


def load_directory(directory, date_range=None):
    """Read every recognised input file in ``directory`` and assemble a frame."""
    tables = []
    demand = os.path.join(directory, "demand.csv")
    if not os.path.exists(demand):
        raise MissingTargetTable(f"{demand} not found")
    tables.append(read_csv(demand, "demand"))
    temp = os.path.join(directory, "temperature.csv")
    if os.path.exists(temp):
        tables.append(read_csv(temp, "temperature"))
    hol = os.path.join(directory, "holidays.csv")
    if os.path.exists(hol):
        tables.append(read_csv(hol, "holidays"))
    for fname in sorted(os.listdir(directory)):
        if re.match(r"text_\w+\.csv$", fname):
            tables.append(read_csv(os.path.join(directory, fname), "text_features"))
    if date_range is None:
        t = tables[0].times
        first = t[0].astype("datetime64[D]")
        if t[0] != first.astype("datetime64[m]"):
            first = first + 1
        last = (t[-1] + STEP).astype("datetime64[D]") - 1
        date_range = (first, last)
    return assemble_frame(tables, date_range)


# --------------------------------------------------------------------------
# synthetic data


def default_daily_profile():
    """Half-hourly base load shape (MW) with a night trough and two peaks."""
    h = (np.arange(SLOTS_PER_DAY) + 0.5) / 2.0
    return (
        27000.0
        + 5000.0 * np.exp(-((h - 9.0) ** 2) / 8.0)
        + 7000.0 * np.exp(-((h - 18.0) ** 2) / 6.0)
        - 5000.0 * np.exp(-((h - 4.0) ** 2) / 6.0)
    )


@dataclass
class SyntheticSpec:
    """Parameters of the synthetic generator.

    ``text_signal_gain`` is in MW per unit of the (unit-variance AR(1))
    sentiment signal; the signal drives demand ``text_signal_lag`` days later.
    """

    n_days: int = 400
    start_date: str = "2016-06-01"
    daily_profile: list | None = None
    weekly_amplitude: float = 0.06
    annual_amplitude: float = 0.15
    temperature_coupling: float = 0.0
    text_signal_lag: int = 2
    text_signal_gain: float = 0.0
    noise_sd: float = 0.0
    seed: int = 0
    text_persistence: float = 0.8
    temperature_anomaly_sd: float = 1.5
    n_noise_channels: int = 0
    embedding_dims: int = 0
    embedding_noise: float = 0.01

    def __post_init__(self):
        if self.n_days < 9:
            raise ValueError("n_days must be at least 9")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")
        if self.text_signal_lag < 0:
            raise ValueError("text_signal_lag must be non-negative")
        if not 0 <= self.text_persistence < 1:
            raise ValueError("text_persistence must lie in [0, 1)")


def _ar1(rng, n, phi, burn=50):
    """Unit-variance stationary AR(1) path of length ``n``."""
    e = rng.standard_normal(n + burn)
    x = np.empty(n + burn)
    x[0] = e[0]
    scale = math.sqrt(1.0 - phi * phi)
    for i in range(1, n + burn):
        x[i] = phi * x[i - 1] + scale * e[i]
    return x[burn:]


def seasonal_component(spec, timestamps):
    """Noise-free demand from the profile and calendar modulation alone."""
    profile = np.asarray(spec.daily_profile if spec.daily_profile is not None else default_daily_profile())
    week, year = calendar_phases(timestamps)
    base = np.tile(profile, len(timestamps) // SLOTS_PER_DAY)
    return base * (1.0 + spec.weekly_amplitude * np.cos(week) + spec.annual_amplitude * np.cos(year))


def generate_synthetic(spec: SyntheticSpec):
    """Generate a frame from a known process; returns ``(frame, ground_truth)``.

    demand = profile * (1 + weekly + annual modulation)
             + temperature_coupling * (temp - mean temp)
             + text_signal_gain * s(day - text_signal_lag) + noise

    All randomness comes from ``numpy.random.default_rng(seed)`` (PCG64),
    drawn in a fixed order.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_days
    start = np.datetime64(spec.start_date, "D")
    grid = start.astype("datetime64[m]") + STEP * np.arange(n * SLOTS_PER_DAY)
    lag = spec.text_signal_lag

    temp_anom = spec.temperature_anomaly_sd * _ar1(rng, n, 0.7)
    signal = _ar1(rng, n + lag, spec.text_persistence)  # days -lag .. n-1
    noise_channels = [_ar1(rng, n, spec.text_persistence) for _ in range(spec.n_noise_channels)]
    if spec.embedding_dims:
        loadings = rng.standard_normal(spec.embedding_dims)
        emb_noise = rng.standard_normal((n, spec.embedding_dims))
    slot_noise = rng.standard_normal(n * SLOTS_PER_DAY)

    _, year = calendar_phases(grid)
    hours = (np.arange(n * SLOTS_PER_DAY) % SLOTS_PER_DAY) / 2.0
    temp = (
        11.0
        - 7.0 * np.cos(year - 2.0 * np.pi * 20.0 / 365.25)
        + 3.0 * np.sin(2.0 * np.pi * (hours - 9.0) / 24.0)
        + np.repeat(temp_anom, SLOTS_PER_DAY)
    )
    s_today = signal[lag:]
    s_driver = signal[: n]  # s(d - lag) for d = 0 .. n-1
    demand = (
        seasonal_component(spec, grid)
        + spec.temperature_coupling * (temp - temp.mean())
        + spec.text_signal_gain * np.repeat(s_driver, SLOTS_PER_DAY)
        + spec.noise_sd * slot_noise
    )
    columns = {
        TARGET: demand,
        TEMPERATURE: temp,
        HOLIDAY: np.zeros(n * SLOTS_PER_DAY),
        "sentiment__signal": np.repeat(s_today, SLOTS_PER_DAY),
    }
    columns.update(calendar_columns(grid))
    for j, ch in enumerate(noise_channels, 1):
        columns[f"sentiment__noise_{j:02d}"] = np.repeat(ch, SLOTS_PER_DAY)
    if spec.embedding_dims:
        emb = np.outer(s_today, loadings) + spec.embedding_noise * emb_noise
        for j in range(spec.embedding_dims):
            columns[f"embedding__e{j:03d}"] = np.repeat(emb[:, j], SLOTS_PER_DAY)
    frame = SeriesFrame(grid, columns, {k: role_for_column(k) for k in columns})
    truth = {
        "formula": "profile*(1+weekly*cos(week)+annual*cos(year)) + coupling*(temp-mean) "
        "+ gain*s(d-lag) + noise_sd*N(0,1)",
        "signal_column": "sentiment__signal",
        "signal_lag_days": lag,
        "generator": "numpy PCG64",
        "spec": asdict(spec),
        "temperature_mean": float(temp.mean()),
    }
    return frame, truth
