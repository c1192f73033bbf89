"""Core series container, calendar encoding, windowing and day segments."""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from newsload.errors import FrameInvariantError, SpanTooShort

SLOTS_PER_DAY = 48
LAG_DAYS = 7
LAG_STEPS = LAG_DAYS * SLOTS_PER_DAY
HORIZON = SLOTS_PER_DAY
STEP = np.timedelta64(30, "m")
YEAR_DAYS = 365.25

ROLES = ("target", "temperature", "calendar", "holiday")
TEXT_GROUPS = ("count", "wordfreq", "sentiment", "topic", "embedding")


def _is_valid_role(role):
    if role in ROLES:
        return True
    return role.startswith("text:") and len(role) > 5


def to_minutes(values):
    """Coerce timestamps (strings, datetimes, datetime64) to ``datetime64[m]``."""
    out = []
    for v in np.atleast_1d(values):
        if isinstance(v, str):
            s = v.strip()
            if s.endswith("Z"):
                s = s[:-1]
            elif s.endswith("+00:00"):
                s = s[:-6]
            out.append(np.datetime64(s, "m"))
        elif isinstance(v, dt.datetime):
            if v.tzinfo is not None:
                v = v.astimezone(dt.timezone.utc).replace(tzinfo=None)
            out.append(np.datetime64(v, "m"))
        else:
            out.append(np.datetime64(v, "m"))
    return np.array(out, dtype="datetime64[m]")


@dataclass(frozen=True)
class CalendarEncoding:
    week_sin: float
    week_cos: float
    year_sin: float
    year_cos: float


def calendar_phases(timestamps):
    """Week and year phases (radians) for an array of UTC timestamps.

    The week phase is zero at Monday 00:00, the year phase at Jan 1 00:00.
    """
    ts = np.asarray(timestamps, dtype="datetime64[m]")
    day = ts.astype("datetime64[D]")
    frac = (ts - day).astype(np.int64) / 1440.0
    # 1970-01-01 was a Thursday (Monday = 0)
    dow = (day.astype(np.int64) + 3) % 7
    year_start = ts.astype("datetime64[Y]").astype("datetime64[D]")
    doy0 = (day - year_start).astype(np.int64)
    week = 2.0 * np.pi * (dow + frac) / 7.0
    year = 2.0 * np.pi * (doy0 + frac) / YEAR_DAYS
    return week, year


def calendar_columns(timestamps):
    """Calendar channels keyed by their frame column names."""
    week, year = calendar_phases(timestamps)
    return {
        "cal_week_cos": np.cos(week),
        "cal_week_sin": np.sin(week),
        "cal_year_cos": np.cos(year),
        "cal_year_sin": np.sin(year),
    }


def encode_calendar(instant) -> CalendarEncoding:
    week, year = calendar_phases(to_minutes(instant))
    return CalendarEncoding(
        float(np.sin(week[0])), float(np.cos(week[0])),
        float(np.sin(year[0])), float(np.cos(year[0])),
    )


@dataclass(frozen=True)
class SeriesFrame:
    """Half-hourly multivariate table covering whole UTC days.

    ``columns`` maps channel names to float arrays; ``roles`` tags each one
    as ``target``, ``temperature``, ``calendar``, ``holiday`` or
    ``text:<group>``. Construction validates the invariants.
    """

    timestamps: np.ndarray
    columns: dict
    roles: dict

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[m]")
        object.__setattr__(self, "timestamps", ts)
        cols = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "roles", dict(self.roles))
        self._validate()

    def _validate(self):
        ts = self.timestamps
        n = len(ts)
        if n == 0 or n % SLOTS_PER_DAY:
            raise FrameInvariantError(f"frame must cover whole days, got {n} slots")
        if ts[0] != ts[0].astype("datetime64[D]"):
            raise FrameInvariantError("frame must start at 00:00 UTC")
        steps = np.diff(ts)
        if np.any(steps != STEP):
            bad = int(np.argmax(steps != STEP))
            raise FrameInvariantError(f"irregular spacing after {ts[bad]}")
        if set(self.columns) != set(self.roles):
            raise FrameInvariantError("every column needs exactly one role")
        for name, role in self.roles.items():
            if not _is_valid_role(role):
                raise FrameInvariantError(f"column {name!r} has invalid role {role!r}")
            if len(self.columns[name]) != n:
                raise FrameInvariantError(f"column {name!r} has wrong length")
        targets = [k for k, r in self.roles.items() if r == "target"]
        if len(targets) != 1:
            raise FrameInvariantError(f"expected one target column, found {len(targets)}")
        for name, role in self.roles.items():
            if role.startswith("text:"):
                daily = self.columns[name].reshape(-1, SLOTS_PER_DAY)
                if np.any(daily != daily[:, :1]):
                    raise FrameInvariantError(f"text column {name!r} varies within a day")

    @property
    def target_name(self):
        return next(k for k, r in self.roles.items() if r == "target")

    @property
    def n_days(self):
        return len(self.timestamps) // SLOTS_PER_DAY

    @property
    def dates(self):
        return self.timestamps[::SLOTS_PER_DAY].astype("datetime64[D]")

    def names(self, role=None):
        """Column names in lexicographic order, optionally filtered by role prefix."""
        out = sorted(self.columns)
        if role is None:
            return out
        return [k for k in out if self.roles[k] == role or self.roles[k].startswith(role + ":")]

    def daily(self, name):
        """Column reshaped to (days, 48)."""
        return self.columns[name].reshape(-1, SLOTS_PER_DAY)

    def daily_mean(self, name):
        return self.daily(name).mean(axis=1)

    def select(self, names):
        """Frame restricted to ``names``; the target column is always kept."""
        keep = set(names) | {self.target_name}
        return SeriesFrame(
            self.timestamps,
            {k: v for k, v in self.columns.items() if k in keep},
            {k: v for k, v in self.roles.items() if k in keep},
        )

    def with_columns(self, columns, roles):
        cols = dict(self.columns)
        cols.update(columns)
        rl = dict(self.roles)
        rl.update(roles)
        return SeriesFrame(self.timestamps, cols, rl)


@dataclass(frozen=True)
class SampleWindow:
    """Lag block of days D-7..D-1 and the 48 demand values of day D+1."""

    lag_block: np.ndarray
    target_block: np.ndarray
    anchor_day: np.datetime64
    feature_names: tuple = field(default=(), compare=False)


def eligible_anchor_indices(n_days):
    """Day indices D with D-7 >= 0 and D+1 < n_days."""
    return np.arange(LAG_DAYS, n_days - 1)


def make_windows(frame: SeriesFrame, split_date):
    """Cut the frame into day-ahead samples and split them chronologically.

    Windows anchored before ``split_date`` go to the training list.
    Feature channels are ordered by column name.
    """
    anchors = eligible_anchor_indices(frame.n_days)
    if len(anchors) == 0:
        raise SpanTooShort(f"{frame.n_days} days is too short for a {LAG_DAYS}-day lag window")
    names = tuple(frame.names())
    data = np.stack([frame.columns[k] for k in names], axis=1)
    target = frame.columns[frame.target_name]
    split = np.datetime64(split_date, "D")
    dates = frame.dates
    train, test = [], []
    for d in anchors:
        lo = (d - LAG_DAYS) * SLOTS_PER_DAY
        hi = d * SLOTS_PER_DAY
        t0 = (d + 1) * SLOTS_PER_DAY
        w = SampleWindow(
            data[lo:hi].copy(), target[t0 : t0 + HORIZON].copy(), dates[d], names
        )
        (train if dates[d] < split else test).append(w)
    return train, test


def stack_windows(windows):
    """Stack windows into ``(X, Y, anchors)`` arrays of shapes (N,336,F), (N,48), (N,)."""
    if not windows:
        return np.empty((0, LAG_STEPS, 0)), np.empty((0, HORIZON)), np.empty(0, "datetime64[D]")
    X = np.stack([w.lag_block for w in windows])
    Y = np.stack([w.target_block for w in windows])
    A = np.array([w.anchor_day for w in windows], dtype="datetime64[D]")
    return X, Y, A


@dataclass(frozen=True)
class DaySegment:
    label: str
    hour_range: tuple


SEGMENTS = (
    DaySegment("midnight", (1, 6)),
    DaySegment("morning", (7, 12)),
    DaySegment("afternoon", (13, 18)),
    DaySegment("evening", (19, 24)),
)
SEGMENT_LABELS = tuple(s.label for s in SEGMENTS)


def segment_of(slot_index: int) -> DaySegment:
    """Segment of a half-hour slot, labelled by the hour in which the slot ends."""
    if not 0 <= slot_index < SLOTS_PER_DAY:
        raise ValueError(f"slot index {slot_index} out of range")
    hour = slot_index // 2 + 1
    for seg in SEGMENTS:
        lo, hi = seg.hour_range
        if lo <= hour <= hi:
            return seg
    raise AssertionError("unreachable")  # pragma: no cover


def segment_slots(label):
    """Slot indices (0..47) belonging to segment ``label``."""
    return np.array([k for k in range(SLOTS_PER_DAY) if segment_of(k).label == label])
