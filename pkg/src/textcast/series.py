"""Daily scalar time series: loading, trend removal, scaling, splitting,
and calendar features.

A :class:`TimeSeries` is an immutable pairing of strictly increasing daily
dates with one float value each.  Sub-daily input rows are averaged to daily
resolution at load time; interior gaps are a load error, never imputed.
"""
from __future__ import annotations

import calendar
import csv
import datetime as dt
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateError, GapError, ParseError, SpecError

__all__ = [
    "TimeSeries",
    "TrendModel",
    "ScalingParams",
    "SplitSpec",
    "CalendarFeatures",
    "load_series",
    "save_series",
    "fit_linear_trend",
    "detrend",
    "retrend",
    "scale_minmax",
    "unscale",
    "split",
    "calendar_features",
]

_DAY = dt.timedelta(days=1)


@dataclass(frozen=True)
class TimeSeries:
    """Date-indexed real values. ``unit`` is a free-form tag ("MW", "degC", ...)."""

    dates: tuple
    values: np.ndarray
    unit: str = ""

    def __post_init__(self):
        dates = tuple(self.dates)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or len(dates) != values.shape[0]:
            raise SpecError("dates and values must be 1-d and the same length")
        if len(dates) == 0:
            raise SpecError("empty series")
        if not np.all(np.isfinite(values)):
            raise SpecError("series values must be finite")
        for a, b in zip(dates, dates[1:]):
            if b <= a:
                raise SpecError(f"dates not strictly increasing at {a} -> {b}")

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def start(self) -> dt.date:
        return self.dates[0]

    @property
    def end(self) -> dt.date:
        return self.dates[-1]

    def with_values(self, values: np.ndarray) -> "TimeSeries":
        """Same dates/unit, new values."""
        return TimeSeries(self.dates, values, self.unit)


@dataclass(frozen=True)
class TrendModel:
    """Least-squares line ``value ~ slope * t + intercept`` where t counts days
    from ``origin`` (t = 0 at the first fitted date)."""

    slope: float
    intercept: float
    origin: dt.date

    def day_index(self, dates) -> np.ndarray:
        return np.array([(d - self.origin).days for d in dates], dtype=np.float64)

    def at(self, dates) -> np.ndarray:
        """Trend values for arbitrary dates (extrapolates on the same index)."""
        return self.slope * self.day_index(dates) + self.intercept


@dataclass(frozen=True)
class ScalingParams:
    """Min-max parameters of the fitting range."""

    min: float
    max: float

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.min) / (self.max - self.min)

    def inverse(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * (self.max - self.min) + self.min


@dataclass(frozen=True)
class SplitSpec:
    """Chronological split boundaries, both inclusive in the earlier segment."""

    train_end: dt.date
    validation_end: dt.date

    def __post_init__(self):
        if self.train_end >= self.validation_end:
            raise SpecError("train_end must precede validation_end")


@dataclass(frozen=True)
class CalendarFeatures:
    """Per-date calendar covariates, vectorized over a date list."""

    time_of_year: np.ndarray  # float in [0, 1]
    day_of_week: np.ndarray  # int, Monday = 0


def _parse_date(raw: str) -> dt.date:
    # accepts plain dates and ISO timestamps; only the date part matters
    return dt.date.fromisoformat(raw.strip()[:10])


def load_series(
    path,
    date_field: str = "date",
    value_field: str = "value",
    unit: str = "",
) -> TimeSeries:
    """Read a delimited text file into a daily :class:`TimeSeries`.

    Sub-daily rows sharing a date are averaged.  Missing calendar days between
    the first and last date raise :class:`GapError`; rows that fail to parse
    raise :class:`ParseError` with their line number.
    """
    sums: dict = {}
    counts: dict = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(f"{path}: empty file")
        for missing in (date_field, value_field):
            if missing not in reader.fieldnames:
                raise ParseError(f"{path}: missing column '{missing}'")
        for row in reader:
            lineno = reader.line_num
            try:
                date = _parse_date(row[date_field])
                value = float(row[value_field])
            except (ValueError, TypeError, AttributeError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if not np.isfinite(value):
                raise ParseError(f"{path}:{lineno}: non-finite value")
            sums[date] = sums.get(date, 0.0) + value
            counts[date] = counts.get(date, 0) + 1
    if not sums:
        raise ParseError(f"{path}: no data rows")
    dates = sorted(sums)
    missing_days = []
    day = dates[0]
    present = set(dates)
    while day <= dates[-1]:
        if day not in present:
            missing_days.append(day)
        day += _DAY
    if missing_days:
        raise GapError(missing_days)
    values = np.array([sums[d] / counts[d] for d in dates], dtype=np.float64)
    return TimeSeries(tuple(dates), values, unit)


def save_series(path, series: TimeSeries, date_field: str = "date", value_field: str = "value") -> None:
    """Write a series back out in the load format (daily resolution)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([date_field, value_field])
        for d, v in zip(series.dates, series.values):
            writer.writerow([d.isoformat(), repr(float(v))])


def fit_linear_trend(series: TimeSeries) -> TrendModel:
    """Ordinary least squares of value on day index (0-based at series start)."""
    if len(series) < 2:
        raise DegenerateError("need at least two days to fit a trend")
    t = np.arange(len(series), dtype=np.float64)
    slope, intercept = np.polyfit(t, series.values, deg=1)
    return TrendModel(float(slope), float(intercept), series.start)


def detrend(series: TimeSeries, trend: TrendModel) -> TimeSeries:
    """Subtract the trend line. ``retrend`` restores the original values
    (binary-identical when values and trend are of comparable magnitude, the
    case for fitted trends on positive series)."""
    return series.with_values(series.values - trend.at(series.dates))


def retrend(series: TimeSeries, trend: TrendModel) -> TimeSeries:
    """Add the trend line back (inverse of :func:`detrend`)."""
    return series.with_values(series.values + trend.at(series.dates))


def scale_minmax(series: TimeSeries):
    """Map the fitted range onto [0, 1]; returns (scaled series, params).

    Out-of-range values at prediction time map outside [0, 1]; no clipping.
    """
    lo = float(series.values.min())
    hi = float(series.values.max())
    if hi <= lo:
        raise DegenerateError("constant series cannot be min-max scaled")
    params = ScalingParams(lo, hi)
    return series.with_values(params.transform(series.values)), params


def unscale(series: TimeSeries, params: ScalingParams) -> TimeSeries:
    """Invert :func:`scale_minmax` (within roundoff)."""
    return series.with_values(params.inverse(series.values))


def split(series: TimeSeries, spec: SplitSpec):
    """Chronological (train, validation, test) segments.

    ``train_end`` and ``validation_end`` fall in the earlier segment; the three
    parts are disjoint, contiguous and cover the series exactly.
    """
    if not (series.start <= spec.train_end and spec.validation_end < series.end):
        raise SpecError(
            f"split boundaries {spec.train_end}/{spec.validation_end} outside "
            f"series range {series.start}..{series.end}"
        )
    dates = series.dates
    n_train = sum(1 for d in dates if d <= spec.train_end)
    n_val = sum(1 for d in dates if spec.train_end < d <= spec.validation_end)
    if n_train == 0 or n_val == 0:
        raise SpecError("every split segment must be non-empty")
    a, b = n_train, n_train + n_val
    mk = lambda lo, hi: TimeSeries(dates[lo:hi], series.values[lo:hi], series.unit)
    return mk(0, a), mk(a, b), mk(b, len(dates))


def calendar_features(dates) -> CalendarFeatures:
    """time_of_year = (day_of_year - 1)/(days_in_year - 1); day_of_week Monday=0.

    Jan 1 maps to 0.0 and Dec 31 to 1.0 in every year, leap or not.
    """
    toy = np.empty(len(dates), dtype=np.float64)
    dow = np.empty(len(dates), dtype=np.int64)
    for i, d in enumerate(dates):
        doy = d.timetuple().tm_yday
        days_in_year = 366 if calendar.isleap(d.year) else 365
        toy[i] = (doy - 1) / (days_in_year - 1)
        dow[i] = d.weekday()
    return CalendarFeatures(toy, dow)
