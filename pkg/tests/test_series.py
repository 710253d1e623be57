import datetime as dt

import numpy as np
import pytest

from textcast import series
from textcast.errors import DegenerateError, GapError, ParseError, SpecError


def _write_csv(path, rows, header="date,value"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")


def test_load_series_parses_dates_and_values(tmp_path):
    p = tmp_path / "s.csv"
    _write_csv(p, ["2020-01-01,1.5", "2020-01-02,2.5", "2020-01-03,-3.0"])
    ts = series.load_series(p)
    assert ts.dates[0] == dt.date(2020, 1, 1)
    assert np.allclose(ts.values, [1.5, 2.5, -3.0])
    assert len(ts) == 3


def test_load_series_aggregates_subdaily_to_daily_mean(tmp_path):
    p = tmp_path / "s.csv"
    _write_csv(p, [
        "2020-01-01T00:00:00,1.0",
        "2020-01-01T12:00:00,3.0",
        "2020-01-02,5.0",
    ])
    ts = series.load_series(p)
    assert np.allclose(ts.values, [2.0, 5.0])


def test_load_series_reports_missing_days(tmp_path):
    p = tmp_path / "s.csv"
    _write_csv(p, ["2020-01-01,1.0", "2020-01-04,2.0"])
    with pytest.raises(GapError) as err:
        series.load_series(p)
    assert dt.date(2020, 1, 2) in err.value.missing_dates
    assert dt.date(2020, 1, 3) in err.value.missing_dates


def test_load_series_parse_error_names_line(tmp_path):
    p = tmp_path / "s.csv"
    _write_csv(p, ["2020-01-01,1.0", "2020-01-02,not-a-number"])
    with pytest.raises(ParseError) as err:
        series.load_series(p)
    assert ":3" in str(err.value)  # header is line 1


def test_save_load_round_trip_is_exact(tmp_path, daily_series):
    p = tmp_path / "out.csv"
    series.save_series(p, daily_series)
    again = series.load_series(p, unit=daily_series.unit)
    assert again.dates == daily_series.dates
    assert np.array_equal(again.values, daily_series.values)


def test_timeseries_rejects_unsorted_and_nonfinite():
    d1, d2 = dt.date(2020, 1, 2), dt.date(2020, 1, 1)
    with pytest.raises(SpecError):
        series.TimeSeries((d1, d2), np.array([1.0, 2.0]))
    with pytest.raises(SpecError):
        series.TimeSeries((d2, d1), np.array([1.0, np.nan]))


def test_fit_linear_trend_matches_least_squares_closed_form(daily_series):
    # independent closed form: slope = cov(t, y) / var(t)
    y = daily_series.values
    t = np.arange(len(y), dtype=np.float64)
    slope = ((t - t.mean()) * (y - y.mean())).sum() / ((t - t.mean()) ** 2).sum()
    intercept = y.mean() - slope * t.mean()
    trend = series.fit_linear_trend(daily_series)
    assert abs(trend.slope - slope) < 1e-12
    assert abs(trend.intercept - intercept) < 1e-12


def test_detrend_then_retrend_recovers_series(daily_series):
    trend = series.fit_linear_trend(daily_series)
    flat = series.detrend(daily_series, trend)
    back = series.retrend(flat, trend)
    assert np.allclose(back.values, daily_series.values, atol=1e-12)
    # the fitted trend removes the linear ramp entirely
    assert abs(series.fit_linear_trend(flat).slope) < 1e-12


def test_trend_extrapolates_beyond_fit_range(daily_series):
    trend = series.fit_linear_trend(daily_series)
    future = daily_series.end + dt.timedelta(days=10)
    expected = trend.intercept + trend.slope * (len(daily_series) - 1 + 10)
    assert abs(trend.at([future])[0] - expected) < 1e-12


def test_scale_minmax_bounds_and_inverse(daily_series):
    scaled, params = series.scale_minmax(daily_series)
    assert scaled.values.min() == 0.0
    assert scaled.values.max() == 1.0
    assert np.allclose(params.inverse(scaled.values), daily_series.values)
    # out-of-range values extrapolate instead of clipping
    assert params.transform(np.array([params.max + 1.0]))[0] > 1.0


def test_scale_minmax_rejects_constant_series():
    dates = tuple(dt.date(2020, 1, 1) + dt.timedelta(days=i) for i in range(3))
    flat = series.TimeSeries(dates, np.full(3, 7.0))
    with pytest.raises(DegenerateError):
        series.scale_minmax(flat)


def test_split_boundaries_are_inclusive(daily_series):
    spec = series.SplitSpec(dt.date(2020, 1, 10), dt.date(2020, 1, 20))
    train, val, test = series.split(daily_series, spec)
    assert train.end == dt.date(2020, 1, 10)
    assert val.start == dt.date(2020, 1, 11)
    assert val.end == dt.date(2020, 1, 20)
    assert test.start == dt.date(2020, 1, 21)
    assert len(train) + len(val) + len(test) == len(daily_series)


def test_split_rejects_empty_segments(daily_series):
    bad = series.SplitSpec(dt.date(2020, 1, 29), dt.date(2020, 1, 30))
    with pytest.raises(SpecError):
        series.split(daily_series, bad)  # empty test segment
    with pytest.raises(SpecError):
        series.SplitSpec(dt.date(2020, 1, 20), dt.date(2020, 1, 10))


def test_calendar_features_known_values():
    dates = [dt.date(2012, 1, 1), dt.date(2012, 12, 31),  # leap year
             dt.date(2013, 7, 1), dt.date(2020, 3, 2)]
    cal = series.calendar_features(dates)
    assert cal.time_of_year[0] == 0.0
    assert cal.time_of_year[1] == 1.0
    assert abs(cal.time_of_year[2] - (182 - 1) / 364) < 1e-12
    assert cal.day_of_week[3] == 0  # a Monday
    assert cal.day_of_week[0] == 6  # a Sunday
