"""Tick cleaning, grid resampling, realized variance, and CSV I/O."""

import datetime as dt
import math

import numpy as np
import pytest

from intgarch import (
    DataError,
    DayBars,
    IntervalSeries,
    QuoteTick,
    SessionSpec,
    clean_quotes,
    day_bars_from_range,
    interval_returns,
    load_csv,
    make_day_bars,
    realized_variance,
    resample_to_grid,
    save_bars_csv,
    save_intervals_csv,
    save_ticks_csv,
)

T0 = dt.datetime(2024, 3, 4, 9, 30)


def tick(seconds, bid=None, ask=None, price=None):
    return QuoteTick(T0 + dt.timedelta(seconds=seconds), bid=bid, ask=ask, price=price)


def steady_day(n=60, outlier_at=None):
    """n quote ticks around mid 100, optionally one wild mid."""
    ticks = []
    for i in range(n):
        wiggle = 0.005 * ((i % 3) - 1)
        b, a = 99.99 + wiggle, 100.01 + wiggle
        if i == outlier_at:
            b, a = 119.99, 120.01
        ticks.append(tick(10 * i, bid=b, ask=a))
    return ticks


class TestQuoteTick:
    def test_spread_and_mid(self):
        t = tick(0, bid=10.0, ask=11.0)
        assert t.spread == pytest.approx(1.0)
        assert t.mid == pytest.approx(10.5)

    def test_negative_spread_representable(self):
        # crossed quotes must survive ingest so rule 2 can see them
        t = tick(0, bid=10.0, ask=9.0)
        assert t.spread == pytest.approx(-1.0)

    def test_price_only(self):
        t = tick(0, price=50.0)
        assert t.mid == pytest.approx(50.0)
        assert t.spread is None

    def test_requires_some_value(self):
        with pytest.raises(DataError, match="neither"):
            QuoteTick(T0)


class TestCleaningRules:
    def test_rule1_median_collapse(self):
        # same timestamp, bids {10, 12} and asks {11, 13} -> bid 11, ask 12
        ticks = [tick(0, bid=10.0, ask=11.0), tick(0, bid=12.0, ask=13.0), tick(5, bid=10.0, ask=10.4)]
        out = clean_quotes(ticks)
        assert len(out) == 2
        assert out[0].bid == pytest.approx(11.0)
        assert out[0].ask == pytest.approx(12.0)

    def test_rule2_negative_spread_deleted(self):
        ticks = [tick(0, bid=10.0, ask=10.2), tick(5, bid=10.0, ask=9.0), tick(10, bid=10.0, ask=10.2)]
        out = clean_quotes(ticks)
        assert len(out) == 2
        assert all(t.spread >= 0 for t in out)

    def test_rule3_wide_spread_deleted(self):
        # day's median spread 0.01; the 0.6 spread is 60x the median
        ticks = [tick(10 * i, bid=100.0, ask=100.01) for i in range(9)]
        ticks.append(tick(95, bid=99.7, ask=100.3))
        out = clean_quotes(ticks)
        assert len(out) == 9
        assert all(t.spread == pytest.approx(0.01) for t in out)

    def test_rule3_is_per_day(self):
        # a generally wide day must not be judged by another day's median
        narrow = [tick(10 * i, bid=100.0, ask=100.01) for i in range(9)]
        next_day = T0 + dt.timedelta(days=1)
        wide = [
            QuoteTick(next_day + dt.timedelta(seconds=10 * i), bid=100.0, ask=100.5)
            for i in range(9)
        ]
        out = clean_quotes(narrow + wide)
        assert len(out) == 18

    def test_rule4_outlier_mid_deleted(self):
        ticks = steady_day(60, outlier_at=30)
        out = clean_quotes(ticks)
        assert len(out) == 59
        assert all(abs(t.mid - 100.0) < 1.0 for t in out)

    def test_rule4_skipped_when_too_few_neighbors(self):
        ticks = steady_day(8, outlier_at=7)
        assert len(clean_quotes(ticks)) == 8

    def test_rule4_zero_mad_keeps_everything(self):
        ticks = [tick(i, bid=100.0, ask=100.02) for i in range(60)]
        assert len(clean_quotes(ticks)) == 60

    def test_idempotent(self):
        ticks = steady_day(60, outlier_at=30)
        ticks.append(tick(2, bid=99.99, ask=99.0))  # negative spread
        once = clean_quotes(ticks)
        twice = clean_quotes(once)
        assert twice == once

    def test_unsorted_input_sorted(self):
        ticks = [tick(10, bid=10.0, ask=10.1), tick(0, bid=10.0, ask=10.1)]
        out = clean_quotes(ticks)
        assert [t.timestamp for t in out] == sorted(t.timestamp for t in out)

    def test_empty_input(self):
        assert clean_quotes([]) == []

    def test_price_only_mode_dedups(self):
        ticks = [tick(0, price=10.0), tick(0, price=12.0), tick(5, price=11.0)]
        out = clean_quotes(ticks)
        assert len(out) == 2
        assert out[0].price == pytest.approx(11.0)  # median of {10, 12}

    def test_mixed_modes_rejected(self):
        ticks = [tick(0, bid=10.0, ask=10.1), tick(5, price=10.0)]
        with pytest.raises(DataError, match="mixed"):
            clean_quotes(ticks)


class TestResampling:
    def test_locf_on_grid(self):
        # ticks at 9:31 and 9:41; 5-minute grid points carry the last mid
        ticks = [tick(60, bid=99.0, ask=101.0), tick(660, bid=109.0, ask=111.0)]
        days = resample_to_grid(ticks)
        assert len(days) == 1
        lp = days[0].log_prices
        # grid 9:30 precedes the first tick and is dropped; 9:35 and 9:40
        # see mid 100, 9:45 onward mid 110
        assert lp[0] == pytest.approx(math.log(100.0))
        assert lp[1] == pytest.approx(math.log(100.0))
        assert lp[2] == pytest.approx(math.log(110.0))
        # 9:35..16:00 inclusive
        assert len(lp) == 78
        assert lp[-1] == pytest.approx(math.log(110.0))

    def test_custom_session(self):
        sess = SessionSpec(start=dt.time(9, 30), end=dt.time(10, 0), grid_minutes=15)
        ticks = [tick(0, bid=99.0, ask=101.0), tick(1200, bid=109.0, ask=111.0)]
        days = resample_to_grid(ticks, sess)
        lp = days[0].log_prices
        # grid 9:30, 9:45, 10:00
        assert len(lp) == 3
        assert lp == (
            pytest.approx(math.log(100.0)),
            pytest.approx(math.log(100.0)),
            pytest.approx(math.log(110.0)),
        )

    def test_sparse_day_skipped_with_warning(self):
        sess = SessionSpec(start=dt.time(9, 30), end=dt.time(10, 0), grid_minutes=30)
        ticks = [tick(1500, bid=99.0, ask=101.0)]  # only the 10:00 point survives
        with pytest.warns(UserWarning, match="fewer than 2"):
            days = resample_to_grid(ticks, sess)
        assert days == []

    def test_groups_by_day(self):
        next_day = T0 + dt.timedelta(days=1)
        ticks = [tick(0, bid=99.0, ask=101.0), tick(600, bid=99.0, ask=101.0)]
        ticks += [
            QuoteTick(next_day + dt.timedelta(seconds=s), bid=109.0, ask=111.0)
            for s in (0, 600)
        ]
        days = resample_to_grid(ticks)
        assert [d.date for d in days] == [T0.date(), next_day.date()]


class TestDayBars:
    def test_make_day_bars(self):
        d = make_day_bars(T0.date(), [0.0, 0.01, -0.01])
        assert d.min_log == -0.01
        assert d.max_log == 0.01
        assert d.rv == pytest.approx(0.0005)

    def test_invariants_enforced(self):
        with pytest.raises(DataError):
            DayBars(T0.date(), (0.0, 0.01), min_log=0.005, max_log=0.01, rv=1e-4)

    def test_from_range_default_rv(self):
        d = day_bars_from_range(T0.date(), min_log=1.0, max_log=1.3)
        assert d.log_prices is None
        assert d.rv == pytest.approx(0.09)

    def test_from_range_explicit_rv(self):
        d = day_bars_from_range(T0.date(), 1.0, 1.3, rv=0.02)
        assert d.rv == pytest.approx(0.02)

    def test_from_range_inverted(self):
        with pytest.raises(DataError):
            day_bars_from_range(T0.date(), min_log=1.3, max_log=1.0)


class TestRealizedVariance:
    def test_hand_values(self):
        assert realized_variance([0.0, 0.01]) == pytest.approx(1e-4)
        assert realized_variance([0.0, 0.01, -0.01]) == pytest.approx(5e-4)
        assert realized_variance([0.3, 0.3, 0.3]) == 0.0

    def test_accepts_day_bars(self):
        d = make_day_bars(T0.date(), [0.0, 0.01, -0.01])
        assert realized_variance(d) == pytest.approx(5e-4)

    def test_shift_invariance(self):
        rng = np.random.default_rng(2)
        lp = rng.normal(size=50).cumsum()
        assert realized_variance(lp + 7.5) == pytest.approx(realized_variance(lp), rel=1e-9)

    def test_insufficient(self):
        with pytest.raises(DataError, match="insufficient intraday"):
            realized_variance([0.1])
        d = day_bars_from_range(T0.date(), 0.0, 0.1)
        with pytest.raises(DataError, match="insufficient intraday"):
            realized_variance(d)


class TestIntervalReturns:
    @staticmethod
    def days_from_ranges(*ranges):
        start = T0.date()
        return [
            day_bars_from_range(start + dt.timedelta(days=i), lo, hi)
            for i, (lo, hi) in enumerate(ranges)
        ]

    def test_hand_case(self):
        # previous day spans {0, 2}, today {1, 3} -> return [-1, 3]
        days = self.days_from_ranges((0.0, 2.0), (1.0, 3.0))
        s = interval_returns(days)
        assert len(s) == 1
        assert s[0].lower == pytest.approx(-1.0)
        assert s[0].upper == pytest.approx(3.0)
        assert s[0].center == pytest.approx(1.0)
        assert s[0].radius == pytest.approx(2.0)

    def test_identical_days_symmetric(self):
        days = self.days_from_ranges((1.0, 1.4), (1.0, 1.4))
        iv = interval_returns(days)[0]
        assert iv.lower == pytest.approx(-0.4)
        assert iv.upper == pytest.approx(0.4)
        assert iv.center == pytest.approx(0.0)

    def test_constant_price_degenerate(self):
        days = self.days_from_ranges((1.0, 1.0), (1.0, 1.0))
        iv = interval_returns(days)[0]
        assert iv.lower == iv.upper == 0.0

    def test_radius_identity(self):
        # radius = (range_t + range_{t-1}) / 2, center = midrange difference
        rng = np.random.default_rng(4)
        mids = rng.normal(size=12)
        half = rng.uniform(0.01, 0.5, size=12)
        days = self.days_from_ranges(*zip(mids - half, mids + half))
        s = interval_returns(days)
        np.testing.assert_allclose(s.radii, (2 * half[1:] + 2 * half[:-1]) / 2, rtol=1e-12)
        np.testing.assert_allclose(s.centers, np.diff(mids), atol=1e-12)

    def test_dates_are_day_t(self):
        days = self.days_from_ranges((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))
        s = interval_returns(days)
        assert s.dates == (days[1].date, days[2].date)

    def test_needs_two_days(self):
        with pytest.raises(DataError, match="at least 2"):
            interval_returns(self.days_from_ranges((0.0, 1.0)))

    def test_duplicate_dates_rejected(self):
        d = day_bars_from_range(T0.date(), 0.0, 1.0)
        with pytest.raises(DataError, match="strictly increasing"):
            interval_returns([d, d])


class TestCsvRoundTrips:
    def test_intervals_bit_exact_on_dyadic_data(self, tmp_path):
        # on a 1/1024 grid every (center, radius) <-> (low, high) conversion
        # is exact in binary64, so the round trip is bit-for-bit
        rng = np.random.default_rng(10)
        dates = [T0.date() + dt.timedelta(days=i) for i in range(20)]
        c = np.round(rng.normal(size=20) * 1024) / 1024
        r = np.round(rng.gamma(2.0, 1.0, size=20) * 1024) / 1024
        s = IntervalSeries(c, r, dates=dates)
        p = tmp_path / "iv.csv"
        save_intervals_csv(s, p)
        assert load_csv(p, "intervals") == s

    def test_intervals_round_trip_within_one_ulp(self, tmp_path):
        # arbitrary floats may move by one unit in the last place through
        # the coordinate change; never more
        rng = np.random.default_rng(12)
        dates = [T0.date() + dt.timedelta(days=i) for i in range(50)]
        s = IntervalSeries(rng.normal(size=50), rng.gamma(2.0, 1.0, size=50), dates=dates)
        p = tmp_path / "iv.csv"
        save_intervals_csv(s, p)
        again = load_csv(p, "intervals")
        scale = np.abs(s.centers) + s.radii
        assert np.all(np.abs(again.centers - s.centers) <= 2 * np.spacing(scale))
        assert np.all(np.abs(again.radii - s.radii) <= 2 * np.spacing(scale))
        assert again.dates == s.dates

    def test_intervals_meta_comments_skipped(self, tmp_path):
        s = IntervalSeries([0.5], [0.25], dates=[T0.date()])
        p = tmp_path / "iv.csv"
        save_intervals_csv(s, p, meta={"seed": 7, "note": "x"})
        text = p.read_text()
        assert "# seed = 7" in text
        assert load_csv(p, "intervals") == s

    def test_bars_bit_exact(self, tmp_path):
        rng = np.random.default_rng(11)
        days = [
            day_bars_from_range(
                T0.date() + dt.timedelta(days=i),
                float(m - abs(r)),
                float(m + abs(r)),
                rv=float(abs(v)),
            )
            for i, (m, r, v) in enumerate(zip(rng.normal(size=10), rng.normal(size=10), rng.normal(size=10)))
        ]
        p = tmp_path / "bars.csv"
        save_bars_csv(days, p)
        again = load_csv(p, "daily_bars")
        assert [(d.date, d.min_log, d.max_log, d.rv) for d in again] == [
            (d.date, d.min_log, d.max_log, d.rv) for d in days
        ]

    def test_ticks_round_trip(self, tmp_path):
        ticks = [tick(0, bid=10.0, ask=10.5), tick(5, bid=10.1, ask=10.6, price=10.3)]
        p = tmp_path / "ticks.csv"
        save_ticks_csv(ticks, p)
        again = load_csv(p, "ticks")
        assert again == ticks


class TestCsvErrors:
    def test_high_below_low_names_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("date,low,high\n2024-01-02,0.1,0.5\n2024-01-03,0.5,0.1\n")
        with pytest.raises(DataError, match="line 3"):
            load_csv(p, "intervals")

    def test_comment_lines_keep_numbering(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("# generated by hand\ndate,low,high\n# another note\n2024-01-02,0.5,0.1\n")
        with pytest.raises(DataError, match="line 4"):
            load_csv(p, "intervals")

    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("date,low,high\n")
        with pytest.raises(DataError, match="no data rows"):
            load_csv(p, "intervals")

    def test_unparsable_value_names_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("date,low,high\n2024-01-02,abc,0.5\n")
        with pytest.raises(DataError, match="line 2"):
            load_csv(p, "intervals")

    def test_unknown_columns(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("date,low,high,extra\n2024-01-02,0.1,0.5,9\n")
        with pytest.raises(DataError):
            load_csv(p, "intervals")

    def test_unknown_schema(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("date,low,high\n2024-01-02,0.1,0.5\n")
        with pytest.raises(DataError, match="schema"):
            load_csv(p, "nope")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(tmp_path / "ghost.csv", "intervals")

    def test_unsorted_ticks_warn_and_sort(self, tmp_path):
        p = tmp_path / "ticks.csv"
        p.write_text(
            "timestamp,bid,ask\n"
            "2024-03-04T09:31:00,10.0,10.1\n"
            "2024-03-04T09:30:00,10.0,10.1\n"
        )
        with pytest.warns(UserWarning, match="sort"):
            ticks = load_csv(p, "ticks")
        assert ticks[0].timestamp < ticks[1].timestamp

    def test_long_format_daily_bars(self, tmp_path):
        p = tmp_path / "long.csv"
        p.write_text(
            "date,time,price\n"
            "2024-03-04,09:30:00,100.0\n"
            "2024-03-04,09:35:00,101.0\n"
            "2024-03-05,09:30:00,100.0\n"
            "2024-03-05,09:35:00,99.0\n"
        )
        days = load_csv(p, "daily_bars")
        assert len(days) == 2
        assert days[0].max_log == pytest.approx(math.log(101.0))
        assert days[0].rv == pytest.approx((math.log(101.0) - math.log(100.0)) ** 2)

    def test_long_format_single_point_day(self, tmp_path):
        p = tmp_path / "long.csv"
        p.write_text("date,time,price\n2024-03-04,09:30:00,100.0\n")
        with pytest.raises(DataError, match="insufficient intraday"):
            load_csv(p, "daily_bars")
