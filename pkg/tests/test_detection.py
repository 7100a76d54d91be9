"""Tests for thresholding, episode grouping, and the threshold sweep."""

import numpy as np
import pytest

from windnbm.detection import (
    DEFAULT_SWEEP_QUANTILES,
    AlarmEpisode,
    ThresholdRule,
    baseline_alarms,
    empirical_quantile,
    group_episodes,
    raw_target_series,
    read_episodes_csv,
    threshold_alarms,
    threshold_sweep,
    write_episodes_csv,
)
from windnbm.errors import ConfigError, DataError
from windnbm.nbm import ResidualSeries
from windnbm.scada import SECONDS_PER_DAY, FarmDataset, TurbineSeries

DAY = SECONDS_PER_DAY


def series(values, turbine_id="T01", step=600):
    values = np.asarray(values, dtype=np.float64)
    return ResidualSeries(
        turbine_id=turbine_id,
        timestamps=np.arange(len(values), dtype=np.int64) * step,
        residuals=values,
    )


class TestEmpiricalQuantile:
    def test_median_of_three(self):
        assert empirical_quantile([1.0, 2.0, 3.0], 0.5) == 2.0

    def test_nearest_rank_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(1, 200))
            sample = rng.normal(size=n)
            q = float(rng.uniform(0.01, 0.99))
            expected = np.sort(sample)[int(np.ceil(q * n)) - 1]
            assert empirical_quantile(sample, q) == expected

    def test_result_is_an_observed_value(self):
        sample = [3.25, -1.5, 0.75]
        for q in (0.1, 0.5, 0.9):
            assert empirical_quantile(sample, q) in sample

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            empirical_quantile([], 0.5)

    def test_bounds_rejected(self):
        for q in (0.0, 1.0, -0.5, 1.5):
            with pytest.raises(ConfigError):
                empirical_quantile([1.0], q)


class TestThresholdRule:
    def test_absolute(self):
        assert ThresholdRule("absolute", 2.5).resolve() == 2.5

    def test_quantile(self):
        rule = ThresholdRule("quantile", 0.5)
        assert rule.resolve([1.0, 2.0, 3.0]) == 2.0

    def test_quantile_without_reference_rejected(self):
        with pytest.raises(DataError):
            ThresholdRule("quantile", 0.5).resolve()

    def test_bad_kind_rejected(self):
        with pytest.raises(ConfigError):
            ThresholdRule("percentile", 0.5)

    def test_quantile_bounds(self):
        with pytest.raises(ConfigError):
            ThresholdRule("quantile", 1.0)


class TestThresholdAlarms:
    def test_all_below_is_empty(self):
        assert threshold_alarms(series([0.1, 0.2, 0.3]), 1.0).size == 0

    def test_single_exceedance(self):
        out = threshold_alarms(series([0.1, 5.0, 0.2]), 1.0)
        assert out.tolist() == [600]

    def test_exceedance_is_strict(self):
        assert threshold_alarms(series([1.0, 1.0001]), 1.0).tolist() == [600]

    def test_count_matches_direct_scan(self):
        rng = np.random.default_rng(1)
        values = rng.normal(size=1000)
        s = series(values)
        threshold = empirical_quantile(values, 0.99)
        out = threshold_alarms(s, threshold)
        assert out.size == int((values > threshold).sum())

    def test_nesting_in_threshold(self):
        rng = np.random.default_rng(2)
        s = series(rng.normal(size=500))
        low = set(threshold_alarms(s, 0.5).tolist())
        high = set(threshold_alarms(s, 1.5).tolist())
        assert high <= low


class TestBaselineAlarms:
    def turbine(self, values):
        n = len(values)
        return TurbineSeries(
            turbine_id="T01",
            resolution_s=600,
            timestamps=np.arange(n, dtype=np.int64) * 600,
            channels={"gearbox_ims_bearing_temp": np.asarray(values, float)},
        )

    def test_above_max_empty(self):
        t = self.turbine([10.0, 20.0, 30.0])
        assert baseline_alarms(t, "gearbox_ims_bearing_temp", 31.0).size == 0

    def test_below_min_alarms_everywhere(self):
        t = self.turbine([10.0, 20.0, 30.0])
        out = baseline_alarms(t, "gearbox_ims_bearing_temp", 5.0)
        assert out.tolist() == [0, 600, 1200]

    def test_missing_samples_never_alarm(self):
        t = self.turbine([10.0, np.nan, 30.0])
        out = baseline_alarms(t, "gearbox_ims_bearing_temp", 5.0)
        assert out.tolist() == [0, 1200]

    def test_median_threshold_matches_direct_scan(self):
        rng = np.random.default_rng(3)
        values = rng.normal(size=501)
        t = self.turbine(values)
        threshold = float(np.median(values))
        out = baseline_alarms(t, "gearbox_ims_bearing_temp", threshold)
        assert out.size == int((values > threshold).sum())

    def test_unknown_channel_rejected(self):
        with pytest.raises(DataError, match="no channel"):
            baseline_alarms(self.turbine([1.0]), "nacelle_temp", 0.0)


class TestGroupEpisodes:
    def test_empty(self):
        assert group_episodes("T01", []) == []

    def test_cluster_becomes_one_episode(self):
        t = 1_000_000_000
        out = group_episodes("T01", [t, t + 600, t + 1200], merge_gap_s=DAY)
        assert out == [AlarmEpisode("T01", t, t + 1200)]

    def test_gap_splits(self):
        t = 1_000_000_000
        out = group_episodes("T01", [t, t + 5 * DAY], merge_gap_s=3 * DAY)
        assert out == [
            AlarmEpisode("T01", t, t),
            AlarmEpisode("T01", t + 5 * DAY, t + 5 * DAY),
        ]

    def test_interarrival_equal_to_gap_joins(self):
        t = 1_000_000_000
        out = group_episodes("T01", [t, t + 3 * DAY], merge_gap_s=3 * DAY)
        assert out == [AlarmEpisode("T01", t, t + 3 * DAY)]

    def test_unsorted_rejected(self):
        with pytest.raises(DataError, match="sorted"):
            group_episodes("T01", [600, 0])

    def test_matches_sequential_scan_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            n = int(rng.integers(1, 60))
            alarms = np.sort(rng.integers(0, 30 * DAY, size=n))
            gap = int(rng.integers(1, 5 * DAY))
            # Reference: walk the alarms and cut wherever the gap is exceeded.
            groups = [[int(alarms[0])]]
            for a, b in zip(alarms, alarms[1:]):
                if b - a > gap:
                    groups.append([])
                groups[-1].append(int(b))
            expected = [AlarmEpisode("T01", g[0], g[-1]) for g in groups]
            assert group_episodes("T01", alarms, gap) == expected

    def test_episode_cover_and_separation(self):
        rng = np.random.default_rng(5)
        alarms = np.sort(rng.integers(0, 50 * DAY, size=200))
        gap = 2 * DAY
        episodes = group_episodes("T01", alarms, gap)
        for alarm in alarms:
            assert any(e.start <= alarm <= e.end for e in episodes)
        for a, b in zip(episodes, episodes[1:]):
            assert b.start - a.end > gap

    def test_remerging_episode_bounds_is_identity(self):
        rng = np.random.default_rng(6)
        alarms = np.sort(rng.integers(0, 50 * DAY, size=100))
        gap = 2 * DAY
        episodes = group_episodes("T01", alarms, gap)
        # Separation > gap means interval-level merging changes nothing.
        merged = []
        for e in episodes:
            if merged and e.start - merged[-1].end <= gap:
                merged[-1] = AlarmEpisode("T01", merged[-1].start, e.end)
            else:
                merged.append(e)
        assert merged == episodes


class TestThresholdSweep:
    def test_median_convention(self):
        points = threshold_sweep(
            [series([0.0, 0.0, 0.0])], reference=[1.0, 2.0, 3.0], quantiles=(0.5,)
        )
        assert len(points) == 1
        assert points[0].threshold == 2.0

    def test_alarm_counts_non_increasing_in_quantile(self):
        rng = np.random.default_rng(7)
        s = series(rng.normal(size=2000))
        reference = rng.normal(size=2000)
        points = threshold_sweep([s], reference, quantiles=(0.5, 0.9, 0.99))
        counts = [
            sum(e.end - e.start for e in p.episodes) for p in points
        ]
        alarm_totals = [
            threshold_alarms(s, p.threshold).size for p in points
        ]
        assert alarm_totals == sorted(alarm_totals, reverse=True)
        assert counts == sorted(counts, reverse=True)

    def test_matches_individual_calls(self):
        rng = np.random.default_rng(8)
        residuals = [
            series(rng.normal(size=800), turbine_id="T01"),
            series(rng.normal(size=800), turbine_id="T02"),
        ]
        reference = rng.normal(size=5000)
        quantiles = tuple(np.linspace(0.5, 0.999, 20))
        points = threshold_sweep(residuals, reference, quantiles, merge_gap_s=DAY)
        for p in points:
            manual = []
            for s in residuals:
                manual.extend(
                    group_episodes(
                        s.turbine_id, threshold_alarms(s, p.threshold), DAY
                    )
                )
            assert list(p.episodes) == manual

    def test_duplicate_thresholds_dropped(self):
        points = threshold_sweep(
            [series([0.0])], reference=[1.0, 1.0, 1.0, 1.0], quantiles=(0.3, 0.6, 0.9)
        )
        assert len(points) == 1

    def test_empty_reference_rejected(self):
        with pytest.raises(DataError):
            threshold_sweep([series([0.0])], reference=[])

    def test_default_quantiles_span_expected_tails(self):
        tails = sorted(1.0 - q for q in DEFAULT_SWEEP_QUANTILES)
        assert len(tails) == 16
        assert tails[0] == pytest.approx(1e-5)
        assert tails[-1] == pytest.approx(1e-2)


class TestRawTargetSeries:
    def test_wraps_and_drops_missing(self):
        values = np.array([10.0, np.nan, 30.0])
        t = TurbineSeries(
            turbine_id="T01",
            resolution_s=600,
            timestamps=np.array([0, 600, 1200], dtype=np.int64),
            channels={"gearbox_ims_bearing_temp": values},
        )
        out = raw_target_series(
            FarmDataset(turbines=(t,)), "gearbox_ims_bearing_temp"
        )
        assert len(out) == 1
        assert out[0].timestamps.tolist() == [0, 1200]
        assert out[0].residuals.tolist() == [10.0, 30.0]

    def test_unknown_channel_rejected(self):
        t = TurbineSeries(
            turbine_id="T01",
            resolution_s=600,
            timestamps=np.array([0], dtype=np.int64),
            channels={"wind_speed": np.array([5.0])},
        )
        with pytest.raises(DataError, match="no channel"):
            raw_target_series(FarmDataset(turbines=(t,)), "gearbox_ims_bearing_temp")


class TestEpisodeCsv:
    def test_round_trip(self, tmp_path):
        rows = [
            (AlarmEpisode("T01", 1_300_000_200, 1_300_086_600), 1.25),
            (AlarmEpisode("T02", 1_300_000_200, 1_300_000_200), 0.5),
        ]
        path = tmp_path / "episodes.csv"
        write_episodes_csv(path, rows)
        assert read_episodes_csv(path) == rows

    def test_header_checked(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("turbine,begin,finish\n")
        with pytest.raises(DataError, match="header"):
            read_episodes_csv(path)

    def test_bad_row_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(
            "turbine_id,start,end,threshold\n"
            "T01,2011-01-01T00:00:00Z,2011-01-02T00:00:00Z,1.0\n"
            "T01,not-a-date,2011-01-02T00:00:00Z,1.0\n"
        )
        with pytest.raises(DataError, match="row 3"):
            read_episodes_csv(path)
