"""Alarm generation: threshold residual series (or raw temperatures for the
naive baseline), then merge alarm bursts into episodes.

An episode is the unit the evaluation module counts, so one noisy exceedance
cluster produces one event instead of hundreds of 10-minute hits.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .nbm import ResidualSeries
from .scada import (
    SECONDS_PER_DAY,
    FarmDataset,
    TurbineSeries,
    format_rfc3339,
    parse_rfc3339,
)

DEFAULT_MERGE_GAP_DAYS = 3

# Tail masses for the default threshold sweep, from 1 in 100 down to 1 in
# 10,000; spaced geometrically because episode counts change on that scale.
# The deep end stops where a year of reference data still estimates the
# quantile from dozens of samples rather than from its single largest value.
DEFAULT_SWEEP_QUANTILES = tuple(1.0 - q for q in np.geomspace(1e-2, 1e-4, 16))

EPISODE_CSV_COLUMNS = ("turbine_id", "start", "end", "threshold")


@dataclass(frozen=True)
class ThresholdRule:
    """How a residual (or temperature) threshold is chosen.

    kind "absolute": ``value`` is the threshold in °C. kind "quantile":
    the threshold is the empirical ``value``-quantile of a reference sample
    (healthy training residuals, or healthy training temperatures for the
    baseline).
    """

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("absolute", "quantile"):
            raise ConfigError(
                f"threshold kind must be 'absolute' or 'quantile', got {self.kind!r}"
            )
        if self.kind == "quantile" and not (0.0 < self.value < 1.0):
            raise ConfigError("quantile must lie strictly between 0 and 1")
        if not math.isfinite(self.value):
            raise ConfigError("threshold value must be finite")

    def resolve(self, reference=None) -> float:
        """The concrete threshold in °C."""
        if self.kind == "absolute":
            return float(self.value)
        if reference is None:
            raise DataError("quantile threshold needs a reference sample")
        return empirical_quantile(reference, self.value)


@dataclass(frozen=True)
class AlarmEpisode:
    """A maximal run of alarms on one turbine with inter-arrival times no
    larger than the merge gap; start and end are member alarms (inclusive)."""

    turbine_id: str
    start: int
    end: int

    def __post_init__(self):
        if self.end < self.start:
            raise DataError("episode end must not precede start")


@dataclass(frozen=True)
class SweepPoint:
    """Episodes obtained at one threshold of a sweep."""

    quantile: float
    threshold: float
    episodes: tuple[AlarmEpisode, ...]

    def __post_init__(self):
        object.__setattr__(self, "episodes", tuple(self.episodes))


def empirical_quantile(sample, q: float) -> float:
    """Lower nearest-rank quantile: the ceil(q*n)-th smallest value.

    On (1, 2, 3) the median is 2. No interpolation, so the result is always
    an observed value and cross-implementation comparisons are exact.
    """
    values = np.asarray(sample, dtype=np.float64)
    if values.size == 0:
        raise DataError("empirical quantile of an empty sample")
    if not (0.0 < q < 1.0):
        raise ConfigError("quantile must lie strictly between 0 and 1")
    rank = math.ceil(q * values.size)
    return float(np.sort(values)[rank - 1])


def threshold_alarms(series: ResidualSeries, threshold: float) -> np.ndarray:
    """Timestamps where the residual strictly exceeds the threshold."""
    mask = series.residuals > threshold
    return series.timestamps[mask]


def baseline_alarms(
    series: TurbineSeries, channel: str, threshold: float
) -> np.ndarray:
    """Timestamps where the raw observed channel strictly exceeds the
    threshold; missing samples never alarm."""
    if channel not in series.channels:
        raise DataError(
            f"turbine {series.turbine_id} has no channel {channel!r}"
        )
    values = series.channels[channel]
    with np.errstate(invalid="ignore"):
        mask = values > threshold
    return series.timestamps[mask]


def group_episodes(
    turbine_id: str,
    alarms,
    merge_gap_s: int = DEFAULT_MERGE_GAP_DAYS * SECONDS_PER_DAY,
) -> list[AlarmEpisode]:
    """Merge alarms whose inter-arrival time is at most ``merge_gap_s``."""
    times = np.asarray(alarms, dtype=np.int64)
    if times.size == 0:
        return []
    if np.any(np.diff(times) < 0):
        raise DataError("alarms must be sorted ascending")
    if merge_gap_s < 0:
        raise ConfigError("merge_gap_s must be non-negative")
    breaks = np.flatnonzero(np.diff(times) > merge_gap_s)
    starts = np.concatenate([[0], breaks + 1])
    ends = np.concatenate([breaks, [times.size - 1]])
    return [
        AlarmEpisode(turbine_id, int(times[i]), int(times[j]))
        for i, j in zip(starts, ends)
    ]


def threshold_sweep(
    residuals: Sequence[ResidualSeries],
    reference,
    quantiles: Sequence[float] = DEFAULT_SWEEP_QUANTILES,
    merge_gap_s: int = DEFAULT_MERGE_GAP_DAYS * SECONDS_PER_DAY,
) -> list[SweepPoint]:
    """Episodes per threshold, one threshold per reference quantile.

    Quantiles that resolve to a threshold already produced are dropped (they
    would duplicate the episode set exactly), so the output thresholds are
    distinct and ascend with the surviving quantiles.
    """
    ref = np.asarray(reference, dtype=np.float64)
    if ref.size == 0:
        raise DataError("threshold sweep needs a non-empty reference sample")
    points = []
    seen = set()
    for q in sorted(quantiles):
        threshold = empirical_quantile(ref, q)
        if threshold in seen:
            continue
        seen.add(threshold)
        episodes: list[AlarmEpisode] = []
        for series in residuals:
            episodes.extend(
                group_episodes(
                    series.turbine_id,
                    threshold_alarms(series, threshold),
                    merge_gap_s,
                )
            )
        points.append(
            SweepPoint(quantile=q, threshold=threshold, episodes=tuple(episodes))
        )
    return points


def raw_target_series(dataset: FarmDataset, channel: str) -> list[ResidualSeries]:
    """Raw channel values wrapped as per-turbine value series, so the
    baseline can reuse the residual thresholding machinery; missing samples
    are dropped."""
    out = []
    for turbine in sorted(dataset.turbines, key=lambda t: t.turbine_id):
        if channel not in turbine.channels:
            raise DataError(
                f"turbine {turbine.turbine_id} has no channel {channel!r}"
            )
        values = turbine.channels[channel]
        keep = ~np.isnan(values)
        out.append(
            ResidualSeries(
                turbine_id=turbine.turbine_id,
                timestamps=turbine.timestamps[keep],
                residuals=values[keep],
            )
        )
    return out


def write_episodes_csv(path, rows: Iterable[tuple[AlarmEpisode, float]]) -> None:
    """Episode CSV: one row per (episode, threshold)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(EPISODE_CSV_COLUMNS)
        for episode, threshold in rows:
            writer.writerow(
                (
                    episode.turbine_id,
                    format_rfc3339(episode.start),
                    format_rfc3339(episode.end),
                    repr(float(threshold)),
                )
            )


def read_episodes_csv(path) -> list[tuple[AlarmEpisode, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(EPISODE_CSV_COLUMNS):
            raise DataError(
                f"{path}: expected header {','.join(EPISODE_CSV_COLUMNS)}"
            )
        rows = []
        for i, row in enumerate(reader, start=2):
            if len(row) != len(EPISODE_CSV_COLUMNS):
                raise DataError(f"{path}: row {i} has {len(row)} fields")
            turbine_id, start, end, threshold = row
            try:
                rows.append(
                    (
                        AlarmEpisode(
                            turbine_id, parse_rfc3339(start), parse_rfc3339(end)
                        ),
                        float(threshold),
                    )
                )
            except (ValueError, DataError) as exc:
                raise DataError(f"{path}: row {i}: {exc}") from exc
    return rows
