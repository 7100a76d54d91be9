"""SCADA data model, CSV ingestion, chronological splitting, and fault-period
exclusion.

All timestamps are integer seconds since the Unix epoch, UTC, aligned to the
series resolution (600 s for 10-minute data). Missing samples are explicit
NaN entries in the channel arrays; rows are never silently dropped. Time
intervals are half-open ``[start, end)`` throughout.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError

SECONDS_PER_DAY = 86400
DEFAULT_RESOLUTION_S = 600

#: Exact header of the SCADA CSV interface, in order.
SCADA_COLUMNS = (
    "timestamp",
    "turbine_id",
    "wind_speed",
    "active_power",
    "rotor_speed",
    "pitch_angle",
    "ambient_temp",
    "gearbox_hss_bearing_temp",
    "gearbox_ims_bearing_temp",
)

#: Channel names carried by every turbine series (SCADA columns minus keys).
CHANNEL_NAMES = SCADA_COLUMNS[2:]

#: Exact header of the failures CSV interface.
FAILURE_COLUMNS = ("turbine_id", "failure_time", "component")

# Exclusion envelope around a failure when cleaning training data. The
# pre-failure side matches the fault-state horizon used by the evaluation
# windows; the post-failure side covers repair and settling.
DEFAULT_EXCLUDE_BEFORE_DAYS = 60
DEFAULT_EXCLUDE_AFTER_DAYS = 30


def parse_rfc3339(text: str) -> int:
    """Parse an RFC 3339 UTC timestamp such as ``2012-01-01T00:10:00Z``."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise DataError(f"invalid timestamp {text!r}: {exc}") from None
    if dt.tzinfo is None:
        raise DataError(f"timestamp {text!r} has no UTC offset")
    return int(dt.timestamp())


def format_rfc3339(ts: int) -> str:
    """Format epoch seconds as an RFC 3339 UTC timestamp with Z suffix."""
    return datetime.fromtimestamp(int(ts), tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


@dataclass(frozen=True)
class TimeInterval:
    """Half-open interval ``[start, end)`` in epoch seconds."""

    start: int
    end: int

    def __post_init__(self):
        if self.end <= self.start:
            raise ConfigError(
                f"interval end {self.end} must be after start {self.start}"
            )

    def contains(self, ts) -> np.ndarray:
        ts = np.asarray(ts)
        return (ts >= self.start) & (ts < self.end)

    def overlaps(self, other: "TimeInterval") -> bool:
        return self.start < other.end and other.start < self.end

    @property
    def duration_s(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class TurbineSeries:
    """Multichannel 10-minute time series for one turbine.

    ``timestamps`` is strictly increasing with gaps that are positive
    multiples of ``resolution_s``; every channel array has the same length,
    with NaN marking missing samples.
    """

    turbine_id: str
    resolution_s: int
    timestamps: np.ndarray
    channels: Mapping[str, np.ndarray]

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        ts.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        if not self.turbine_id:
            raise DataError("turbine_id must be non-empty")
        if self.resolution_s <= 0:
            raise DataError("resolution_s must be positive")
        if ts.size and np.any(ts % self.resolution_s != 0):
            bad = int(ts[ts % self.resolution_s != 0][0])
            raise DataError(
                f"turbine {self.turbine_id}: timestamp {format_rfc3339(bad)} "
                f"not aligned to {self.resolution_s} s resolution"
            )
        gaps = np.diff(ts)
        if np.any(gaps <= 0):
            raise DataError(
                f"turbine {self.turbine_id}: timestamps must be strictly increasing"
            )
        channels = {}
        for name, values in self.channels.items():
            arr = np.asarray(values, dtype=np.float64)
            if arr.shape != ts.shape:
                raise DataError(
                    f"turbine {self.turbine_id}: channel {name} has "
                    f"{arr.size} samples, expected {ts.size}"
                )
            arr.setflags(write=False)
            channels[name] = arr
        object.__setattr__(self, "channels", channels)

    @property
    def n_samples(self) -> int:
        return int(self.timestamps.size)

    def subset(self, mask: np.ndarray) -> "TurbineSeries":
        """New series keeping only samples where ``mask`` is True."""
        return TurbineSeries(
            turbine_id=self.turbine_id,
            resolution_s=self.resolution_s,
            timestamps=self.timestamps[mask],
            channels={k: v[mask] for k, v in self.channels.items()},
        )


@dataclass(frozen=True)
class FarmDataset:
    """A collection of turbine series sharing a common channel catalog."""

    turbines: tuple[TurbineSeries, ...]
    channel_catalog: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        turbines = tuple(self.turbines)
        object.__setattr__(self, "turbines", turbines)
        if not turbines:
            raise DataError("dataset has no turbines")
        ids = [t.turbine_id for t in turbines]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate turbine_id in dataset")
        catalog = set(turbines[0].channels)
        for t in turbines[1:]:
            catalog &= set(t.channels)
        if not catalog:
            raise DataError("turbines share no common channel")
        object.__setattr__(self, "channel_catalog", tuple(sorted(catalog)))

    @property
    def turbine_ids(self) -> tuple[str, ...]:
        return tuple(t.turbine_id for t in self.turbines)

    def turbine(self, turbine_id: str) -> TurbineSeries:
        for t in self.turbines:
            if t.turbine_id == turbine_id:
                return t
        raise DataError(f"unknown turbine {turbine_id!r}")

    @property
    def n_samples(self) -> int:
        return sum(t.n_samples for t in self.turbines)


@dataclass(frozen=True)
class FailureRecord:
    """A dated component failure on one turbine; evaluation ground truth."""

    turbine_id: str
    failure_time: int
    component: str

    def __post_init__(self):
        if not self.turbine_id:
            raise DataError("turbine_id must be non-empty")
        if not self.component:
            raise DataError("component must be non-empty")


@dataclass(frozen=True)
class SplitSpec:
    """Chronologically ordered train/validation/test intervals."""

    train: TimeInterval
    validation: TimeInterval
    test: TimeInterval

    def __post_init__(self):
        intervals = (self.train, self.validation, self.test)
        for a, b in zip(intervals, intervals[1:]):
            if a.overlaps(b) or b.start < a.end:
                raise ConfigError(
                    "split intervals must be disjoint and ordered "
                    "train < validation < test"
                )


@dataclass(frozen=True)
class ExclusionPolicy:
    """Days removed around each failure when cleaning modelling data."""

    before_days: int = DEFAULT_EXCLUDE_BEFORE_DAYS
    after_days: int = DEFAULT_EXCLUDE_AFTER_DAYS

    def __post_init__(self):
        if self.before_days < 0 or self.after_days < 0:
            raise ConfigError("exclusion days must be non-negative")


@dataclass(frozen=True)
class DatasetSplit:
    """Result of a chronological three-way split."""

    train: FarmDataset
    validation: FarmDataset
    test: FarmDataset
    boundaries: tuple[TimeInterval, TimeInterval, TimeInterval]


def _parse_float_cell(cell: str, row_num: int, column: str) -> float:
    if cell == "":
        return float("nan")
    try:
        return float(cell)
    except ValueError:
        raise DataError(
            f"row {row_num}: cannot parse {column}={cell!r} as a number"
        ) from None


def load_scada_csv(path, resolution_s: int = DEFAULT_RESOLUTION_S) -> FarmDataset:
    """Load the SCADA CSV interface into a :class:`FarmDataset`.

    One series per distinct turbine_id, rows sorted by time, empty cells
    stored as NaN. Rejects unknown columns, duplicate (turbine, timestamp)
    pairs, and timestamps not aligned to ``resolution_s``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected header") from None
        if tuple(header) != SCADA_COLUMNS:
            raise DataError(
                f"{path}: header {header!r} does not match the SCADA schema "
                f"{list(SCADA_COLUMNS)!r}"
            )
        rows_by_turbine: dict[str, list[tuple[int, list[float]]]] = {}
        seen: set[tuple[str, int]] = set()
        for row_num, row in enumerate(reader, start=2):
            if len(row) != len(SCADA_COLUMNS):
                raise DataError(
                    f"{path} row {row_num}: expected {len(SCADA_COLUMNS)} "
                    f"columns, got {len(row)}"
                )
            ts = parse_rfc3339(row[0])
            if ts % resolution_s != 0:
                raise DataError(
                    f"{path} row {row_num}: timestamp {row[0]} not aligned "
                    f"to {resolution_s} s resolution"
                )
            turbine_id = row[1]
            if not turbine_id:
                raise DataError(f"{path} row {row_num}: empty turbine_id")
            key = (turbine_id, ts)
            if key in seen:
                raise DataError(
                    f"{path} row {row_num}: duplicate sample for turbine "
                    f"{turbine_id} at {row[0]}"
                )
            seen.add(key)
            values = [
                _parse_float_cell(cell, row_num, name)
                for cell, name in zip(row[2:], CHANNEL_NAMES)
            ]
            rows_by_turbine.setdefault(turbine_id, []).append((ts, values))
    if not rows_by_turbine:
        raise DataError(f"{path}: no data rows")
    turbines = []
    for turbine_id in sorted(rows_by_turbine):
        rows = sorted(rows_by_turbine[turbine_id], key=lambda r: r[0])
        timestamps = np.array([r[0] for r in rows], dtype=np.int64)
        matrix = np.array([r[1] for r in rows], dtype=np.float64)
        channels = {name: matrix[:, i] for i, name in enumerate(CHANNEL_NAMES)}
        turbines.append(
            TurbineSeries(turbine_id, resolution_s, timestamps, channels)
        )
    return FarmDataset(tuple(turbines))


def _format_value(value: float) -> str:
    if np.isnan(value):
        return ""
    return repr(float(value))


def write_scada_csv(dataset: FarmDataset, path) -> None:
    """Write a dataset in the SCADA CSV interface, ordered by (turbine, time)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCADA_COLUMNS)
        for turbine in sorted(dataset.turbines, key=lambda t: t.turbine_id):
            columns = [turbine.channels[name] for name in CHANNEL_NAMES]
            for i, ts in enumerate(turbine.timestamps):
                writer.writerow(
                    [format_rfc3339(int(ts)), turbine.turbine_id]
                    + [_format_value(col[i]) for col in columns]
                )


def load_failures_csv(path) -> list[FailureRecord]:
    """Load the failures CSV interface, sorted by failure_time."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected header") from None
        if tuple(header) != FAILURE_COLUMNS:
            raise DataError(
                f"{path}: header {header!r} does not match the failures "
                f"schema {list(FAILURE_COLUMNS)!r}"
            )
        records = []
        for row_num, row in enumerate(reader, start=2):
            if len(row) != len(FAILURE_COLUMNS):
                raise DataError(
                    f"{path} row {row_num}: expected {len(FAILURE_COLUMNS)} "
                    f"columns, got {len(row)}"
                )
            try:
                ts = parse_rfc3339(row[1])
            except DataError as exc:
                raise DataError(f"{path} row {row_num}: {exc}") from None
            records.append(FailureRecord(row[0], ts, row[2]))
    return sorted(records, key=lambda r: (r.failure_time, r.turbine_id))


def write_failures_csv(failures: Sequence[FailureRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(FAILURE_COLUMNS)
        for rec in failures:
            writer.writerow(
                [rec.turbine_id, format_rfc3339(rec.failure_time), rec.component]
            )


def check_failures_in_range(
    dataset: FarmDataset, failures: Iterable[FailureRecord]
) -> list[str]:
    """Warnings for failures dated outside the dataset's covered period."""
    warnings = []
    lo = min(
        (int(t.timestamps[0]) for t in dataset.turbines if t.n_samples), default=None
    )
    hi = max(
        (int(t.timestamps[-1]) for t in dataset.turbines if t.n_samples), default=None
    )
    for rec in failures:
        if lo is None or not (lo <= rec.failure_time <= hi):
            warnings.append(
                f"failure of {rec.turbine_id} at "
                f"{format_rfc3339(rec.failure_time)} lies outside the dataset "
                "period"
            )
    return warnings


def split_by_period(
    dataset: FarmDataset,
    train_interval: TimeInterval,
    validation_interval: TimeInterval,
    test_interval: TimeInterval,
) -> DatasetSplit:
    """Assign every sample to train, validation, test, or discard.

    Intervals must be pairwise disjoint and chronologically ordered; each is
    half-open, so a sample exactly on a boundary belongs to the interval it
    starts.
    """
    spec = SplitSpec(train_interval, validation_interval, test_interval)
    parts = []
    for interval in (spec.train, spec.validation, spec.test):
        turbines = tuple(
            t.subset(interval.contains(t.timestamps)) for t in dataset.turbines
        )
        parts.append(FarmDataset(turbines))
    return DatasetSplit(
        parts[0], parts[1], parts[2], (spec.train, spec.validation, spec.test)
    )


def split_dataset(dataset: FarmDataset, spec: SplitSpec) -> DatasetSplit:
    return split_by_period(dataset, spec.train, spec.validation, spec.test)


def exclude_fault_periods(
    dataset: FarmDataset,
    failures: Iterable[FailureRecord],
    before_days: int = DEFAULT_EXCLUDE_BEFORE_DAYS,
    after_days: int = DEFAULT_EXCLUDE_AFTER_DAYS,
) -> FarmDataset:
    """Remove each failing turbine's samples in the closed envelope
    ``[failure - before_days, failure + after_days]``. Idempotent; failures
    outside the data range are no-ops.
    """
    if before_days < 0 or after_days < 0:
        raise ConfigError("exclusion days must be non-negative")
    by_turbine: dict[str, list[FailureRecord]] = {}
    for rec in failures:
        by_turbine.setdefault(rec.turbine_id, []).append(rec)
    turbines = []
    for t in dataset.turbines:
        recs = by_turbine.get(t.turbine_id)
        if not recs:
            turbines.append(t)
            continue
        keep = np.ones(t.n_samples, dtype=bool)
        for rec in recs:
            lo = rec.failure_time - before_days * SECONDS_PER_DAY
            hi = rec.failure_time + after_days * SECONDS_PER_DAY
            keep &= ~((t.timestamps >= lo) & (t.timestamps <= hi))
        turbines.append(t.subset(keep))
    return FarmDataset(tuple(turbines))


def dataset_fingerprint(dataset: FarmDataset) -> str:
    """SHA-256 over the full dataset content; stable across processes."""
    digest = hashlib.sha256()
    for t in sorted(dataset.turbines, key=lambda t: t.turbine_id):
        digest.update(t.turbine_id.encode())
        digest.update(np.int64(t.resolution_s).tobytes())
        digest.update(t.timestamps.tobytes())
        for name in sorted(t.channels):
            digest.update(name.encode())
            digest.update(np.nan_to_num(t.channels[name], nan=-2.0**60).tobytes())
    return digest.hexdigest()
