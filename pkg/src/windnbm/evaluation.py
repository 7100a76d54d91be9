"""Fault-classification scoring: alarm episodes versus failure records.

Each failure owes the detector one true positive, earned by any episode that
intersects the failure's prediction window; episodes touching only the short
pre-failure lead zone (too late to act on) or the post-failure repair period
score nothing, and every other episode is a false positive. Counting is per
episode, never per 10-minute alarm, so four alarms for one failure are one
detection, not four.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Collection, Optional, Sequence

import numpy as np

from .detection import AlarmEpisode, SweepPoint
from .errors import ConfigError, DataError
from .scada import SECONDS_PER_DAY, FailureRecord

PR_CSV_COLUMNS = ("threshold", "precision", "recall")


@dataclass(frozen=True)
class EvalConfig:
    """Window geometry around each failure, in days.

    An actionable detection must come earlier than ``lead_days`` before the
    failure but no earlier than ``window_days`` before it. Episodes within
    ``blackout_days`` after the failure are attributed to the failure's
    aftermath and score nothing.
    """

    window_days: int = 60
    lead_days: int = 15
    blackout_days: int = 30

    def __post_init__(self):
        if not (self.window_days > self.lead_days >= 0):
            raise ConfigError(
                "window geometry requires window_days > lead_days >= 0"
            )
        if self.blackout_days < 0:
            raise ConfigError("blackout_days must be non-negative")


@dataclass(frozen=True)
class PredictionWindow:
    """Scoring geometry of one failure.

    The prediction window is half-open [window_start, lead_start); the
    ignore zone is closed [lead_start, failure_time + blackout].
    """

    turbine_id: str
    window_start: int
    lead_start: int
    ignore_end: int

    @classmethod
    def from_failure(
        cls, failure: FailureRecord, cfg: EvalConfig
    ) -> "PredictionWindow":
        return cls(
            turbine_id=failure.turbine_id,
            window_start=failure.failure_time - cfg.window_days * SECONDS_PER_DAY,
            lead_start=failure.failure_time - cfg.lead_days * SECONDS_PER_DAY,
            ignore_end=failure.failure_time + cfg.blackout_days * SECONDS_PER_DAY,
        )

    def window_intersects(self, episode: AlarmEpisode) -> bool:
        # Episode endpoints are inclusive instants; window is half-open.
        return (
            episode.turbine_id == self.turbine_id
            and episode.start < self.lead_start
            and episode.end >= self.window_start
        )

    def ignore_intersects(self, episode: AlarmEpisode) -> bool:
        return (
            episode.turbine_id == self.turbine_id
            and episode.start <= self.ignore_end
            and episode.end >= self.lead_start
        )


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise DataError("confusion counts must be non-negative")

    @property
    def precision(self) -> Optional[float]:
        if self.tp + self.fp == 0:
            return None
        return self.tp / (self.tp + self.fp)

    @property
    def recall(self) -> Optional[float]:
        if self.tp + self.fn == 0:
            return None
        return self.tp / (self.tp + self.fn)


@dataclass(frozen=True)
class PRPoint:
    threshold: float
    precision: Optional[float]
    recall: Optional[float]


@dataclass(frozen=True)
class PRCurve:
    """Points ordered by ascending threshold; a point with undefined
    precision (no episodes at all) is a gap, kept for the record but
    excluded from area computations."""

    points: tuple[PRPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        thresholds = [p.threshold for p in self.points]
        if sorted(thresholds) != thresholds:
            raise DataError("PR points must be ordered by ascending threshold")
        if len(set(thresholds)) != len(thresholds):
            raise DataError("PR thresholds must be distinct")
        recalls = [p.recall for p in self.points if p.recall is not None]
        if any(b > a + 1e-12 for a, b in zip(recalls, recalls[1:])):
            raise DataError("recall must be non-increasing in the threshold")

    @property
    def defined_points(self) -> tuple[PRPoint, ...]:
        return tuple(p for p in self.points if p.precision is not None)


def label_episodes(
    episodes: Sequence[AlarmEpisode],
    failures: Sequence[FailureRecord],
    cfg: EvalConfig = EvalConfig(),
    known_turbines: Optional[Collection[str]] = None,
) -> ConfusionCounts:
    """Score episodes against failures.

    Per failure: one TP if any episode of that turbine intersects its
    prediction window, else one FN. Per episode: supporting any window makes
    it TP support (however many windows, and regardless of what else it
    touches); otherwise touching any ignore zone makes it scoreless;
    otherwise it is one FP.
    """
    if known_turbines is not None:
        known = set(known_turbines)
        for episode in episodes:
            if episode.turbine_id not in known:
                raise DataError(
                    f"episode on turbine {episode.turbine_id!r} which has no data"
                )
    windows = [PredictionWindow.from_failure(f, cfg) for f in failures]
    detected = [False] * len(windows)
    fp = 0
    for episode in episodes:
        hit = False
        for i, window in enumerate(windows):
            if window.window_intersects(episode):
                detected[i] = True
                hit = True
        if hit:
            continue
        if any(w.ignore_intersects(episode) for w in windows):
            continue
        fp += 1
    tp = sum(detected)
    return ConfusionCounts(tp=tp, fp=fp, fn=len(windows) - tp)


def pr_curve(
    sweep: Sequence[SweepPoint],
    failures: Sequence[FailureRecord],
    cfg: EvalConfig = EvalConfig(),
    known_turbines: Optional[Collection[str]] = None,
) -> PRCurve:
    """One PR point per sweep threshold."""
    thresholds = [point.threshold for point in sweep]
    if len(set(thresholds)) != len(thresholds):
        raise DataError("sweep thresholds must be distinct")
    points = []
    for point in sorted(sweep, key=lambda p: p.threshold):
        counts = label_episodes(point.episodes, failures, cfg, known_turbines)
        points.append(
            PRPoint(
                threshold=point.threshold,
                precision=counts.precision,
                recall=counts.recall,
            )
        )
    return PRCurve(points=tuple(points))


def auprc(curve: PRCurve) -> float:
    """Trapezoidal area under the precision-recall curve.

    Points are taken in recall order; runs of equal recall collapse to their
    best precision so verticals contribute no width.
    """
    defined = [
        (p.recall, p.precision)
        for p in curve.defined_points
        if p.recall is not None
    ]
    if len(defined) < 2:
        raise DataError("AUPRC needs at least 2 defined PR points")
    defined.sort(key=lambda rp: rp[0])
    collapsed: list[tuple[float, float]] = []
    for recall, precision in defined:
        if collapsed and collapsed[-1][0] == recall:
            collapsed[-1] = (recall, max(collapsed[-1][1], precision))
        else:
            collapsed.append((recall, precision))
    # All points at one recall: the curve is a vertical segment with no
    # horizontal extent, so the trapezoid sum degenerates to zero area.
    area = 0.0
    for (r0, p0), (r1, p1) in zip(collapsed, collapsed[1:]):
        area += (r1 - r0) * (p0 + p1) / 2.0
    return area


def write_pr_csv(path, curve: PRCurve) -> None:
    """PR curve as plot-ready CSV; undefined precision is an empty cell."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PR_CSV_COLUMNS)
        for p in curve.points:
            writer.writerow(
                (
                    repr(float(p.threshold)),
                    "" if p.precision is None else repr(float(p.precision)),
                    "" if p.recall is None else repr(float(p.recall)),
                )
            )


def read_pr_csv(path) -> PRCurve:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(PR_CSV_COLUMNS):
            raise DataError(f"{path}: expected header {','.join(PR_CSV_COLUMNS)}")
        points = []
        for i, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise DataError(f"{path}: row {i} has {len(row)} fields")
            try:
                points.append(
                    PRPoint(
                        threshold=float(row[0]),
                        precision=None if row[1] == "" else float(row[1]),
                        recall=None if row[2] == "" else float(row[2]),
                    )
                )
            except ValueError as exc:
                raise DataError(f"{path}: row {i}: {exc}") from exc
    return PRCurve(points=tuple(points))


def format_confusion(counts: ConfusionCounts) -> str:
    """Human-readable confusion summary."""
    precision = counts.precision
    recall = counts.recall
    return "\n".join(
        [
            f"tp: {counts.tp}",
            f"fp: {counts.fp}",
            f"fn: {counts.fn}",
            "precision: "
            + ("undefined (no episodes)" if precision is None else f"{precision:.4f}"),
            "recall: "
            + ("undefined (no failures)" if recall is None else f"{recall:.4f}"),
        ]
    )
