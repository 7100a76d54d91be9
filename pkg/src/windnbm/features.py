"""Feature causality taxonomy and design-matrix construction.

Inputs to a normal-behaviour model are classified by their causal relation to
the target temperature: Causal channels drive it without feedback,
Simultaneity channels are mutually coupled with it (a neighbouring bearing
joined by heat transfer), and AutoregressiveTarget features are lagged copies
of the target itself. The four standard model configurations differ only in
which classes they admit.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, UndefinedCorrelationError
from .scada import FarmDataset

logger = logging.getLogger(__name__)

#: Operating-regime channels that drive the target with no feedback.
CAUSAL_CHANNELS = (
    "wind_speed",
    "active_power",
    "rotor_speed",
    "pitch_angle",
    "ambient_temp",
)

#: The neighbouring bearing, coupled to the target by heat transfer.
SIMULTANEITY_CHANNEL = "gearbox_hss_bearing_temp"

TARGET_CHANNEL = "gearbox_ims_bearing_temp"

STANDARD_CONFIG_NAMES = ("CNBM", "SNBM", "ACNBM", "ASNBM")

DEFAULT_LAG_STEPS = (1, 6)


class FeatureTaxonomy(enum.Enum):
    CAUSAL = "causal"
    SIMULTANEITY = "simultaneity"
    AUTOREGRESSIVE_TARGET = "autoregressive_target"


@dataclass(frozen=True)
class FeatureConfig:
    """Channel set and lag specification for one model configuration.

    ``features`` pairs each input with its taxonomy tag; lag_steps applies to
    the AutoregressiveTarget entry and is expressed in resolution steps.
    """

    name: str
    target: str
    features: tuple[tuple[str, FeatureTaxonomy], ...]
    lag_steps: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "lag_steps", tuple(self.lag_steps))
        if self.name not in STANDARD_CONFIG_NAMES:
            raise ConfigError(
                f"config name {self.name!r} not one of {STANDARD_CONFIG_NAMES}"
            )
        if any(k <= 0 for k in self.lag_steps):
            raise ConfigError("lag_steps must be positive integers")
        if len(set(self.lag_steps)) != len(self.lag_steps):
            raise ConfigError("lag_steps must be distinct")
        tags = [tag for _, tag in self.features]
        n_simultaneity = sum(t is FeatureTaxonomy.SIMULTANEITY for t in tags)
        n_auto = sum(t is FeatureTaxonomy.AUTOREGRESSIVE_TARGET for t in tags)
        autoregressive = self.name.startswith("A")
        if autoregressive and not self.lag_steps:
            raise ConfigError(f"{self.name} requires non-empty lag_steps")
        if not autoregressive and self.lag_steps:
            raise ConfigError(f"{self.name} must have empty lag_steps")
        if autoregressive and n_auto != 1:
            raise ConfigError(
                f"{self.name} needs exactly one AutoregressiveTarget entry"
            )
        if not autoregressive and n_auto:
            raise ConfigError(f"{self.name} admits no AutoregressiveTarget entry")
        simultaneity = "S" in self.name
        if simultaneity and n_simultaneity != 1:
            raise ConfigError(f"{self.name} needs exactly one Simultaneity entry")
        if not simultaneity and n_simultaneity:
            raise ConfigError(f"{self.name} admits no Simultaneity entries")
        for channel, tag in self.features:
            if tag is FeatureTaxonomy.AUTOREGRESSIVE_TARGET and channel != self.target:
                raise ConfigError(
                    "AutoregressiveTarget entries must lag the target channel"
                )
            if tag is not FeatureTaxonomy.AUTOREGRESSIVE_TARGET and channel == self.target:
                raise ConfigError("the target cannot be its own instantaneous input")

    @property
    def column_names(self) -> tuple[str, ...]:
        """Design-matrix column names, in construction order."""
        names: list[str] = []
        for channel, tag in self.features:
            if tag is FeatureTaxonomy.AUTOREGRESSIVE_TARGET:
                names.extend(f"{channel}_lag{k}" for k in sorted(self.lag_steps))
            else:
                names.append(channel)
        return tuple(names)


@dataclass(frozen=True)
class DesignMatrix:
    """Complete-case feature matrix with aligned target and row identity."""

    feature_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    row_turbines: np.ndarray
    row_timestamps: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise DataError("X must be 2-D with one column per feature name")
        n = X.shape[0]
        if y.shape != (n,):
            raise DataError("target length must equal row count")
        if len(self.row_turbines) != n or len(self.row_timestamps) != n:
            raise DataError("row identity arrays must match row count")
        if n and (np.isnan(X).any() or np.isnan(y).any()):
            raise DataError("design matrix must be complete-case (no NaN)")
        for name, value in (("X", X), ("y", y)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_rows(self) -> int:
        return int(self.X.shape[0])


def pearson_correlation(x, y) -> float:
    """Product-moment correlation with pairwise removal of missing entries."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("inputs must be 1-D vectors of equal length")
    keep = ~(np.isnan(x) | np.isnan(y))
    x, y = x[keep], y[keep]
    if x.size < 2:
        raise UndefinedCorrelationError(
            f"need at least 2 complete pairs, have {x.size}"
        )
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("zero variance in one of the inputs")
    r = float(np.dot(dx, dy) / np.sqrt(sxx * syy))
    return max(-1.0, min(1.0, r))


def rank_channels_by_correlation(
    dataset: FarmDataset, target: str = TARGET_CHANNEL
) -> list[tuple[str, float]]:
    """Channels ranked by |Pearson r| with the target, pooled over turbines.

    The target itself is excluded; ties break by channel name ascending;
    channels with undefined correlation are skipped with a warning.
    """
    if target not in dataset.channel_catalog:
        raise DataError(f"target channel {target!r} not in catalog")
    pooled_target = np.concatenate(
        [t.channels[target] for t in dataset.turbines]
    )
    ranked = []
    for channel in dataset.channel_catalog:
        if channel == target:
            continue
        pooled = np.concatenate([t.channels[channel] for t in dataset.turbines])
        try:
            r = pearson_correlation(pooled, pooled_target)
        except UndefinedCorrelationError as exc:
            logger.warning("skipping channel %s: %s", channel, exc)
            continue
        ranked.append((channel, abs(r)))
    ranked.sort(key=lambda item: (-item[1], item[0]))
    return ranked


def standard_configs(
    lag_steps: tuple[int, ...] = DEFAULT_LAG_STEPS,
) -> list[FeatureConfig]:
    """The four model configurations: CNBM, SNBM, ACNBM, ASNBM."""
    if not lag_steps:
        raise ConfigError("lag_steps must be non-empty")
    causal = tuple((c, FeatureTaxonomy.CAUSAL) for c in CAUSAL_CHANNELS)
    sim = ((SIMULTANEITY_CHANNEL, FeatureTaxonomy.SIMULTANEITY),)
    auto = ((TARGET_CHANNEL, FeatureTaxonomy.AUTOREGRESSIVE_TARGET),)
    return [
        FeatureConfig("CNBM", TARGET_CHANNEL, causal),
        FeatureConfig("SNBM", TARGET_CHANNEL, causal + sim),
        FeatureConfig("ACNBM", TARGET_CHANNEL, causal + auto, tuple(lag_steps)),
        FeatureConfig(
            "ASNBM", TARGET_CHANNEL, causal + sim + auto, tuple(lag_steps)
        ),
    ]


def _lagged_column(
    timestamps: np.ndarray, values: np.ndarray, lag_steps: int, resolution_s: int
) -> np.ndarray:
    """Target value lag_steps earlier, NaN where that instant is absent."""
    wanted = timestamps - lag_steps * resolution_s
    pos = np.searchsorted(timestamps, wanted)
    pos_clipped = np.minimum(pos, timestamps.size - 1)
    found = timestamps[pos_clipped] == wanted
    out = np.where(found, values[pos_clipped], np.nan)
    return out


def build_design_matrix(dataset: FarmDataset, cfg: FeatureConfig) -> DesignMatrix:
    """One complete-input row per (turbine, timestamp), ordered by both.

    Lag k of the target at time t takes the target at t − k·resolution on the
    same turbine; a missing or non-contiguous instant there disqualifies the
    row, as does any missing input or missing target.
    """
    needed = {channel for channel, _ in cfg.features} | {cfg.target}
    missing = sorted(needed - set(dataset.channel_catalog))
    if missing:
        raise DataError(
            f"channels {missing} not present in dataset catalog "
            f"{list(dataset.channel_catalog)}"
        )
    names = cfg.column_names
    blocks_x = []
    blocks_y = []
    blocks_turbine = []
    blocks_ts = []
    for turbine in sorted(dataset.turbines, key=lambda t: t.turbine_id):
        target = turbine.channels[cfg.target]
        cols = []
        for channel, tag in cfg.features:
            if tag is FeatureTaxonomy.AUTOREGRESSIVE_TARGET:
                cols.extend(
                    _lagged_column(
                        turbine.timestamps, target, k, turbine.resolution_s
                    )
                    for k in sorted(cfg.lag_steps)
                )
            else:
                cols.append(turbine.channels[channel])
        x = np.column_stack(cols) if cols else np.empty((turbine.n_samples, 0))
        keep = ~np.isnan(target)
        if cols:
            keep &= ~np.isnan(x).any(axis=1)
        blocks_x.append(x[keep])
        blocks_y.append(target[keep])
        blocks_turbine.append(
            np.full(int(keep.sum()), turbine.turbine_id, dtype=object)
        )
        blocks_ts.append(turbine.timestamps[keep])
    return DesignMatrix(
        feature_names=names,
        X=np.concatenate(blocks_x, axis=0),
        y=np.concatenate(blocks_y),
        row_turbines=np.concatenate(blocks_turbine),
        row_timestamps=np.concatenate(blocks_ts),
    )
