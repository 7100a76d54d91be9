"""Normal-behaviour modelling of the gearbox IMS bearing temperature.

A model is trained per feature configuration on fault-free periods, then
applied to later data; the residual (observed minus predicted temperature)
is the anomaly signal consumed by the detection module.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .features import (
    DesignMatrix,
    FeatureConfig,
    build_design_matrix,
    standard_configs,
)
from .gbdt import (
    GbdtModel,
    TrainParams,
    fit,
    model_from_dict,
    model_to_dict,
    predict,
    regression_metrics,
)
from .scada import (
    DatasetSplit,
    ExclusionPolicy,
    FailureRecord,
    FarmDataset,
    SplitSpec,
    dataset_fingerprint,
    exclude_fault_periods,
    format_rfc3339,
    split_dataset,
)

logger = logging.getLogger(__name__)

_FORMAT = "nbm-model"
_VERSION = 1


@dataclass(frozen=True)
class NbmModel:
    """A fitted normal-behaviour model plus everything needed to retrain it
    bit-exactly from the same dataset."""

    config: FeatureConfig
    model: GbdtModel
    training_metadata: dict


@dataclass(frozen=True)
class ResidualSeries:
    """Observed minus predicted target temperature for one turbine.

    Timestamps are the subset of the turbine's timestamps at which every
    model input (and the target itself) was present.
    """

    turbine_id: str
    timestamps: np.ndarray
    residuals: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        res = np.asarray(self.residuals, dtype=np.float64)
        if ts.shape != res.shape or ts.ndim != 1:
            raise DataError("timestamps and residuals must be 1-D and aligned")
        if ts.size > 1 and np.any(np.diff(ts) <= 0):
            raise DataError("residual timestamps must be strictly increasing")
        ts.setflags(write=False)
        res.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "residuals", res)

    @property
    def n_samples(self) -> int:
        return int(self.timestamps.size)


def train_nbm(
    dataset: FarmDataset,
    failures: Sequence[FailureRecord],
    config: FeatureConfig,
    split: SplitSpec,
    params: TrainParams = TrainParams(),
    exclusion: ExclusionPolicy = ExclusionPolicy(),
) -> NbmModel:
    """Split chronologically, drop fault envelopes from the training and
    validation years, and fit the boosted-tree regressor.

    Validation data gets the same exclusion as training data: early stopping
    selects the tree count, and a validation set contaminated with fault
    behaviour would bias that selection toward models that track faults.
    """
    parts = split_dataset(dataset, split)
    train_clean = exclude_fault_periods(
        parts.train, failures, exclusion.before_days, exclusion.after_days
    )
    valid_clean = exclude_fault_periods(
        parts.validation, failures, exclusion.before_days, exclusion.after_days
    )
    train_dm = build_design_matrix(train_clean, config)
    valid_dm = build_design_matrix(valid_clean, config)
    if train_dm.n_rows == 0:
        raise DataError("no training rows remain after fault exclusion")
    if valid_dm.n_rows == 0:
        raise DataError("no validation rows remain after fault exclusion")
    model = fit(train_dm, valid_dm, params)
    metadata = {
        "feature_config": {
            "name": config.name,
            "lag_steps": list(config.lag_steps),
        },
        "split": {
            "train": _interval_json(split.train),
            "validation": _interval_json(split.validation),
            "test": _interval_json(split.test),
        },
        "exclusion": {
            "before_days": exclusion.before_days,
            "after_days": exclusion.after_days,
        },
        "params": {
            name: getattr(params, name) for name in TrainParams.__dataclass_fields__
        },
        "seed": params.seed,
        "dataset_fingerprint": dataset_fingerprint(dataset),
        "n_train_rows": train_dm.n_rows,
        "n_validation_rows": valid_dm.n_rows,
        "n_failures": len(list(failures)),
    }
    logger.info(
        "trained %s: %d trees (best %d), %d train rows",
        config.name, len(model.trees), model.best_iteration, train_dm.n_rows,
    )
    return NbmModel(config=config, model=model, training_metadata=metadata)


def _interval_json(interval) -> list[str]:
    return [format_rfc3339(interval.start), format_rfc3339(interval.end)]


def compute_residuals(
    model: NbmModel, dataset: FarmDataset
) -> list[ResidualSeries]:
    """Residual series per turbine, at complete-input rows only."""
    dm = build_design_matrix(dataset, model.config)
    preds = predict(model.model, dm)
    out = []
    for turbine_id in sorted(dataset.turbine_ids):
        mask = dm.row_turbines == turbine_id
        out.append(
            ResidualSeries(
                turbine_id=turbine_id,
                timestamps=dm.row_timestamps[mask],
                residuals=dm.y[mask] - preds[mask],
            )
        )
    return out


def healthy_subset(
    dataset: FarmDataset,
    failures: Sequence[FailureRecord],
    exclusion: ExclusionPolicy = ExclusionPolicy(),
    window_days: int = 60,
) -> FarmDataset:
    """Samples outside every failure's pre-failure window and outside the
    exclusion envelopes; the reference population for regression metrics
    and detection thresholds."""
    clean = exclude_fault_periods(
        dataset, failures, exclusion.before_days, exclusion.after_days
    )
    return exclude_fault_periods(clean, failures, window_days, 0)


def evaluate_regression(
    model: NbmModel,
    split: DatasetSplit,
    failures: Sequence[FailureRecord],
    window_days: int = 60,
) -> dict:
    """MAE/RMSE on known-healthy samples of the train and test sets."""
    excl = ExclusionPolicy(**model.training_metadata["exclusion"])
    out = {}
    for part_name, part in (("train", split.train), ("test", split.test)):
        healthy = healthy_subset(part, failures, excl, window_days)
        dm = build_design_matrix(healthy, model.config)
        if dm.n_rows == 0:
            raise DataError(f"no healthy {part_name} samples to evaluate")
        out[part_name] = regression_metrics(predict(model.model, dm), dm.y)
    return out


def nbm_to_dict(model: NbmModel) -> dict:
    return {
        "format": _FORMAT,
        "version": _VERSION,
        "config": {
            "name": model.config.name,
            "lag_steps": list(model.config.lag_steps),
        },
        "gbdt": model_to_dict(model.model),
        "training_metadata": model.training_metadata,
    }


def nbm_from_dict(data: dict) -> NbmModel:
    if not isinstance(data, dict) or data.get("format") != _FORMAT:
        raise DataError(f"not a {_FORMAT} document")
    if data.get("version") != _VERSION:
        raise DataError(f"unsupported model version {data.get('version')!r}")
    try:
        cfg_data = data["config"]
        lag_steps = tuple(cfg_data["lag_steps"])
        by_name = {
            c.name: c
            for c in standard_configs(lag_steps or (1,))
        }
        name = cfg_data["name"]
        if name not in by_name:
            raise DataError(f"unknown feature configuration {name!r}")
        config = by_name[name]
        return NbmModel(
            config=config,
            model=model_from_dict(data["gbdt"]),
            training_metadata=dict(data["training_metadata"]),
        )
    except KeyError as exc:
        raise DataError(f"model document missing key {exc}") from exc


def save_nbm(model: NbmModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(nbm_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_nbm(path) -> NbmModel:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON at line {exc.lineno}") from exc
    return nbm_from_dict(data)
