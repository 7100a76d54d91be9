"""End-to-end experiment: data -> four models -> residuals -> threshold
sweeps -> PR curves and AUPRC, with a raw-temperature baseline, written to a
self-describing output directory."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .detection import (
    DEFAULT_MERGE_GAP_DAYS,
    DEFAULT_SWEEP_QUANTILES,
    raw_target_series,
    threshold_sweep,
)
from .errors import ConfigError, DataError
from .evaluation import EvalConfig, PRCurve, auprc, pr_curve, write_pr_csv
from .features import TARGET_CHANNEL, standard_configs
from .gbdt import TrainParams
from .nbm import (
    NbmModel,
    compute_residuals,
    evaluate_regression,
    healthy_subset,
    save_nbm,
    train_nbm,
)
from .scada import (
    SECONDS_PER_DAY,
    ExclusionPolicy,
    FailureRecord,
    FarmDataset,
    SplitSpec,
    TimeInterval,
    format_rfc3339,
    load_failures_csv,
    load_scada_csv,
    parse_rfc3339,
    split_dataset,
)
from .simulator import (
    SimConfig,
    default_sim_config,
    load_scenario_file,
    sim_config_from_dict,
    sim_config_to_dict,
    simulate_farm,
)

logger = logging.getLogger(__name__)

MODEL_NAMES = ("CNBM", "SNBM", "ACNBM", "ASNBM")
BASELINE_NAME = "baseline"


@dataclass(frozen=True)
class DataSource:
    """Where the farm data comes from: a simulator scenario (file path or
    inline config), or a pair of SCADA + failures CSVs."""

    scenario_path: Optional[str] = None
    scenario: Optional[SimConfig] = None
    scada_path: Optional[str] = None
    failures_path: Optional[str] = None

    def __post_init__(self):
        from_csv = self.scada_path is not None or self.failures_path is not None
        chosen = sum(
            (
                self.scenario_path is not None,
                self.scenario is not None,
                from_csv,
            )
        )
        if chosen != 1:
            raise ConfigError(
                "data source must be exactly one of: a scenario file, an "
                "inline scenario, or a scada_csv/failures_csv pair"
            )
        if from_csv and (self.scada_path is None or self.failures_path is None):
            raise ConfigError(
                "csv data source needs both scada_csv and failures_csv"
            )


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataSource
    split: SplitSpec
    lag_steps: tuple[int, ...] = (1, 6)
    train_params: TrainParams = TrainParams()
    sweep_quantiles: tuple[float, ...] = DEFAULT_SWEEP_QUANTILES
    evaluation: EvalConfig = EvalConfig()
    merge_gap_days: int = DEFAULT_MERGE_GAP_DAYS
    exclusion: ExclusionPolicy = ExclusionPolicy()
    seed: Optional[int] = None
    output_dir: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "lag_steps", tuple(self.lag_steps))
        object.__setattr__(
            self, "sweep_quantiles", tuple(float(q) for q in self.sweep_quantiles)
        )
        if self.merge_gap_days < 0:
            raise ConfigError("merge_gap_days must be non-negative")
        if not self.sweep_quantiles:
            raise ConfigError("sweep_quantiles must be non-empty")
        for q in self.sweep_quantiles:
            if not (0.0 < q < 1.0):
                raise ConfigError("sweep quantiles must lie strictly in (0, 1)")


@dataclass
class ModelOutcome:
    """Everything the experiment derives from one feature configuration."""

    model: NbmModel
    regression: dict
    curve: PRCurve
    auprc: Optional[float]
    auprc_note: str = ""


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    dataset: FarmDataset
    failures: list[FailureRecord]
    eval_failures: list[FailureRecord]
    outcomes: dict[str, ModelOutcome] = field(default_factory=dict)
    baseline_curve: Optional[PRCurve] = None
    baseline_auprc: Optional[float] = None
    baseline_auprc_note: str = ""
    output_dir: Optional[str] = None


def _interval_from_json(value, context: str) -> TimeInterval:
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        raise ConfigError(f"{context} must be a [start, end] pair")
    return TimeInterval(parse_rfc3339(value[0]), parse_rfc3339(value[1]))


def _build_section(data: dict, cls, context: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{context} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(
            f"{context}: unknown keys {unknown}; known keys are {sorted(known)}"
        )
    return cls(**data)


def experiment_config_from_dict(data: dict, base_dir: str = ".") -> ExperimentConfig:
    """Build an ExperimentConfig from its JSON form.

    Relative paths are resolved against ``base_dir`` (the config file's
    directory), so a config travels with its data.
    """
    if not isinstance(data, dict):
        raise ConfigError("experiment config must be a JSON object")
    known = {
        "data",
        "split",
        "lag_steps",
        "train_params",
        "sweep_quantiles",
        "evaluation",
        "merge_gap_days",
        "exclusion",
        "seed",
        "output_dir",
    }
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(
            f"experiment config: unknown keys {unknown}; known keys are "
            f"{sorted(known)}"
        )

    def path(value):
        return value if value is None else os.path.join(base_dir, value)

    if "data" not in data or not isinstance(data["data"], dict):
        raise ConfigError("experiment config needs a 'data' object")
    src = data["data"]
    unknown = sorted(
        set(src) - {"scenario", "scenario_inline", "scada_csv", "failures_csv"}
    )
    if unknown:
        raise ConfigError(f"data: unknown keys {unknown}")
    inline = src.get("scenario_inline")
    source = DataSource(
        scenario_path=path(src.get("scenario")),
        scenario=None if inline is None else sim_config_from_dict(inline),
        scada_path=path(src.get("scada_csv")),
        failures_path=path(src.get("failures_csv")),
    )
    if "split" not in data or not isinstance(data["split"], dict):
        raise ConfigError("experiment config needs a 'split' object")
    split = SplitSpec(
        train=_interval_from_json(data["split"].get("train"), "split.train"),
        validation=_interval_from_json(
            data["split"].get("validation"), "split.validation"
        ),
        test=_interval_from_json(data["split"].get("test"), "split.test"),
    )
    output_dir = data.get("output_dir")
    return ExperimentConfig(
        data=source,
        split=split,
        lag_steps=tuple(data.get("lag_steps", (1, 6))),
        train_params=_build_section(
            data.get("train_params", {}), TrainParams, "train_params"
        ),
        sweep_quantiles=tuple(data.get("sweep_quantiles", DEFAULT_SWEEP_QUANTILES)),
        evaluation=_build_section(
            data.get("evaluation", {}), EvalConfig, "evaluation"
        ),
        merge_gap_days=data.get("merge_gap_days", DEFAULT_MERGE_GAP_DAYS),
        exclusion=_build_section(
            data.get("exclusion", {}), ExclusionPolicy, "exclusion"
        ),
        seed=data.get("seed"),
        output_dir=path(output_dir),
    )


def experiment_config_to_dict(cfg: ExperimentConfig) -> dict:
    """JSON form of a config; inverse of experiment_config_from_dict up to
    path resolution."""
    interval = lambda iv: [format_rfc3339(iv.start), format_rfc3339(iv.end)]
    data: dict = {}
    if cfg.data.scenario_path is not None:
        data["scenario"] = cfg.data.scenario_path
    elif cfg.data.scenario is not None:
        data["scenario_inline"] = sim_config_to_dict(cfg.data.scenario)
    else:
        data["scada_csv"] = cfg.data.scada_path
        data["failures_csv"] = cfg.data.failures_path
    return {
        "data": data,
        "split": {
            "train": interval(cfg.split.train),
            "validation": interval(cfg.split.validation),
            "test": interval(cfg.split.test),
        },
        "lag_steps": list(cfg.lag_steps),
        "train_params": {
            f.name: getattr(cfg.train_params, f.name)
            for f in dataclasses.fields(TrainParams)
        },
        "sweep_quantiles": list(cfg.sweep_quantiles),
        "evaluation": {
            "window_days": cfg.evaluation.window_days,
            "lead_days": cfg.evaluation.lead_days,
            "blackout_days": cfg.evaluation.blackout_days,
        },
        "merge_gap_days": cfg.merge_gap_days,
        "exclusion": {
            "before_days": cfg.exclusion.before_days,
            "after_days": cfg.exclusion.after_days,
        },
        "seed": cfg.seed,
        "output_dir": cfg.output_dir,
    }


def load_experiment_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}") from exc
    return experiment_config_from_dict(data, base_dir=os.path.dirname(str(path)) or ".")


def load_experiment_data(
    cfg: ExperimentConfig,
) -> tuple[FarmDataset, list[FailureRecord]]:
    """Materialize the farm data: simulate the scenario (applying the
    experiment seed override, if any) or read the CSV pair."""
    sim = cfg.data.scenario
    if cfg.data.scenario_path is not None:
        sim = load_scenario_file(cfg.data.scenario_path)
    if sim is not None:
        if cfg.seed is not None:
            sim = dataclasses.replace(sim, seed=cfg.seed)
        return simulate_farm(sim)
    dataset = load_scada_csv(cfg.data.scada_path)
    failures = load_failures_csv(cfg.data.failures_path)
    return dataset, failures


def default_experiment_config(seed: Optional[int] = None) -> ExperimentConfig:
    """Reference protocol on the reference farm: train on the first year,
    validate on the second, test on the failure year."""
    return ExperimentConfig(
        data=DataSource(scenario=default_sim_config()),
        split=SplitSpec(
            train=TimeInterval(
                parse_rfc3339("2010-01-01T00:00:00Z"),
                parse_rfc3339("2011-01-01T00:00:00Z"),
            ),
            validation=TimeInterval(
                parse_rfc3339("2011-01-01T00:00:00Z"),
                parse_rfc3339("2012-01-01T00:00:00Z"),
            ),
            test=TimeInterval(
                parse_rfc3339("2012-01-01T00:00:00Z"),
                parse_rfc3339("2013-01-01T00:00:00Z"),
            ),
        ),
        seed=seed,
    )


# The threshold reference is the held-out validation year, not the fit
# period.  Residuals over fitted rows run small, so a reference that
# includes them has a tail biased short and the deepest thresholds sit
# below what a healthy out-of-sample year can actually produce; the
# validation year is the only view of the model that is distributed like
# the year the thresholds will be applied to.
def _healthy_reference_residuals(
    model: NbmModel,
    part: FarmDataset,
    failures,
    cfg: ExperimentConfig,
) -> np.ndarray:
    healthy = healthy_subset(
        part, failures, cfg.exclusion, cfg.evaluation.window_days
    )
    return np.concatenate(
        [s.residuals for s in compute_residuals(model, healthy)]
    )


def _healthy_reference_raw(
    part: FarmDataset, failures, cfg: ExperimentConfig
) -> np.ndarray:
    healthy = healthy_subset(
        part, failures, cfg.exclusion, cfg.evaluation.window_days
    )
    values = np.concatenate(
        [t.channels[TARGET_CHANNEL] for t in healthy.turbines]
    )
    return values[~np.isnan(values)]


def _curve_auprc(curve: PRCurve) -> tuple[Optional[float], str]:
    try:
        return auprc(curve), ""
    except DataError as exc:
        return None, str(exc)


def run_experiment(
    cfg: ExperimentConfig, out_dir: Optional[str] = None
) -> ExperimentResult:
    """Run the full protocol and (when an output directory is configured)
    write metrics, PR curves, AUPRC summary, models, and a report."""
    out_dir = out_dir if out_dir is not None else cfg.output_dir
    dataset, failures = load_experiment_data(cfg)
    split = split_dataset(dataset, cfg.split)
    eval_failures = [
        f
        for f in failures
        if cfg.split.test.start <= f.failure_time < cfg.split.test.end
    ]
    if len(eval_failures) != len(failures):
        logger.info(
            "evaluating %d of %d failures (rest outside the test period)",
            len(eval_failures),
            len(failures),
        )
    result = ExperimentResult(
        config=cfg,
        dataset=dataset,
        failures=list(failures),
        eval_failures=eval_failures,
    )
    merge_gap_s = cfg.merge_gap_days * SECONDS_PER_DAY
    known_turbines = dataset.turbine_ids

    for feature_config in standard_configs(cfg.lag_steps):
        model = train_nbm(
            dataset,
            failures,
            feature_config,
            cfg.split,
            cfg.train_params,
            cfg.exclusion,
        )
        regression = evaluate_regression(
            model, split, failures, cfg.evaluation.window_days
        )
        test_residuals = compute_residuals(model, split.test)
        reference = _healthy_reference_residuals(
            model, split.validation, failures, cfg
        )
        sweep = threshold_sweep(
            test_residuals, reference, cfg.sweep_quantiles, merge_gap_s
        )
        curve = pr_curve(sweep, eval_failures, cfg.evaluation, known_turbines)
        value, note = _curve_auprc(curve)
        if not eval_failures:
            note = "no failures in the test period: recall undefined"
        result.outcomes[feature_config.name] = ModelOutcome(
            model=model,
            regression=regression,
            curve=curve,
            auprc=value,
            auprc_note=note,
        )
        logger.info(
            "%s: test mae %.3f, auprc %s",
            feature_config.name,
            regression["test"]["mae"],
            "n/a" if value is None else f"{value:.3f}",
        )

    baseline_series = raw_target_series(split.test, TARGET_CHANNEL)
    baseline_reference = _healthy_reference_raw(split.validation, failures, cfg)
    baseline_sweep = threshold_sweep(
        baseline_series, baseline_reference, cfg.sweep_quantiles, merge_gap_s
    )
    result.baseline_curve = pr_curve(
        baseline_sweep, eval_failures, cfg.evaluation, known_turbines
    )
    result.baseline_auprc, result.baseline_auprc_note = _curve_auprc(
        result.baseline_curve
    )
    if not eval_failures:
        result.baseline_auprc_note = (
            "no failures in the test period: recall undefined"
        )

    if out_dir is not None:
        write_experiment_outputs(result, out_dir)
        result.output_dir = out_dir
    return result


def metrics_table(result: ExperimentResult) -> dict:
    return {
        name: outcome.regression for name, outcome in result.outcomes.items()
    }


def auprc_summary(result: ExperimentResult) -> dict:
    summary: dict = {}
    for name, outcome in result.outcomes.items():
        summary[name] = {"auprc": outcome.auprc}
        if outcome.auprc_note:
            summary[name]["note"] = outcome.auprc_note
    summary[BASELINE_NAME] = {"auprc": result.baseline_auprc}
    if result.baseline_auprc_note:
        summary[BASELINE_NAME]["note"] = result.baseline_auprc_note
    return summary


def format_report(result: ExperimentResult) -> str:
    cfg = result.config
    lines = []
    lines.append("normal-behaviour model experiment")
    lines.append("=" * len(lines[0]))
    lines.append("")
    seed_note = "" if cfg.seed is None else f" (seed override {cfg.seed})"
    if cfg.data.scenario_path is not None:
        lines.append(f"data: simulated scenario {cfg.data.scenario_path}{seed_note}")
    elif cfg.data.scenario is not None:
        lines.append(f"data: simulated scenario seed {cfg.data.scenario.seed}{seed_note}")
    else:
        lines.append(f"data: {cfg.data.scada_path} + {cfg.data.failures_path}")
    lines.append(
        f"turbines: {len(result.dataset.turbines)}, "
        f"samples: {result.dataset.n_samples}"
    )
    interval = lambda iv: f"[{format_rfc3339(iv.start)}, {format_rfc3339(iv.end)})"
    lines.append(f"train      {interval(cfg.split.train)}")
    lines.append(f"validation {interval(cfg.split.validation)}")
    lines.append(f"test       {interval(cfg.split.test)}")
    lines.append(
        f"episode merge gap: {cfg.merge_gap_days} days; "
        f"exclusion: {cfg.exclusion.before_days} d before / "
        f"{cfg.exclusion.after_days} d after each failure"
    )
    lines.append(
        f"prediction window: {cfg.evaluation.window_days} to "
        f"{cfg.evaluation.lead_days} days before failure; "
        f"post-failure blackout {cfg.evaluation.blackout_days} days"
    )
    lines.append("")
    n_eval = len(result.eval_failures)
    lines.append(f"failures under evaluation: {n_eval}")
    if n_eval == 0:
        lines.append(
            "NOTE: the test period contains no failures, so recall (and "
            "therefore any PR-based score) is undefined for this run."
        )
    lines.append("")
    lines.append("regression on healthy samples (MAE / RMSE, degC)")
    lines.append(f"{'model':10s} {'train':>15s} {'test':>15s}")
    for name, outcome in result.outcomes.items():
        tr, te = outcome.regression["train"], outcome.regression["test"]
        lines.append(
            f"{name:10s} {tr['mae']:7.3f}/{tr['rmse']:7.3f} "
            f"{te['mae']:7.3f}/{te['rmse']:7.3f}"
        )
    lines.append("")
    lines.append(
        f"fault detection (AUPRC over {len(cfg.sweep_quantiles)} sweep quantiles)"
    )
    for name, outcome in result.outcomes.items():
        if outcome.auprc is None:
            lines.append(f"{name:10s} undefined ({outcome.auprc_note})")
        else:
            lines.append(f"{name:10s} {outcome.auprc:.4f}")
    if result.baseline_auprc is None:
        lines.append(
            f"{BASELINE_NAME:10s} undefined ({result.baseline_auprc_note})"
        )
    else:
        lines.append(f"{BASELINE_NAME:10s} {result.baseline_auprc:.4f}")
    lines.append(
        f"({BASELINE_NAME} thresholds the raw {TARGET_CHANNEL} channel)"
    )
    lines.append("")
    return "\n".join(lines)


def write_experiment_outputs(result: ExperimentResult, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    models_dir = os.path.join(out_dir, "models")
    os.makedirs(models_dir, exist_ok=True)

    def dump(name: str, payload) -> None:
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")

    dump("resolved_config.json", experiment_config_to_dict(result.config))
    dump("metrics.json", metrics_table(result))
    dump("auprc.json", auprc_summary(result))
    for name, outcome in result.outcomes.items():
        write_pr_csv(os.path.join(out_dir, f"pr_{name}.csv"), outcome.curve)
        save_nbm(outcome.model, os.path.join(models_dir, f"{name}.json"))
    write_pr_csv(
        os.path.join(out_dir, f"pr_{BASELINE_NAME}.csv"), result.baseline_curve
    )
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(format_report(result))


def scenario_manifest(sim: SimConfig, dataset: FarmDataset) -> dict:
    """Manifest for a simulate run: the seed plus a hash of the full
    parameter set, enough to recognize a byte-identical rerun."""
    canonical = json.dumps(sim_config_to_dict(sim), sort_keys=True)
    return {
        "seed": sim.seed,
        "parameter_hash": hashlib.sha256(canonical.encode()).hexdigest(),
        "turbines": list(dataset.turbine_ids),
        "n_samples": dataset.n_samples,
    }
