"""Gradient-boosted regression trees, built from scratch.

Least-squares boosting: each stage fits a depth-bounded regression tree to the
current residuals (targets minus running prediction) and the ensemble adds
learning_rate times that tree. Split candidates come from per-feature
histograms with quantile bin edges computed once on the training matrix; when
a feature has no more distinct values than bins, the histogram candidates are
exactly the exhaustive-search thresholds. Validation RMSE after every stage
drives early stopping, and prediction uses the stage count that minimized it.

Everything is deterministic: no row or feature subsampling, ties between
candidate splits break by lowest feature index then lowest threshold, and all
reductions run in a fixed order regardless of thread count.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigError, DataError
from .features import DesignMatrix


@dataclass(frozen=True)
class TrainParams:
    """Boosting hyperparameters shared by all model configurations."""

    max_trees: int = 500
    learning_rate: float = 0.1
    max_depth: int = 6
    min_samples_leaf: int = 20
    n_bins: int = 64
    early_stopping_rounds: int = 25
    seed: int = 1

    def __post_init__(self):
        for name in ("max_trees", "max_depth", "min_samples_leaf",
                     "early_stopping_rounds"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if not (0.0 < self.learning_rate <= 1.0):
            raise ConfigError("learning_rate must lie in (0, 1]")
        if self.n_bins < 2:
            raise ConfigError("n_bins must be at least 2")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


@dataclass(frozen=True)
class RegressionTree:
    """Flattened binary regression tree.

    Parallel node arrays: internal nodes carry (split_feature,
    split_threshold, left, right); leaves have split_feature == -1 and carry
    leaf_value. Routing: go left iff x[split_feature] <= split_threshold, so
    prediction is total over any real-valued vector.
    """

    split_feature: np.ndarray
    split_threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_value: np.ndarray

    def __post_init__(self):
        conv = {
            "split_feature": np.int32,
            "split_threshold": np.float64,
            "left": np.int32,
            "right": np.int32,
            "leaf_value": np.float64,
        }
        n = len(self.split_feature)
        for name, dtype in conv.items():
            arr = np.asarray(getattr(self, name), dtype=dtype)
            if arr.shape != (n,):
                raise DataError("tree node arrays must have equal length")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        internal = np.flatnonzero(self.split_feature >= 0)
        if internal.size:
            kids = np.concatenate([self.left[internal], self.right[internal]])
            if kids.min() < 0 or kids.max() >= n:
                raise DataError("internal node with missing child")
            parents = np.concatenate([internal, internal])
            if np.any(kids <= parents):
                raise DataError("children must come after their parent")

    @property
    def n_nodes(self) -> int:
        return int(self.split_feature.size)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.split_feature < 0))

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int32)
        for i in range(self.n_nodes):
            if self.split_feature[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max()) if self.n_nodes else 0

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        idx = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.split_feature[idx] >= 0)
        while active.size:
            node = idx[active]
            go_left = X[active, self.split_feature[node]] <= self.split_threshold[node]
            idx[active] = np.where(go_left, self.left[node], self.right[node])
            active = active[self.split_feature[idx[active]] >= 0]
        return self.leaf_value[idx]


@dataclass(frozen=True)
class GbdtModel:
    """Additive tree ensemble: base_score + lr * sum of the first
    best_iteration trees."""

    base_score: float
    trees: tuple[RegressionTree, ...]
    learning_rate: float
    feature_names: tuple[str, ...]
    best_iteration: int
    params: TrainParams = TrainParams()

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if not (0 <= self.best_iteration <= len(self.trees)):
            raise ConfigError(
                "best_iteration must lie in [0, number of stored trees]"
            )


def feature_bin_edges(column: np.ndarray, n_bins: int) -> np.ndarray:
    """Split-candidate edges for one feature.

    With at most n_bins distinct values the edges sit on every distinct value
    except the last, reproducing exhaustive search; otherwise they are the
    interior n_bins-quantiles of the column.
    """
    distinct = np.unique(column)
    if distinct.size <= n_bins:
        return distinct[:-1].astype(np.float64)
    probs = np.arange(1, n_bins) / n_bins
    return np.unique(np.quantile(column, probs))


def _bin_column(column: np.ndarray, edges: np.ndarray) -> np.ndarray:
    # bin(x) <= j  iff  x <= edges[j]: the tree threshold at edge j routes
    # exactly like the binned comparison.
    return np.searchsorted(edges, column, side="left")


class _NodeStats:
    __slots__ = ("n", "total", "counts", "sums")

    def __init__(self, n, total, counts, sums):
        self.n = n
        self.total = total
        self.counts = counts  # per-feature count histograms
        self.sums = sums  # per-feature residual-sum histograms


def _histograms(binned_cols, residual, rows, n_bins_per_feature):
    counts = []
    sums = []
    r = residual[rows]
    for col, nb in zip(binned_cols, n_bins_per_feature):
        values = col[rows]
        counts.append(np.bincount(values, minlength=nb).astype(np.float64))
        sums.append(np.bincount(values, weights=r, minlength=nb))
    return counts, sums


def _best_split(stats: _NodeStats, min_samples_leaf: int):
    """Highest-gain (feature, edge index) or None.

    gain = sL^2/nL + sR^2/nR - s^2/n, strictly positive required; ties break
    by lowest feature index, then lowest threshold.
    """
    best = None
    parent_term = stats.total * stats.total / stats.n
    for f, (counts, sums) in enumerate(zip(stats.counts, stats.sums)):
        if counts.size < 2:
            continue
        n_left = np.cumsum(counts)[:-1]
        s_left = np.cumsum(sums)[:-1]
        n_right = stats.n - n_left
        s_right = stats.total - s_left
        ok = (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
        if not ok.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = np.where(
                ok,
                s_left * s_left / n_left + s_right * s_right / n_right - parent_term,
                -np.inf,
            )
        j = int(np.argmax(gain))
        g = float(gain[j])
        if g > 0.0 and (best is None or g > best[0]):
            best = (g, f, j, float(n_left[j]), float(s_left[j]))
    return best


class _TreeGrower:
    """Level-order histogram tree builder over pre-binned columns."""

    def __init__(self, binned_cols, edges, params: TrainParams):
        self.binned_cols = binned_cols
        self.edges = edges
        self.params = params
        self.n_bins_per_feature = [e.size + 1 for e in edges]
        self.n_rows = binned_cols[0].size

    def grow(self, residual: np.ndarray):
        """Returns (RegressionTree, leaf value per training row)."""
        p = self.params
        feature = [-1]
        threshold = [math.nan]
        split_bin = [-1]
        left = [-1]
        right = [-1]
        value = [math.nan]
        row_node = np.zeros(self.n_rows, dtype=np.int32)
        all_rows = np.arange(self.n_rows)
        counts, sums = _histograms(
            self.binned_cols, residual, all_rows, self.n_bins_per_feature
        )
        stats = {0: _NodeStats(float(self.n_rows), float(residual.sum()), counts, sums)}
        level = [0]
        for _depth in range(p.max_depth):
            planned = []
            for node in level:
                st = stats[node]
                choice = (
                    _best_split(st, p.min_samples_leaf)
                    if st.n >= 2 * p.min_samples_leaf
                    else None
                )
                if choice is not None:
                    planned.append((node, choice))
            if not planned:
                break
            # Create children in parent order so node ids are deterministic.
            routing_feat = np.full(len(feature), -1, dtype=np.int64)
            routing_bin = np.zeros(len(feature), dtype=np.int64)
            routing_left = np.zeros(len(feature), dtype=np.int64)
            routing_right = np.zeros(len(feature), dtype=np.int64)
            child_meta = []
            for node, (gain, f, j, n_left, s_left) in planned:
                lid = len(feature)
                rid = lid + 1
                feature.extend([-1, -1])
                threshold.extend([math.nan, math.nan])
                split_bin.extend([-1, -1])
                left.extend([-1, -1])
                right.extend([-1, -1])
                value.extend([math.nan, math.nan])
                feature[node] = f
                threshold[node] = float(self.edges[f][j])
                split_bin[node] = j
                left[node] = lid
                right[node] = rid
                routing_feat[node] = f
                routing_bin[node] = j
                routing_left[node] = lid
                routing_right[node] = rid
                st = stats.pop(node)
                n_right = st.n - n_left
                s_right = st.total - s_left
                child_meta.append((node, lid, rid, n_left, s_left, n_right, s_right, st))
            # Route rows of split nodes to their children.
            pad = len(feature) - routing_feat.size
            routing_feat = np.concatenate([routing_feat, np.full(pad, -1, dtype=np.int64)])
            routing_bin = np.concatenate([routing_bin, np.zeros(pad, dtype=np.int64)])
            routing_left = np.concatenate([routing_left, np.zeros(pad, dtype=np.int64)])
            routing_right = np.concatenate([routing_right, np.zeros(pad, dtype=np.int64)])
            moving = np.flatnonzero(routing_feat[row_node] >= 0)
            nodes_moving = row_node[moving]
            feats = routing_feat[nodes_moving]
            col_vals = np.empty(moving.size, dtype=np.int64)
            for f in np.unique(feats):
                sel = feats == f
                col_vals[sel] = self.binned_cols[f][moving[sel]]
            go_left = col_vals <= routing_bin[nodes_moving]
            row_node[moving] = np.where(
                go_left, routing_left[nodes_moving], routing_right[nodes_moving]
            ).astype(np.int32)
            # Histogram subtraction: compute the smaller child directly, the
            # sibling as parent minus child.
            small_ids = [
                (lid if n_left <= n_right else rid)
                for (_node, lid, rid, n_left, _sl, n_right, _sr, _st) in child_meta
            ]
            slot_of = np.full(len(feature), -1, dtype=np.int64)
            for slot, nid in enumerate(small_ids):
                slot_of[nid] = slot
            small_rows = np.flatnonzero(slot_of[row_node] >= 0)
            slots = slot_of[row_node[small_rows]]
            r_small = residual[small_rows]
            n_small = len(small_ids)
            per_feature_counts = []
            per_feature_sums = []
            for f, (col, nb) in enumerate(
                zip(self.binned_cols, self.n_bins_per_feature)
            ):
                keys = slots * nb + col[small_rows]
                per_feature_counts.append(
                    np.bincount(keys, minlength=n_small * nb).astype(np.float64)
                )
                per_feature_sums.append(
                    np.bincount(keys, weights=r_small, minlength=n_small * nb)
                )
            level = []
            for slot, meta in enumerate(child_meta):
                node, lid, rid, n_left, s_left, n_right, s_right, st = meta
                small_id = small_ids[slot]
                counts_small = []
                sums_small = []
                for f, nb in enumerate(self.n_bins_per_feature):
                    counts_small.append(
                        per_feature_counts[f][slot * nb : (slot + 1) * nb]
                    )
                    sums_small.append(per_feature_sums[f][slot * nb : (slot + 1) * nb])
                counts_big = [pc - cs for pc, cs in zip(st.counts, counts_small)]
                sums_big = [ps - ss for ps, ss in zip(st.sums, sums_small)]
                if small_id == lid:
                    stats[lid] = _NodeStats(n_left, s_left, counts_small, sums_small)
                    stats[rid] = _NodeStats(n_right, s_right, counts_big, sums_big)
                else:
                    stats[rid] = _NodeStats(n_right, s_right, counts_small, sums_small)
                    stats[lid] = _NodeStats(n_left, s_left, counts_big, sums_big)
                level.extend([lid, rid])
        # Remaining nodes are leaves: value = mean residual.
        for node, st in stats.items():
            value[node] = st.total / st.n if st.n else 0.0
        tree = RegressionTree(
            split_feature=np.array(feature, dtype=np.int32),
            split_threshold=np.array(threshold, dtype=np.float64),
            left=np.array(left, dtype=np.int32),
            right=np.array(right, dtype=np.int32),
            leaf_value=np.array(
                [0.0 if math.isnan(v) else v for v in value], dtype=np.float64
            ),
        )
        leaf_per_row = tree.leaf_value[row_node]
        return tree, leaf_per_row


def _check_matrix(dm: DesignMatrix, label: str):
    if dm.n_rows == 0:
        raise DataError(f"{label} design matrix is empty")


def fit(
    train: DesignMatrix, validation: DesignMatrix, params: TrainParams = TrainParams()
) -> GbdtModel:
    """Boosted-tree fit with validation-driven early stopping.

    Stage t fits a tree to residuals and adds learning_rate times it; after
    each stage the validation RMSE is recorded. Training stops when the RMSE
    has not improved for early_stopping_rounds stages (or at max_trees, or
    as soon as a stage contributes nothing at all), and best_iteration is
    the argmin over recorded RMSEs including the 0-tree baseline.
    """
    _check_matrix(train, "training")
    _check_matrix(validation, "validation")
    if train.feature_names != validation.feature_names:
        raise DataError(
            f"feature names differ: train {list(train.feature_names)} vs "
            f"validation {list(validation.feature_names)}"
        )
    X, y = train.X, train.y
    base = float(y.mean())
    edges = [
        feature_bin_edges(X[:, f], params.n_bins) for f in range(X.shape[1])
    ]
    binned_cols = [
        _bin_column(X[:, f], edges[f]).astype(
            np.uint8 if edges[f].size < 255 else np.int32
        )
        for f in range(X.shape[1])
    ]
    grower = _TreeGrower(binned_cols, edges, params)
    pred_train = np.full(train.n_rows, base)
    pred_valid = np.full(validation.n_rows, base)
    rmse_history = [float(np.sqrt(np.mean((validation.y - pred_valid) ** 2)))]
    best_rmse = rmse_history[0]
    rounds_since_best = 0
    trees: list[RegressionTree] = []
    while len(trees) < params.max_trees and rounds_since_best < params.early_stopping_rounds:
        residual = y - pred_train
        tree, leaf_per_row = grower.grow(residual)
        trees.append(tree)
        pred_train = pred_train + params.learning_rate * leaf_per_row
        pred_valid = pred_valid + params.learning_rate * tree.predict(validation.X)
        rmse = float(np.sqrt(np.mean((validation.y - pred_valid) ** 2)))
        rmse_history.append(rmse)
        if rmse < best_rmse:
            best_rmse = rmse
            rounds_since_best = 0
        else:
            rounds_since_best += 1
        if tree.n_nodes == 1 and tree.leaf_value[0] == 0.0:
            break  # a zero-leaf stump adds nothing and so would every successor
    best_iteration = int(np.argmin(rmse_history))
    return GbdtModel(
        base_score=base,
        trees=tuple(trees),
        learning_rate=params.learning_rate,
        feature_names=train.feature_names,
        best_iteration=best_iteration,
        params=params,
    )


def predict(model: GbdtModel, rows) -> np.ndarray | float:
    """Ensemble prediction for a DesignMatrix, a 2-D matrix, or one vector."""
    if isinstance(rows, DesignMatrix):
        if rows.feature_names != model.feature_names:
            raise DataError(
                f"feature names differ: model {list(model.feature_names)} vs "
                f"rows {list(rows.feature_names)}"
            )
        X = rows.X
        single = False
    else:
        X = np.asarray(rows, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != len(model.feature_names):
            raise DataError(
                f"expected {len(model.feature_names)} features, got "
                f"{X.shape[-1] if X.ndim else 0}"
            )
    out = np.full(X.shape[0], model.base_score)
    for tree in model.trees[: model.best_iteration]:
        out = out + model.learning_rate * tree.predict(X)
    return float(out[0]) if single else out


def regression_metrics(predicted, observed) -> dict[str, float]:
    """MAE and RMSE of predictions against observations."""
    predicted = np.asarray(predicted, dtype=np.float64)
    observed = np.asarray(observed, dtype=np.float64)
    if predicted.shape != observed.shape or predicted.ndim != 1:
        raise DataError("predicted and observed must be equal-length vectors")
    if predicted.size == 0:
        raise DataError("metrics need at least one sample")
    err = predicted - observed
    return {
        "mae": float(np.mean(np.abs(err))),
        "rmse": float(np.sqrt(np.mean(err * err))),
    }


# ---------------------------------------------------------------------------
# Serialization: self-describing JSON with exact float round trip.
# ---------------------------------------------------------------------------

_FORMAT = "gbdt-regressor"
_VERSION = 1


def model_to_dict(model: GbdtModel) -> dict:
    return {
        "format": _FORMAT,
        "version": _VERSION,
        "feature_names": list(model.feature_names),
        "base_score": model.base_score,
        "learning_rate": model.learning_rate,
        "best_iteration": model.best_iteration,
        "params": {f.name: getattr(model.params, f.name) for f in fields(TrainParams)},
        "trees": [
            {
                "split_feature": tree.split_feature.tolist(),
                "split_threshold": [
                    None if math.isnan(t) else t
                    for t in tree.split_threshold.tolist()
                ],
                "left": tree.left.tolist(),
                "right": tree.right.tolist(),
                "leaf_value": tree.leaf_value.tolist(),
            }
            for tree in model.trees
        ],
    }


def model_from_dict(data: dict) -> GbdtModel:
    if not isinstance(data, dict) or data.get("format") != _FORMAT:
        raise DataError(f"not a {_FORMAT} document")
    if data.get("version") != _VERSION:
        raise DataError(f"unsupported model version {data.get('version')!r}")
    try:
        trees = tuple(
            RegressionTree(
                split_feature=t["split_feature"],
                split_threshold=[
                    math.nan if v is None else v for v in t["split_threshold"]
                ],
                left=t["left"],
                right=t["right"],
                leaf_value=t["leaf_value"],
            )
            for t in data["trees"]
        )
        return GbdtModel(
            base_score=float(data["base_score"]),
            trees=trees,
            learning_rate=float(data["learning_rate"]),
            feature_names=tuple(data["feature_names"]),
            best_iteration=int(data["best_iteration"]),
            params=TrainParams(**data["params"]),
        )
    except KeyError as exc:
        raise DataError(f"model document missing key {exc}") from None


def save_model(model: GbdtModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path) -> GbdtModel:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return model_from_dict(data)
