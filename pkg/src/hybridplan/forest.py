"""Random-forest regressor for query completion time, written from scratch.

Trees are grown with squared-error splits on bootstrap resamples and stored
as flat numpy arrays so that a whole ensemble can be evaluated on a batch
of feature rows with a handful of vectorized steps.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .domain import FEATURE_ORDER, QueryFeatures, WorkloadSample
from .errors import EmptyInputError, ModelStateError, StorageError, TrainingError

LEAF = -1


@dataclass(frozen=True)
class Hyper:
    n_trees: int = 100
    max_depth: int = 12
    min_leaf: int = 2
    seed: int = 0
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 0 or self.min_leaf < 1:
            raise TrainingError("need n_trees >= 1, max_depth >= 0, min_leaf >= 1")


@dataclass(frozen=True)
class Tree:
    """Binary regression tree. ``feature[i] == LEAF`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = feat != LEAF
            if not active.any():
                return self.value[node]
            rows = np.nonzero(active)[0]
            go_left = X[rows, feat[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=float),
        )


def _best_split(X, y, min_leaf):
    """Return ``(feature, threshold)`` of the best squared-error split, or None."""
    n = len(y)
    total = y.sum()
    parent_sse_term = total * total / n
    best = None
    best_score = parent_sse_term + 1e-12 * max(1.0, abs(parent_sse_term))
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = y[order]
        csum = np.cumsum(ys)[:-1]
        n_left = np.arange(1, n)
        # Splits are only valid between distinct values and with enough rows per side.
        valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
        if not valid.any():
            continue
        # Minimizing SSE is maximizing sum_L^2/n_L + sum_R^2/n_R.
        score = csum ** 2 / n_left + (total - csum) ** 2 / (n - n_left)
        score = np.where(valid, score, -np.inf)
        k = int(np.argmax(score))
        if score[k] > best_score:
            best_score = score[k]
            best = (j, 0.5 * (xs[k] + xs[k + 1]))
    return best


def fit_tree(X: np.ndarray, y: np.ndarray, max_depth: int, min_leaf: int) -> Tree:
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(0.0)
        return len(feature) - 1

    stack = [(new_node(), np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        ys = y[idx]
        value[node] = float(ys.mean())
        if depth >= max_depth or len(idx) < 2 * min_leaf or np.ptp(ys) == 0:
            continue
        split = _best_split(X[idx], ys, min_leaf)
        if split is None:
            continue
        j, thr = split
        mask = X[idx, j] <= thr
        feature[node] = j
        threshold[node] = thr
        l, r = new_node(), new_node()
        left[node], right[node] = l, r
        stack.append((r, idx[~mask], depth + 1))
        stack.append((l, idx[mask], depth + 1))

    return Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=float),
    )


def samples_to_xy(samples: Sequence[WorkloadSample]) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([s.features.vector() for s in samples], dtype=float).reshape(-1, len(FEATURE_ORDER))
    y = np.array([s.query_duration_s for s in samples], dtype=float)
    return X, y


def grow_trees(X, y, hyper: Hyper, rng: np.random.Generator) -> list[Tree]:
    trees = []
    n = len(y)
    for _ in range(hyper.n_trees):
        idx = rng.integers(0, n, size=n) if hyper.bootstrap else np.arange(n)
        trees.append(fit_tree(X[idx], y[idx], hyper.max_depth, hyper.min_leaf))
    return trees


@dataclass(frozen=True)
class PredictionModel:
    trees: tuple[Tree, ...] = ()
    feature_order: tuple[str, ...] = FEATURE_ORDER
    training_stats: dict = field(default_factory=dict)
    known_queries: dict = field(default_factory=dict)  # query_id -> signature dict
    version: int = 0

    @property
    def trained(self) -> bool:
        return len(self.trees) > 0

    def _check(self):
        if not self.trained:
            raise ModelStateError("model has not been trained")

    def predict_matrix(self, X) -> np.ndarray:
        """Per-tree predictions, shape ``(n_trees, n_rows)``."""
        self._check()
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.vstack([t.predict(X) for t in self.trees])

    def predict_many(self, X) -> np.ndarray:
        return self.predict_matrix(X).mean(axis=0)

    def predict(self, features: QueryFeatures) -> float:
        return float(self.predict_many([features.vector()])[0])

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "feature_order": list(self.feature_order),
            "training_stats": self.training_stats,
            "known_queries": self.known_queries,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PredictionModel":
        return cls(
            trees=tuple(Tree.from_dict(t) for t in d["trees"]),
            feature_order=tuple(d["feature_order"]),
            training_stats=d.get("training_stats", {}),
            known_queries=d.get("known_queries", {}),
            version=int(d["version"]),
        )


def predict(model: PredictionModel, features: QueryFeatures) -> float:
    return model.predict(features)


@dataclass(frozen=True)
class TrainReport:
    rmse: float
    within_window_accuracy: float
    window_s: float = 10.0
    n_train: int = 0
    n_test: int = 0

    def as_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "within_window_accuracy": self.within_window_accuracy,
            "window_s": self.window_s,
            "n_train": self.n_train,
            "n_test": self.n_test,
        }


def augment(samples: Sequence[WorkloadSample], factor: int = 10, jitter: float = 0.05,
            seed: int = 0) -> list[WorkloadSample]:
    """Return ``factor`` jittered copies of every sample, shuffled.

    Every numeric field, the label included, is scaled by its own uniform
    draw from ``[1 - jitter, 1 + jitter]``. ``available_memory`` is clamped
    to the jittered ``total_memory`` to keep the copy valid.
    """
    if not samples:
        raise EmptyInputError("augment needs at least one sample")
    if factor < 1 or not 0 <= jitter < 1:
        raise ValueError("need factor >= 1 and 0 <= jitter < 1")
    rng = np.random.default_rng(seed)
    X, y = samples_to_xy(samples)
    n = len(samples)
    reps = np.repeat(np.arange(n), factor)
    Xs = X[reps] * rng.uniform(1 - jitter, 1 + jitter, size=(len(reps), X.shape[1]))
    ys = y[reps] * rng.uniform(1 - jitter, 1 + jitter, size=len(reps))
    order = rng.permutation(len(reps))
    i_avail = FEATURE_ORDER.index("available_memory")
    i_total = FEATURE_ORDER.index("total_memory")
    out = []
    for k in order:
        row = Xs[k]
        row[i_avail] = min(row[i_avail], row[i_total])
        src = samples[reps[k]]
        feats = QueryFeatures(*row.tolist(), query_id=src.query_id)
        out.append(WorkloadSample(feats, float(ys[k])))
    return out


def evaluate(model: PredictionModel, test: Sequence[WorkloadSample], window_s: float = 10.0,
             n_train: int = 0) -> TrainReport:
    if not test:
        raise EmptyInputError("evaluate needs at least one test sample")
    X, y = samples_to_xy(test)
    err = model.predict_many(X) - y
    rmse = float(math.sqrt(np.mean(err ** 2)))
    acc = float(np.mean(np.abs(err) <= window_s))
    return TrainReport(rmse, acc, window_s, n_train, len(test))


def _stats(X, y) -> dict:
    return {
        "rmse_train": 0.0,
        "target_min": float(y.min()),
        "target_max": float(y.max()),
        "n_samples": int(len(y)),
        "feature_medians": dict(zip(FEATURE_ORDER, np.median(X, axis=0).tolist())),
    }


def split_samples(samples, split: float, seed: int):
    """Shuffle and split into disjoint, exhaustive train/test lists."""
    if not 0 < split < 1:
        raise TrainingError("split must be in (0, 1)")
    order = np.random.default_rng(seed).permutation(len(samples))
    cut = int(round(split * len(samples)))
    cut = min(max(cut, 1), len(samples) - 1)
    return [samples[i] for i in order[:cut]], [samples[i] for i in order[cut:]]


def fit(samples: Sequence[WorkloadSample], hyper: Hyper = Hyper(), known_queries=None,
        version: int = 1) -> PredictionModel:
    """Fit on every sample with no held-out split."""
    if not samples:
        raise TrainingError("no training samples")
    X, y = samples_to_xy(samples)
    trees = grow_trees(X, y, hyper, np.random.default_rng(hyper.seed))
    stats = _stats(X, y)
    model = PredictionModel(tuple(trees), FEATURE_ORDER, stats, dict(known_queries or {}), version)
    rmse = float(np.sqrt(np.mean((model.predict_many(X) - y) ** 2)))
    return replace(model, training_stats={**stats, "rmse_train": rmse})


def train(samples: Sequence[WorkloadSample], split: float = 0.8, hyper: Hyper = Hyper(),
          window_s: float = 10.0, known_queries=None) -> tuple[PredictionModel, TrainReport]:
    if len(samples) < 10:
        raise TrainingError(f"need at least 10 samples, got {len(samples)}")
    train_set, test_set = split_samples(list(samples), split, hyper.seed)
    model = fit(train_set, hyper, known_queries)
    return model, evaluate(model, test_set, window_s, n_train=len(train_set))


def warm_retrain(model: PredictionModel, new_samples: Sequence[WorkloadSample], hyper: Hyper = Hyper(),
                 retire_error_s: float | None = None) -> PredictionModel:
    """Return a new model holding the old trees plus trees fitted on ``new_samples``.

    With ``retire_error_s`` set, old trees whose worst absolute error on
    ``new_samples`` exceeds it are dropped, so stale trees stop diluting the
    ensemble after a workload shift. The input model is never modified.
    """
    if not model.trained:
        raise ModelStateError("warm_retrain needs a trained model")
    if not new_samples:
        raise EmptyInputError("warm_retrain needs new samples")
    X, y = samples_to_xy(new_samples)
    new_trees = grow_trees(X, y, hyper, np.random.default_rng(hyper.seed + model.version))
    old = list(model.trees)
    if retire_error_s is not None:
        per_tree = np.vstack([t.predict(X) for t in old])
        worst = np.abs(per_tree - y).max(axis=1)
        old = [t for t, w in zip(old, worst) if w <= retire_error_s]
    stats = dict(model.training_stats)
    stats["target_min"] = min(stats.get("target_min", math.inf), float(y.min()))
    stats["target_max"] = max(stats.get("target_max", -math.inf), float(y.max()))
    stats["n_samples"] = int(stats.get("n_samples", 0)) + len(y)
    stats["retired_trees"] = len(model.trees) - len(old)
    return PredictionModel(tuple(old + new_trees), model.feature_order, stats,
                           dict(model.known_queries), model.version + 1)


class ModelStore:
    """Versioned model documents plus an atomically replaced ``CURRENT`` pointer."""

    POINTER = "CURRENT"

    def __init__(self, root):
        self.root = Path(root)

    def path_for(self, version: int) -> Path:
        return self.root / f"model-v{version}.json"

    def save(self, model: PredictionModel, make_current: bool = True) -> Path:
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            target = self.path_for(model.version)
            _atomic_write(target, json.dumps(model.to_dict()))
            if make_current:
                _atomic_write(self.root / self.POINTER, target.name + "\n")
        except OSError as exc:
            raise StorageError(f"cannot persist model to {self.root}: {exc}") from exc
        return target

    def current_version(self) -> int | None:
        ptr = self.root / self.POINTER
        if not ptr.exists():
            return None
        name = ptr.read_text(encoding="utf-8").strip()
        return int(name[len("model-v"):-len(".json")])

    def load(self, version: int | None = None) -> PredictionModel:
        if version is None:
            version = self.current_version()
            if version is None:
                raise ModelStateError(f"no trained model in {self.root}")
        try:
            doc = json.loads(self.path_for(version).read_text(encoding="utf-8"))
        except OSError as exc:
            raise StorageError(f"cannot read model v{version}: {exc}") from exc
        return PredictionModel.from_dict(doc)


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(prefix=path.name, suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
