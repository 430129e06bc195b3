"""Built-in random-forest reference model.

Bagged binary trees with Gini splits over a random feature subset of size
ceil(sqrt(d)). Leaf probabilities use Laplace add-one smoothing so the forest
never emits an exact 0 or 1, which keeps the log-odds transform downstream
finite. Training is deterministic given (data, hyperparameters, seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidTrainingData
from .base import ProbabilityModel


@dataclass
class _Tree:
    """Flattened binary tree: node i is a leaf iff feature[i] == -1."""

    feature: np.ndarray      # (n_nodes,) int, -1 at leaves
    threshold: np.ndarray    # (n_nodes,) float, 0.0 at leaves
    left: np.ndarray         # (n_nodes,) int child index, -1 at leaves
    right: np.ndarray        # (n_nodes,) int child index, -1 at leaves
    leaf_probs: np.ndarray   # (n_nodes, C) smoothed class frequencies, zeros at internal nodes

    def predict_proba(self, X: np.ndarray, max_depth: int) -> np.ndarray:
        idx = np.zeros(X.shape[0], dtype=np.int64)
        for _ in range(max_depth + 1):
            feat = self.feature[idx]
            active = feat >= 0
            if not active.any():
                break
            rows = np.nonzero(active)[0]
            f = feat[rows]
            go_left = X[rows, f] <= self.threshold[idx[rows]]
            idx[rows] = np.where(go_left, self.left[idx[rows]], self.right[idx[rows]])
        return self.leaf_probs[idx]


@dataclass
class ForestModel(ProbabilityModel):
    """Fitted bagged forest; immutable after training and cheap to pickle."""

    trees: list[_Tree]
    n_trees: int
    max_depth: int
    seed: int
    n_features: int
    n_classes: int
    feature_names: list[str] | None = field(default=None)

    def predict_proba(self, batch: np.ndarray) -> np.ndarray:
        X = np.asarray(batch, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            from ..errors import DimensionError

            raise DimensionError(
                f"batch shape {X.shape} incompatible with d={self.n_features}"
            )
        if X.shape[0] == 0:
            return np.empty((0, self.n_classes), dtype=float)
        acc = np.zeros((X.shape[0], self.n_classes), dtype=float)
        for tree in self.trees:
            acc += tree.predict_proba(X, self.max_depth)
        return acc / self.n_trees

    def to_json(self) -> str:
        payload = {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "seed": self.seed,
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "feature_names": self.feature_names,
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "leaf_probs": t.leaf_probs.tolist(),
                }
                for t in self.trees
            ],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "ForestModel":
        payload = json.loads(text)
        trees = [
            _Tree(
                feature=np.asarray(t["feature"], dtype=np.int64),
                threshold=np.asarray(t["threshold"], dtype=float),
                left=np.asarray(t["left"], dtype=np.int64),
                right=np.asarray(t["right"], dtype=np.int64),
                leaf_probs=np.asarray(t["leaf_probs"], dtype=float),
            )
            for t in payload["trees"]
        ]
        return cls(
            trees=trees,
            n_trees=payload["n_trees"],
            max_depth=payload["max_depth"],
            seed=payload["seed"],
            n_features=payload["n_features"],
            n_classes=payload["n_classes"],
            feature_names=payload.get("feature_names"),
        )


def _gini_best_split(X, y, n_classes, feature_ids):
    """Best (feature, threshold, score) over candidate features, or None."""
    n = y.shape[0]
    onehot = np.zeros((n, n_classes), dtype=float)
    onehot[np.arange(n), y] = 1.0
    best = None  # (weighted_gini, feature, threshold)
    for f in feature_ids:
        order = np.argsort(X[:, f], kind="stable")
        v = X[order, f]
        cum = np.cumsum(onehot[order], axis=0)
        # split after position i is valid only where v[i] < v[i+1]
        valid = v[:-1] < v[1:]
        if not valid.any():
            continue
        left_n = np.arange(1, n, dtype=float)
        left_counts = cum[:-1]
        right_counts = cum[-1] - left_counts
        right_n = n - left_n
        gini_l = 1.0 - np.sum((left_counts / left_n[:, None]) ** 2, axis=1)
        gini_r = 1.0 - np.sum((right_counts / right_n[:, None]) ** 2, axis=1)
        weighted = (left_n * gini_l + right_n * gini_r) / n
        weighted[~valid] = np.inf
        pos = int(np.argmin(weighted))
        if best is None or weighted[pos] < best[0]:
            best = (weighted[pos], f, 0.5 * (v[pos] + v[pos + 1]))
    return best


def _build_tree(X, y, n_classes, max_depth, m_features, rng):
    feature, threshold, left, right, leaf_probs = [], [], [], [], []

    def add_leaf(labels):
        counts = np.bincount(labels, minlength=n_classes).astype(float)
        # Laplace add-one: no exact 0/1 probabilities leave the forest
        probs = (counts + 1.0) / (counts.sum() + n_classes)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        leaf_probs.append(probs)
        return len(feature) - 1

    def build(rows, depth):
        ys = y[rows]
        if depth >= max_depth or rows.shape[0] < 2 or np.all(ys == ys[0]):
            return add_leaf(ys)
        d = X.shape[1]
        feats = rng.choice(d, size=min(m_features, d), replace=False)
        split = _gini_best_split(X[rows], ys, n_classes, feats)
        if split is None:
            return add_leaf(ys)
        _, f, thr = split
        node = len(feature)
        feature.append(int(f))
        threshold.append(float(thr))
        left.append(-1)
        right.append(-1)
        leaf_probs.append(np.zeros(n_classes))
        mask = X[rows, f] <= thr
        left[node] = build(rows[mask], depth + 1)
        right[node] = build(rows[~mask], depth + 1)
        return node

    build(np.arange(X.shape[0]), 0)
    return _Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        leaf_probs=np.asarray(leaf_probs, dtype=float),
    )


def train_forest(
    data: np.ndarray,
    labels: np.ndarray,
    n_trees: int = 100,
    max_depth: int = 8,
    seed: int = 0,
    feature_names: list[str] | None = None,
) -> ForestModel:
    """Fit the reference forest: per-tree bootstrap, Gini splits, smoothed leaves."""
    X = np.asarray(data, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise InvalidTrainingData(f"data shape {X.shape} incompatible with {y.shape[0]} labels")
    if X.shape[0] < 2:
        raise InvalidTrainingData("need at least 2 training rows")
    if not np.all(np.isfinite(X)):
        raise InvalidTrainingData("non-finite feature values in training data")
    if n_trees < 1 or max_depth < 1:
        raise InvalidTrainingData("n_trees and max_depth must be >= 1")
    classes = np.unique(y)
    if classes.shape[0] < 2:
        raise InvalidTrainingData("training labels contain a single class")
    if y.min() < 0:
        raise InvalidTrainingData("labels must be non-negative class indices")

    n, d = X.shape
    n_classes = int(y.max()) + 1
    m_features = math.ceil(math.sqrt(d))
    children = np.random.SeedSequence(seed).spawn(n_trees)
    trees = []
    for ss in children:
        rng = np.random.default_rng(ss)
        boot = rng.integers(0, n, size=n)
        trees.append(_build_tree(X[boot], y[boot], n_classes, max_depth, m_features, rng))
    return ForestModel(
        trees=trees,
        n_trees=n_trees,
        max_depth=max_depth,
        seed=seed,
        n_features=d,
        n_classes=n_classes,
        feature_names=feature_names,
    )
