"""CART decision trees and Random Forests, implemented from scratch.

Trees grow greedily on Gini impurity: each node draws a random subset of
candidate features, evaluates every midpoint between consecutive sorted
unique values, and keeps the split with the lowest weighted child
impurity. Growth stops on purity, the depth bound, or the minimum-sample
bounds; leaves store the empirical class distribution. Forests train one
tree per bootstrap sample (size n, with replacement) under per-tree
seeds derived from the forest seed, and predict by averaging leaf
distributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .base import Estimator
from .errors import DataError, EmptyData
from .seeding import derive_seed
from .validation import check_is_fitted, check_n_features, check_X_y

LEAF = -1


@dataclass
class HyperParams:
    """Forest configuration mirroring the tuned parameter set."""

    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: str | float = "sqrt"   # sqrt | log2 | all | fraction in (0,1]
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise DataError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.min_samples_split < 2:
            raise DataError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise DataError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise DataError("max_depth must be >= 1 or None")
        if not isinstance(self.max_features, str):
            f = float(self.max_features)
            if not 0 < f <= 1:
                raise DataError("fractional max_features must be in (0, 1]")
        elif self.max_features not in ("sqrt", "log2", "all"):
            raise DataError(f"unknown max_features {self.max_features!r}")

    def to_dict(self) -> dict:
        return {"n_trees": self.n_trees, "max_depth": self.max_depth,
                "min_samples_split": self.min_samples_split,
                "min_samples_leaf": self.min_samples_leaf,
                "max_features": self.max_features, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        return cls(**d)


def resolve_max_features(max_features, n_features: int) -> int:
    if max_features == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    if max_features == "log2":
        return max(1, int(math.log2(n_features))) if n_features > 1 else 1
    if max_features == "all":
        return n_features
    return max(1, int(round(float(max_features) * n_features)))


def gini_impurity(counts) -> float:
    """1 - sum(p^2) over class counts."""
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - np.dot(p, p))


@dataclass
class TreeNodes:
    """Flat array representation of a fitted tree."""

    feature: np.ndarray     # (m,) int32, LEAF for leaves
    threshold: np.ndarray   # (m,) float64
    left: np.ndarray        # (m,) int32
    right: np.ndarray       # (m,) int32
    value: np.ndarray       # (m, n_classes) float64, leaf class distribution

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]


class _TreeBuilder:
    def __init__(self, X, Y, max_depth, min_split, min_leaf, mtry, rng):
        self.X = X
        self.Y = Y                      # (n, c) one-hot float64
        self.max_depth = math.inf if max_depth is None else max_depth
        self.min_split = min_split
        self.min_leaf = min_leaf
        self.mtry = mtry
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[np.ndarray] = []

    def _new_node(self, counts) -> int:
        idx = len(self.feature)
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(counts / counts.sum())
        return idx

    def build(self, rows) -> int:
        root = self._new_node(self.Y[rows].sum(axis=0))
        stack = [(root, rows, 0)]
        while stack:
            node, rows, depth = stack.pop()
            counts = self.Y[rows].sum(axis=0)
            n = rows.shape[0]
            if (depth >= self.max_depth or n < self.min_split
                    or counts.max() == n):
                continue
            split = self._best_split(rows)
            if split is None:
                continue
            f, t = split
            go_left = self.X[rows, f] <= t
            left_rows, right_rows = rows[go_left], rows[~go_left]
            self.feature[node] = f
            self.threshold[node] = t
            left = self._new_node(self.Y[left_rows].sum(axis=0))
            right = self._new_node(self.Y[right_rows].sum(axis=0))
            self.left[node] = left
            self.right[node] = right
            stack.append((right, right_rows, depth + 1))
            stack.append((left, left_rows, depth + 1))
        return root

    def _best_split(self, rows):
        n_features = self.X.shape[1]
        candidates = self.rng.choice(n_features, size=min(self.mtry, n_features),
                                     replace=False)
        n = rows.shape[0]
        Yn = self.Y[rows]
        best = None   # (score, feature, threshold)
        for f in candidates:
            col = self.X[rows, f]
            order = np.argsort(col)
            sorted_col = col[order]
            # split positions between distinct consecutive values; the row set
            # on each side depends only on the values, not on tie order
            boundaries = np.flatnonzero(sorted_col[:-1] < sorted_col[1:]) + 1
            if boundaries.size == 0:
                continue
            ok = (boundaries >= self.min_leaf) & (boundaries <= n - self.min_leaf)
            boundaries = boundaries[ok]
            if boundaries.size == 0:
                continue
            cum = np.cumsum(Yn[order], axis=0)
            total = cum[-1]
            left_counts = cum[boundaries - 1]
            right_counts = total - left_counts
            n_left = boundaries.astype(np.float64)
            n_right = n - n_left
            gini_left = 1.0 - (left_counts ** 2).sum(axis=1) / n_left ** 2
            gini_right = 1.0 - (right_counts ** 2).sum(axis=1) / n_right ** 2
            score = (n_left * gini_left + n_right * gini_right) / n
            k = int(np.argmin(score))
            if best is None or score[k] < best[0]:
                b = boundaries[k]
                lo, hi = sorted_col[b - 1], sorted_col[b]
                t = (lo + hi) / 2.0
                if t >= hi:   # midpoint rounded up between adjacent floats
                    t = lo
                best = (float(score[k]), int(f), float(t))
        if best is None:
            return None
        return best[1], best[2]


def train_tree(X, y, params: HyperParams, rng) -> TreeNodes:
    """Grow one CART tree; ``y`` must already be integer class indices."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0:
        raise EmptyData("cannot train a tree on zero rows")
    n_classes = int(y.max()) + 1
    Y = np.zeros((X.shape[0], n_classes), dtype=np.float64)
    Y[np.arange(X.shape[0]), y] = 1.0
    mtry = resolve_max_features(params.max_features, X.shape[1])
    builder = _TreeBuilder(X, Y, params.max_depth, params.min_samples_split,
                           params.min_samples_leaf, mtry, rng)
    builder.build(np.arange(X.shape[0]))
    return TreeNodes(np.asarray(builder.feature, dtype=np.int32),
                     np.asarray(builder.threshold, dtype=np.float64),
                     np.asarray(builder.left, dtype=np.int32),
                     np.asarray(builder.right, dtype=np.int32),
                     np.vstack(builder.value))


def tree_predict_proba(tree: TreeNodes, X: np.ndarray) -> np.ndarray:
    node = np.zeros(X.shape[0], dtype=np.int32)
    active = tree.feature[node] != LEAF
    while active.any():
        idx = np.flatnonzero(active)
        cur = node[idx]
        go_left = X[idx, tree.feature[cur]] <= tree.threshold[cur]
        node[idx] = np.where(go_left, tree.left[cur], tree.right[cur])
        active = tree.feature[node] != LEAF
    return tree.value[node]


class RandomForestClassifier(Estimator):
    """Bootstrap ensemble of CART trees with averaged leaf distributions."""

    def __init__(self, n_trees=100, max_depth=None, min_samples_split=2,
                 min_samples_leaf=1, max_features="sqrt", seed=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.seed = seed

    @classmethod
    def from_params(cls, params: HyperParams) -> "RandomForestClassifier":
        return cls(**params.to_dict())

    def _params(self) -> HyperParams:
        return HyperParams(self.n_trees, self.max_depth, self.min_samples_split,
                           self.min_samples_leaf, self.max_features, self.seed)

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        params = self._params()
        self.classes_ = np.unique(y)
        codes = np.searchsorted(self.classes_, y)
        n = X.shape[0]
        self.trees_ = []
        for i in range(params.n_trees):
            rng = np.random.default_rng(derive_seed(params.seed, "tree", i))
            sample = rng.integers(0, n, n)
            tree = train_tree(X[sample], codes[sample], params, rng)
            self.trees_.append(tree)
        self.n_features_ = X.shape[1]
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "trees_")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        check_n_features(X, self.n_features_)
        total = np.zeros((X.shape[0], self.classes_.shape[0]))
        for tree in self.trees_:
            total += tree_predict_proba(tree, X)
        return total / len(self.trees_)

    def predict(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]

    def score(self, X, y) -> float:
        y = np.asarray(y)
        return float(np.mean(self.predict(X) == y))


def train_forest(X, y, params: HyperParams) -> RandomForestClassifier:
    return RandomForestClassifier.from_params(params).fit(X, y)


def predict_proba(forest: RandomForestClassifier, X) -> np.ndarray:
    """Positive-class probability for a binary forest (class order: sorted)."""
    proba = forest.predict_proba(X)
    if proba.shape[1] == 1:
        # degenerate single-class training set
        return np.full(proba.shape[0], float(forest.classes_[0]))
    return proba[:, -1]
