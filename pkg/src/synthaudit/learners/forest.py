"""Random forest classifier grown from scratch on the split kernel.

Gini impurity, bootstrap resampling, floor(sqrt(d)) features per split,
unlimited depth, single-record leaves: the setup every attack and analyst
model in the package shares. Determinism: given (X, y, params, seed) the
fitted forest and its predictions are identical regardless of which kernel
backend is active.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from synthaudit import kernels
from synthaudit.errors import EmptyDataset, InvalidConfig


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    min_leaf: int = 1
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise InvalidConfig("n_trees must be >= 1")
        if self.min_leaf < 1:
            raise InvalidConfig("min_leaf must be >= 1")


class RandomForest:
    """Fitted ensemble; use fit_forest to construct.

    `degenerate` is True when the training labels held a single class; the
    model then predicts that class unconditionally.
    """

    def __init__(self, trees, classes: np.ndarray, n_features: int, degenerate: bool):
        self.trees = trees
        self.classes = classes
        self.n_features = n_features
        self.degenerate = degenerate

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise InvalidConfig(
                f"expected {self.n_features} features, got {X.shape[1]}"
            )
        n = X.shape[0]
        if self.degenerate:
            return np.full(n, self.classes[0])
        n_classes = len(self.classes)
        votes = np.zeros((n, n_classes), dtype=np.int64)
        rows = np.arange(n)
        for tree in self.trees:
            votes[rows, _tree_predict(tree, X)] += 1
        # ties go to the lowest class index: argmax returns the first maximum
        return self.classes[np.argmax(votes, axis=1)]


def _tree_predict(tree, X: np.ndarray) -> np.ndarray:
    feature, threshold, left, right, pred = tree
    pos = np.zeros(X.shape[0], dtype=np.int32)
    active = np.nonzero(feature[pos] >= 0)[0]
    while active.size:
        p = pos[active]
        go_left = X[active, feature[p]] <= threshold[p]
        pos[active] = np.where(go_left, left[p], right[p])
        active = active[feature[pos[active]] >= 0]
    return pred[pos]


def fit_forest(X, y, params: ForestParams = ForestParams(), rng: np.random.Generator | None = None) -> RandomForest:
    """Fit on features X (n, d) and integer-like labels y (n,).

    Labels are remapped to their sorted unique values; vote ties resolve
    toward the lowest label value. A single-class y yields a constant
    classifier flagged via `degenerate` rather than an error.
    """
    if rng is None:
        rng = np.random.default_rng()
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidConfig("X must be 2-dimensional")
    n, d = X.shape
    if n == 0:
        raise EmptyDataset("cannot fit a forest on zero rows")
    y = np.asarray(y)
    classes, y_enc = np.unique(y, return_inverse=True)
    if classes.size < 2:
        return RandomForest([], classes, d, degenerate=True)
    y_enc = y_enc.astype(np.int64)
    mtry = max(1, int(math.floor(math.sqrt(d))))
    trees = []
    for _ in range(params.n_trees):
        if params.bootstrap:
            idx = rng.integers(0, n, size=n)
            Xb, yb = X[idx], y_enc[idx]
        else:
            Xb, yb = X, y_enc
        feature_seed = int(rng.integers(0, 2**63))
        trees.append(
            kernels.build_tree(Xb, yb, int(classes.size), mtry, params.min_leaf, feature_seed)
        )
    return RandomForest(trees, classes, d, degenerate=False)
