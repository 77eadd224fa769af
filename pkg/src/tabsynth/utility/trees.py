"""CART decision trees shared by the random forest and gradient boosting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None
    value: np.ndarray | float | None = None  # leaf payload

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _best_split_regression(X, y, feat_indices, min_leaf):
    """Best (feature, threshold) by SSE reduction via prefix sums."""
    n = y.shape[0]
    total_sum = y.sum()
    best = None  # (sse, feature, threshold)
    for j in feat_indices:
        x = X[:, j]
        order = np.argsort(x, kind="mergesort")
        xs = x[order]
        ys = y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        # split after position i (left = [0..i]), valid where xs[i] < xs[i+1]
        idx = np.arange(min_leaf - 1, n - min_leaf)
        if idx.size == 0:
            continue
        valid = xs[idx] < xs[idx + 1]
        idx = idx[valid]
        if idx.size == 0:
            continue
        nl = idx + 1
        nr = n - nl
        sl = csum[idx]
        sr = total_sum - sl
        sse = (csq[idx] - sl * sl / nl) + ((csq[-1] - csq[idx]) - sr * sr / nr)
        k = int(np.argmin(sse))
        cand = (float(sse[k]), int(j), float((xs[idx[k]] + xs[idx[k] + 1]) / 2))
        if best is None or cand[0] < best[0]:
            best = cand
    return best


def _best_split_classification(X, y, n_classes, feat_indices, min_leaf):
    """Best (feature, threshold) by Gini impurity via prefix class counts."""
    n = y.shape[0]
    onehot = np.eye(n_classes)[y]
    best = None
    for j in feat_indices:
        x = X[:, j]
        order = np.argsort(x, kind="mergesort")
        xs = x[order]
        counts = np.cumsum(onehot[order], axis=0)
        total = counts[-1]
        idx = np.arange(min_leaf - 1, n - min_leaf)
        if idx.size == 0:
            continue
        valid = xs[idx] < xs[idx + 1]
        idx = idx[valid]
        if idx.size == 0:
            continue
        nl = (idx + 1).astype(float)
        nr = n - nl
        cl = counts[idx]
        cr = total - cl
        gini_l = nl - (cl * cl).sum(axis=1) / nl
        gini_r = nr - (cr * cr).sum(axis=1) / nr
        score = gini_l + gini_r
        k = int(np.argmin(score))
        cand = (float(score[k]), int(j), float((xs[idx[k]] + xs[idx[k] + 1]) / 2))
        if best is None or cand[0] < best[0]:
            best = cand
    return best


class DecisionTree:
    """Single CART tree; task is 'regression' or 'classification'."""

    def __init__(
        self,
        task: str = "regression",
        max_depth: int = 12,
        max_features: int | None = None,
        min_samples_leaf: int = 1,
        n_classes: int = 0,
    ):
        self.task = task
        self.max_depth = max_depth
        self.max_features = max_features
        self.min_samples_leaf = min_samples_leaf
        self.n_classes = n_classes
        self.root: _Node | None = None

    def fit(self, X, y, rng: np.random.Generator | None = None, leaf_value_fn=None):
        """leaf_value_fn(sample_indices) overrides leaf payloads (boosting)."""
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        rng = rng or np.random.default_rng(0)
        indices = np.arange(X.shape[0])
        self.root = self._build(X, y, indices, 0, rng, leaf_value_fn)
        return self

    def _leaf(self, y, indices, leaf_value_fn):
        if leaf_value_fn is not None:
            return _Node(value=leaf_value_fn(indices))
        sub = y[indices]
        if self.task == "classification":
            counts = np.bincount(sub, minlength=self.n_classes).astype(float)
            return _Node(value=counts / counts.sum())
        return _Node(value=float(sub.mean()))

    def _build(self, X, y, indices, depth, rng, leaf_value_fn):
        sub_y = y[indices]
        if (
            depth >= self.max_depth
            or indices.size < 2 * self.min_samples_leaf
            or np.all(sub_y == sub_y[0])
        ):
            return self._leaf(y, indices, leaf_value_fn)

        d = X.shape[1]
        if self.max_features is not None and self.max_features < d:
            feats = np.sort(rng.choice(d, size=self.max_features, replace=False))
        else:
            feats = np.arange(d)

        sub_X = X[indices]
        if self.task == "classification":
            split = _best_split_classification(
                sub_X, sub_y, self.n_classes, feats, self.min_samples_leaf
            )
        else:
            split = _best_split_regression(
                sub_X, sub_y.astype(float), feats, self.min_samples_leaf
            )
        if split is None:
            return self._leaf(y, indices, leaf_value_fn)

        _, feature, threshold = split
        mask = X[indices, feature] <= threshold
        left_idx = indices[mask]
        right_idx = indices[~mask]
        if left_idx.size == 0 or right_idx.size == 0:
            return self._leaf(y, indices, leaf_value_fn)
        node = _Node(feature=feature, threshold=threshold)
        node.left = self._build(X, y, left_idx, depth + 1, rng, leaf_value_fn)
        node.right = self._build(X, y, right_idx, depth + 1, rng, leaf_value_fn)
        return node

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = [self._predict_one(row) for row in X]
        return np.asarray(out)

    def _predict_one(self, row):
        node = self.root
        while not node.is_leaf:
            node = node.left if row[node.feature] <= node.threshold else node.right
        return node.value
