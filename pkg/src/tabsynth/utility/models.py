"""Model families for TSTR: linear, bagged random forest, gradient boosting.

All models are deterministic given their seed and expose a uniform
predict interface: class-probability matrices for classification, numeric
vectors for regression.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from .trees import DecisionTree

RIDGE = 1e-6


class ModelFamily(enum.Enum):
    LINEAR = "linear"
    RANDOM_FOREST = "random_forest"
    GRADIENT_BOOSTED = "gradient_boosted"


@dataclass
class ModelSpec:
    family: ModelFamily
    seed: int = 0
    hyperparameters: dict = field(default_factory=dict)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -35, 35)))


def _add_intercept(X):
    return np.hstack([np.ones((X.shape[0], 1)), X])


class LinearModel:
    """OLS with a small ridge (regression) / IRLS logistic (classification)."""

    def __init__(self, task: str, seed: int = 0, ridge: float = RIDGE, max_iter: int = 100):
        self.task = task
        self.ridge = ridge
        self.max_iter = max_iter
        self.singular_fallback = False
        self.n_classes = 0

    def fit(self, X, y):
        X = _add_intercept(np.asarray(X, dtype=float))
        if self.task == "regression":
            self.coef_ = self._solve(X, np.asarray(y, dtype=float))
        else:
            y = np.asarray(y, dtype=int)
            self.n_classes = int(y.max()) + 1
            self.coefs_ = [
                self._fit_logistic(X, (y == c).astype(float))
                for c in range(self.n_classes)
            ]
        return self

    def _solve(self, X, y):
        d = X.shape[1]
        A = X.T @ X + self.ridge * np.eye(d)
        try:
            return np.linalg.solve(A, X.T @ y)
        except np.linalg.LinAlgError:
            self.singular_fallback = True
            return np.linalg.lstsq(X, y, rcond=None)[0]

    def _fit_logistic(self, X, y):
        d = X.shape[1]
        w = np.zeros(d)
        for _ in range(self.max_iter):
            p = _sigmoid(X @ w)
            W = p * (1 - p) + 1e-9
            grad = X.T @ (y - p) - self.ridge * w
            H = (X.T * W) @ X + self.ridge * np.eye(d)
            try:
                step = np.linalg.solve(H, grad)
            except np.linalg.LinAlgError:
                self.singular_fallback = True
                step = np.linalg.lstsq(H, grad, rcond=None)[0]
            w = w + step
            if np.max(np.abs(step)) < 1e-10:
                break
        return w

    def predict(self, X):
        X = _add_intercept(np.asarray(X, dtype=float))
        if self.task == "regression":
            return X @ self.coef_
        scores = np.column_stack([_sigmoid(X @ w) for w in self.coefs_])
        total = scores.sum(axis=1, keepdims=True)
        total[total == 0] = 1.0
        return scores / total


class RandomForestModel:
    """Bagged CART with per-tree seeded RNG streams."""

    def __init__(
        self,
        task: str,
        seed: int = 0,
        n_estimators: int = 100,
        max_depth: int = 12,
    ):
        self.task = task
        self.seed = seed
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.n_classes = 0

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        n, d = X.shape
        if self.task == "classification":
            y = np.asarray(y, dtype=int)
            self.n_classes = int(y.max()) + 1
            max_features = max(1, int(np.sqrt(d)))
        else:
            y = np.asarray(y, dtype=float)
            max_features = max(1, d // 3)

        streams = np.random.SeedSequence(self.seed).spawn(self.n_estimators)
        self.trees = []
        for ss in streams:
            rng = np.random.default_rng(ss)
            boot = rng.integers(0, n, size=n)
            tree = DecisionTree(
                task=self.task,
                max_depth=self.max_depth,
                max_features=max_features,
                n_classes=self.n_classes,
            )
            tree.fit(X[boot], y[boot], rng=rng)
            self.trees.append(tree)
        return self

    def predict(self, X):
        preds = np.stack([np.asarray(t.predict(X)) for t in self.trees])
        return preds.mean(axis=0)


class GradientBoostedModel:
    """Additive regression trees: squared loss or one-vs-rest logistic loss."""

    def __init__(
        self,
        task: str,
        seed: int = 0,
        n_rounds: int = 200,
        learning_rate: float = 0.1,
        max_depth: int = 3,
    ):
        self.task = task
        self.seed = seed
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.n_classes = 0

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        if self.task == "classification":
            y = np.asarray(y, dtype=int)
            self.n_classes = int(y.max()) + 1
            self.boosters = [
                self._fit_binary(X, (y == c).astype(float))
                for c in range(self.n_classes)
            ]
        else:
            y = np.asarray(y, dtype=float)
            self.init_ = float(y.mean())
            self.trees_ = []
            pred = np.full(y.shape, self.init_)
            for _ in range(self.n_rounds):
                residual = y - pred
                tree = DecisionTree(task="regression", max_depth=self.max_depth)
                tree.fit(X, residual)
                pred = pred + self.learning_rate * np.asarray(tree.predict(X))
                self.trees_.append(tree)
        return self

    def _fit_binary(self, X, y):
        pbar = np.clip(y.mean(), 1e-6, 1 - 1e-6)
        init = float(np.log(pbar / (1 - pbar)))
        raw = np.full(y.shape, init)
        trees = []
        for _ in range(self.n_rounds):
            p = _sigmoid(raw)
            residual = y - p
            hessian = np.clip(p * (1 - p), 1e-9, None)

            def leaf_value(indices, residual=residual, hessian=hessian):
                return float(residual[indices].sum() / hessian[indices].sum())

            tree = DecisionTree(task="regression", max_depth=self.max_depth)
            tree.fit(X, residual, leaf_value_fn=leaf_value)
            raw = raw + self.learning_rate * np.asarray(tree.predict(X))
            trees.append(tree)
        return (init, trees)

    def _raw_binary(self, booster, X):
        init, trees = booster
        raw = np.full(X.shape[0], init)
        for tree in trees:
            raw = raw + self.learning_rate * np.asarray(tree.predict(X))
        return raw

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        if self.task == "regression":
            pred = np.full(X.shape[0], self.init_)
            for tree in self.trees_:
                pred = pred + self.learning_rate * np.asarray(tree.predict(X))
            return pred
        scores = np.column_stack(
            [_sigmoid(self._raw_binary(b, X)) for b in self.boosters]
        )
        total = scores.sum(axis=1, keepdims=True)
        total[total == 0] = 1.0
        return scores / total


def build_model(spec: ModelSpec, task: str):
    hp = spec.hyperparameters
    if spec.family is ModelFamily.LINEAR:
        return LinearModel(task, seed=spec.seed, **hp)
    if spec.family is ModelFamily.RANDOM_FOREST:
        return RandomForestModel(task, seed=spec.seed, **hp)
    if spec.family is ModelFamily.GRADIENT_BOOSTED:
        return GradientBoostedModel(task, seed=spec.seed, **hp)
    raise ValidationError(f"unknown model family: {spec.family}")


def default_specs(seed: int = 0) -> list[ModelSpec]:
    return [
        ModelSpec(ModelFamily.LINEAR, seed=seed),
        ModelSpec(ModelFamily.RANDOM_FOREST, seed=seed),
        ModelSpec(ModelFamily.GRADIENT_BOOSTED, seed=seed),
    ]
