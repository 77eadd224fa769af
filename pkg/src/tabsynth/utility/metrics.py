"""Scoring: tie-aware ROC AUC (Mann-Whitney), R-squared, and MAPE."""

from __future__ import annotations

import numpy as np

from ..errors import (
    AllZeroActualsError,
    UndefinedAUCError,
    ZeroVarianceError,
)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=float)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1  # 1-based average rank
        i = j + 1
    return ranks


def binary_auc(scores, labels) -> float:
    """Mann-Whitney AUC with ties counted one-half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC needs at least one positive and one negative")
    ranks = _average_ranks(scores)
    rank_sum = ranks[labels == 1].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def auc(scores, labels) -> float:
    """Binary AUC from a score vector, or macro one-vs-rest for multiclass.

    For multiclass, `scores` is an (n, n_classes) probability matrix and
    `labels` are class indices.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if scores.ndim == 1:
        return binary_auc(scores, labels)
    classes = np.unique(labels)
    if classes.size < 2:
        raise UndefinedAUCError("AUC needs at least two classes in the labels")
    if classes.size == 2 and scores.shape[1] >= 2:
        hi, lo = int(classes.max()), int(classes.min())
        return binary_auc(scores[:, hi], (labels == hi).astype(int))
    per_class = [
        binary_auc(scores[:, int(c)], (labels == c).astype(int)) for c in classes
    ]
    return float(np.mean(per_class))


def r2(pred, actual) -> float:
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if actual.size < 2 or np.all(actual == actual[0]):
        raise ZeroVarianceError("R2 needs >= 2 actual values with variance")
    ss_res = float(((actual - pred) ** 2).sum())
    ss_tot = float(((actual - actual.mean()) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def mape(pred, actual) -> float:
    """Mean absolute percentage error; zero actuals are excluded."""
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    mask = actual != 0
    if not mask.any():
        raise AllZeroActualsError("MAPE undefined: every actual value is zero")
    return float(np.mean(np.abs(pred[mask] - actual[mask]) / np.abs(actual[mask])))
