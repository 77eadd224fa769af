"""Feature encoding for TSTR: fitted on real training data only and reused
verbatim for synthetic and test tables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import AllRowsDroppedError, TargetMissingError
from ..registry import Task
from ..table import DataType, Table


@dataclass
class SupervisedMatrix:
    features: np.ndarray
    target: np.ndarray
    feature_names: list[str]
    dropped_target_rows: int = 0
    unseen_category_cells: int = 0


@dataclass
class EncoderState:
    target: str
    task: Task
    numeric_cols: list[str] = field(default_factory=list)
    numeric_stats: dict = field(default_factory=dict)  # name -> (mean, sd)
    categorical_cols: list[str] = field(default_factory=list)
    vocabularies: dict = field(default_factory=dict)  # name -> ordered labels
    excluded_textual: list[str] = field(default_factory=list)
    class_labels: list[str] = field(default_factory=list)
    feature_names: list[str] = field(default_factory=list)


def _target_value(cell, task: Task):
    if cell is None:
        return None
    if task is Task.REGRESSION:
        try:
            v = float(cell)
        except (TypeError, ValueError):
            return None
        return v if np.isfinite(v) else None
    return str(cell)


def fit_encoder(real_train: Table, target: str, task: Task) -> EncoderState:
    if target not in real_train.column_names:
        raise TargetMissingError(f"target column {target!r} not in table")
    state = EncoderState(target=target, task=task)
    for col in real_train.schema:
        if col.name == target:
            continue
        if col.dtype is DataType.NUMERICAL:
            values = np.asarray(
                [float(v) for v in real_train.column(col.name) if v is not None],
                dtype=float,
            )
            mean = float(values.mean()) if values.size else 0.0
            sd = float(values.std()) if values.size else 1.0
            if sd == 0:
                sd = 1.0
            state.numeric_cols.append(col.name)
            state.numeric_stats[col.name] = (mean, sd)
        elif col.dtype is DataType.CATEGORICAL:
            seen = sorted(
                {str(v) for v in real_train.column(col.name) if v is not None}
            )
            state.categorical_cols.append(col.name)
            state.vocabularies[col.name] = seen
        else:
            state.excluded_textual.append(col.name)

    if task is Task.CLASSIFICATION:
        labels = sorted(
            {
                str(v)
                for v in real_train.column(target)
                if v is not None
            }
        )
        state.class_labels = labels

    state.feature_names = list(state.numeric_cols) + [
        f"{c}={v}" for c in state.categorical_cols for v in state.vocabularies[c]
    ]
    return state


def transform(state: EncoderState, table: Table) -> SupervisedMatrix:
    """Encode a table with a fitted state; rows without a usable target drop."""
    if state.target not in table.column_names:
        raise TargetMissingError(f"target column {state.target!r} not in table")

    label_index = {l: i for i, l in enumerate(state.class_labels)}
    t_idx = table.column_index(state.target)
    col_idx = {c.name: i for i, c in enumerate(table.schema)}

    rows_out = []
    targets = []
    dropped = 0
    unseen = 0
    for row in table.rows:
        tval = _target_value(row[t_idx], state.task)
        if tval is None:
            dropped += 1
            continue
        if state.task is Task.CLASSIFICATION:
            if tval not in label_index:
                dropped += 1
                continue
            targets.append(label_index[tval])
        else:
            targets.append(tval)

        feats = []
        for name in state.numeric_cols:
            mean, sd = state.numeric_stats[name]
            cell = row[col_idx[name]] if name in col_idx else None
            if cell is None:
                feats.append(0.0)  # mean-impute in standardized space
            else:
                try:
                    feats.append((float(cell) - mean) / sd)
                except (TypeError, ValueError):
                    feats.append(0.0)
        for name in state.categorical_cols:
            vocab = state.vocabularies[name]
            cell = row[col_idx[name]] if name in col_idx else None
            block = [0.0] * len(vocab)
            if cell is not None:
                key = str(cell)
                if key in vocab:
                    block[vocab.index(key)] = 1.0
                else:
                    unseen += 1
            feats.extend(block)
        rows_out.append(feats)

    if not rows_out:
        raise AllRowsDroppedError(
            f"no rows with a usable {state.target!r} target remain"
        )

    target_dtype = int if state.task is Task.CLASSIFICATION else float
    return SupervisedMatrix(
        features=np.asarray(rows_out, dtype=float),
        target=np.asarray(targets, dtype=target_dtype),
        feature_names=list(state.feature_names),
        dropped_target_rows=dropped,
        unseen_category_cells=unseen,
    )


def encode(real_train: Table, other: Table, target: str, task: Task) -> SupervisedMatrix:
    """Fit on real_train, transform `other` (possibly real_train itself)."""
    return transform(fit_encoder(real_train, target, task), other)
