"""Train-on-Synthetic, Test-on-Real evaluation harness."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import TabsynthError, UndefinedAUCError
from ..registry import DatasetRegistryEntry, Task
from ..table import Table
from .encode import fit_encoder, transform
from .metrics import auc, mape, r2
from .models import ModelSpec, build_model, default_specs


@dataclass
class UtilityReport:
    metric: str  # "auc" | "r2"
    per_model: dict = field(default_factory=dict)  # family name -> score
    average: float = float("nan")
    baseline_real: float | None = None
    failures: dict = field(default_factory=dict)  # family name -> reason
    flags: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)  # e.g. regression MAPE per model

    def to_json_dict(self) -> dict:
        return {
            "metric": self.metric,
            "per_model": self.per_model,
            "average": self.average,
            "baseline_real": self.baseline_real,
            "failures": self.failures,
            "flags": self.flags,
            "extras": self.extras,
        }


def stratified_split(
    n: int, labels, test_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic 80/20-style split; stratified when labels are given."""
    rng = np.random.default_rng(seed)
    indices = np.arange(n)
    if labels is None:
        perm = rng.permutation(indices)
        n_test = max(1, int(round(n * test_fraction)))
        return np.sort(perm[n_test:]), np.sort(perm[:n_test])
    labels = np.asarray(labels)
    test_parts = []
    for c in np.unique(labels):
        members = rng.permutation(indices[labels == c])
        n_test = max(1, int(round(members.size * test_fraction)))
        test_parts.append(members[:n_test])
    test = np.sort(np.concatenate(test_parts))
    mask = np.ones(n, dtype=bool)
    mask[test] = False
    return indices[mask], test


def _score(task: Task, model, X_test, y_test) -> tuple[float, dict]:
    pred = model.predict(X_test)
    extras: dict = {}
    if task is Task.CLASSIFICATION:
        pred = np.asarray(pred)
        if pred.ndim == 2 and pred.shape[1] == 2:
            return auc(pred[:, 1], y_test), extras
        return auc(pred, y_test), extras
    value = r2(pred, y_test)
    try:
        extras["mape"] = mape(pred, y_test)
    except TabsynthError:
        pass
    return value, extras


def _train_and_score(specs, task: Task, train_mat, X_test, y_test):
    per_model: dict = {}
    failures: dict = {}
    flags: list = []
    extras: dict = {}
    for spec in specs:
        name = spec.family.value
        try:
            if task is Task.CLASSIFICATION and np.unique(train_mat.target).size < 2:
                # constant predictor: AUC over a single score is undefined
                flags.append(f"{name}: single-class training target")
                raise UndefinedAUCError("single-class training target")
            model = build_model(spec, task.value)
            model.fit(train_mat.features, train_mat.target)
            score, ex = _score(task, model, X_test, y_test)
            per_model[name] = score
            if ex:
                extras[name] = ex
        except TabsynthError as e:
            failures[name] = str(e)
        except Exception as e:  # pragma: no cover - defensive
            failures[name] = f"{type(e).__name__}: {e}"
    return per_model, failures, flags, extras


def tstr(
    real: Table,
    synth: Table | None,
    entry: DatasetRegistryEntry,
    specs: list[ModelSpec] | None = None,
    split_seed: int = 0,
    test_fraction: float = 0.2,
) -> UtilityReport:
    """Split real 80/20, train specs on synth, score on the real test split.

    baseline_real trains the same specs on the real 80 percent. A family
    failure is reported per family and never aborts the evaluation.
    """
    if entry.target_column is None or entry.task is None:
        raise TabsynthError(
            f"registry entry {entry.id!r} declares no target/task for TSTR"
        )
    task = entry.task
    specs = specs if specs is not None else default_specs()

    target_idx = real.column_index(entry.target_column)
    strat = None
    if task is Task.CLASSIFICATION:
        strat = [str(r[target_idx]) if r[target_idx] is not None else "" for r in real.rows]
    train_idx, test_idx = stratified_split(
        real.n_rows, strat, test_fraction, split_seed
    )
    real_train = real.select_rows(train_idx.tolist())
    real_test = real.select_rows(test_idx.tolist())

    encoder = fit_encoder(real_train, entry.target_column, task)
    test_mat = transform(encoder, real_test)

    report = UtilityReport(metric="auc" if task is Task.CLASSIFICATION else "r2")

    baseline_mat = transform(encoder, real_train)
    base_scores, base_failures, base_flags, _ = _train_and_score(
        specs, task, baseline_mat, test_mat.features, test_mat.target
    )
    if base_scores:
        report.baseline_real = float(np.mean(list(base_scores.values())))
    report.flags.extend(f"baseline {f}" for f in base_flags)

    if synth is None:
        for spec in specs:
            report.failures[spec.family.value] = "no usable synthetic rows"
        return report

    try:
        synth_mat = transform(encoder, synth)
    except TabsynthError as e:
        for spec in specs:
            report.failures[spec.family.value] = str(e)
        return report

    per_model, failures, flags, extras = _train_and_score(
        specs, task, synth_mat, test_mat.features, test_mat.target
    )
    report.per_model = per_model
    report.failures.update(failures)
    report.flags.extend(flags)
    report.extras = extras
    if per_model:
        report.average = float(np.mean(list(per_model.values())))
    if synth_mat.dropped_target_rows:
        report.flags.append(
            f"synthetic rows dropped for unusable target: {synth_mat.dropped_target_rows}"
        )
    if synth_mat.unseen_category_cells:
        report.flags.append(
            f"unseen synthetic category cells: {synth_mat.unseen_category_cells}"
        )
    return report
