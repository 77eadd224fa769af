"""Construct instruction instances and emit train/eval JSONL datasets.

Each instance pairs a prompt (task instruction + table metadata + an N-row
input snapshot) with a completion holding N disjoint rows from the same
table, rendered as a CSV block.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InsufficientRowsError, ValidationError
from .metadata import load_metadata_sidecar, sidecar_path
from .registry import DatasetRegistryEntry
from .table import (
    SerializationFormat,
    Table,
    TableMetadata,
    default_metadata,
    load_csv,
    serialize_rows,
)

SNAPSHOT_MARKER = "Input rows"

JSONL_FIELDS = ("prompt", "completion", "dataset_id", "split", "seed")


class Split(enum.Enum):
    TRAIN = "train"
    EVAL = "eval"
    OOD_EVAL = "ood_eval"


@dataclass
class BuildPlan:
    n_rows: int = 20
    train_instances_per_table: int = 500
    eval_instances_per_table: int = 100
    seed: int = 0
    prompt_template_id: str = "default-v1"
    allow_overlap: bool = False  # for tables with fewer than 2*n_rows rows

    def __post_init__(self):
        if self.n_rows < 1:
            raise ValidationError("n_rows must be >= 1")
        if self.train_instances_per_table < 0 or self.eval_instances_per_table < 0:
            raise ValidationError("instance counts must be >= 0")


@dataclass
class InstructionInstance:
    dataset_id: str
    split: Split
    instruction: str
    metadata: TableMetadata
    input_rows: Table
    expected_rows: Table
    seed: int
    input_indices: tuple[int, ...] = ()
    expected_indices: tuple[int, ...] = ()


@dataclass
class BuildSummary:
    train_records: int = 0
    eval_records: int = 0
    ood_records: int = 0
    per_dataset: dict = field(default_factory=dict)


_TEMPLATES = {
    "default-v1": (
        "You are given a description of a table and a sample of {n} rows drawn "
        "from it. Generate {n} new rows that follow the same column structure "
        "and the same data distribution as the sample. Output only the new rows "
        "in CSV format, starting with the header line."
    ),
}


def instruction_text(template_id: str, n_rows: int) -> str:
    if template_id not in _TEMPLATES:
        raise ValidationError(f"unknown prompt template: {template_id!r}")
    return _TEMPLATES[template_id].format(n=n_rows)


def _instance_rng(seed: int, dataset_id: str, split: Split, index: int) -> random.Random:
    return random.Random(f"{seed}:{dataset_id}:{split.value}:{index}")


def sample_instance(
    table: Table,
    metadata: TableMetadata,
    plan: BuildPlan,
    instance_index: int,
    dataset_id: str = "",
    split: Split = Split.TRAIN,
) -> InstructionInstance:
    """Sample one instance: N input rows and N disjoint expected rows.

    Deterministic given (plan.seed, dataset_id, split, instance_index).
    """
    n = plan.n_rows
    rng = _instance_rng(plan.seed, dataset_id, split, instance_index)
    if table.n_rows >= 2 * n:
        picked = rng.sample(range(table.n_rows), 2 * n)
        input_idx, expected_idx = picked[:n], picked[n:]
    elif plan.allow_overlap and table.n_rows >= n:
        input_idx = rng.sample(range(table.n_rows), n)
        expected_idx = rng.sample(range(table.n_rows), n)
    else:
        raise InsufficientRowsError(table.n_rows, 2 * n, dataset_id)

    return InstructionInstance(
        dataset_id=dataset_id,
        split=split,
        instruction=instruction_text(plan.prompt_template_id, n),
        metadata=metadata,
        input_rows=table.select_rows(input_idx),
        expected_rows=table.select_rows(expected_idx),
        seed=plan.seed,
        input_indices=tuple(input_idx),
        expected_indices=tuple(expected_idx),
    )


def render_prompt(instance: InstructionInstance) -> str:
    """Render the full prompt; the expected rows never appear here."""
    n = instance.input_rows.n_rows
    meta = instance.metadata
    lines = [instance.instruction, ""]
    lines.append("Table description:")
    lines.append(meta.general_description)
    lines.append("")
    lines.append("Column descriptions:")
    for col in meta.columns:
        desc = col.description or "(no description)"
        lines.append(f"- {col.name} ({col.dtype.value}): {desc}")
    lines.append("")
    lines.append(f"{SNAPSHOT_MARKER} ({n} rows):")
    lines.append(
        serialize_rows(
            instance.input_rows,
            list(range(n)),
            SerializationFormat.CSV_BLOCK,
        )
    )
    return "\n".join(lines)


def render_completion(instance: InstructionInstance) -> str:
    return serialize_rows(
        instance.expected_rows,
        list(range(instance.expected_rows.n_rows)),
        SerializationFormat.CSV_BLOCK,
    )


def instance_record(instance: InstructionInstance) -> dict:
    return {
        "prompt": render_prompt(instance),
        "completion": render_completion(instance),
        "dataset_id": instance.dataset_id,
        "split": instance.split.value,
        "seed": instance.seed,
    }


def _load_table_and_metadata(entry: DatasetRegistryEntry):
    table = load_csv(entry.source_path)
    meta = None
    sidecar = sidecar_path(entry.source_path)
    if sidecar.exists():
        meta = load_metadata_sidecar(sidecar)
    if meta is None:
        meta = default_metadata(table, entry.topic)
    return table, meta


def build_dataset(
    registry: list[DatasetRegistryEntry],
    plan: BuildPlan,
    out_dir: str | Path,
) -> BuildSummary:
    """Emit train.jsonl / eval.jsonl / ood_eval.jsonl under out_dir.

    Train records are pooled across training tables and globally shuffled
    with plan.seed; the shuffle is a pure permutation of the record multiset.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = BuildSummary()

    train_records: list[dict] = []
    eval_records: list[dict] = []
    ood_records: list[dict] = []

    for entry in registry:
        table, meta = _load_table_and_metadata(entry)
        counts = {"train": 0, "eval": 0, "ood_eval": 0}
        try:
            if entry.is_train:
                for i in range(plan.train_instances_per_table):
                    inst = sample_instance(
                        table, meta, plan, i, entry.id, Split.TRAIN
                    )
                    train_records.append(instance_record(inst))
                    counts["train"] += 1
                for i in range(plan.eval_instances_per_table):
                    inst = sample_instance(
                        table, meta, plan, i, entry.id, Split.EVAL
                    )
                    eval_records.append(instance_record(inst))
                    counts["eval"] += 1
            else:
                for i in range(plan.eval_instances_per_table):
                    inst = sample_instance(
                        table, meta, plan, i, entry.id, Split.OOD_EVAL
                    )
                    ood_records.append(instance_record(inst))
                    counts["ood_eval"] += 1
        except InsufficientRowsError as e:
            raise InsufficientRowsError(e.n_rows, e.n_needed, entry.id) from e
        summary.per_dataset[entry.id] = counts

    random.Random(plan.seed).shuffle(train_records)

    _write_jsonl(out_dir / "train.jsonl", train_records)
    _write_jsonl(out_dir / "eval.jsonl", eval_records)
    _write_jsonl(out_dir / "ood_eval.jsonl", ood_records)

    summary.train_records = len(train_records)
    summary.eval_records = len(eval_records)
    summary.ood_records = len(ood_records)
    return summary


def _write_jsonl(path: Path, records: list[dict]) -> None:
    with path.open("w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    records = []
    with Path(path).open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ValidationError(f"{path}:{lineno}: bad JSON: {e}") from e
    return records
