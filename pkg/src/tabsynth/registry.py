"""Dataset registry: which tables exist, where they live, and how they are used."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .errors import IoOrEndpointError, ValidationError


class Task(enum.Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


@dataclass(frozen=True)
class DatasetRegistryEntry:
    id: str
    topic: str
    source_path: str
    is_train: bool
    target_column: str | None = None
    task: Task | None = None

    def __post_init__(self):
        if (self.target_column is None) != (self.task is None):
            raise ValidationError(
                f"registry entry {self.id!r}: target_column and task must be "
                "present together"
            )


def _entry_from_dict(d: dict) -> DatasetRegistryEntry:
    task = d.get("task")
    return DatasetRegistryEntry(
        id=d["id"],
        topic=d.get("topic", ""),
        source_path=d.get("source_path", ""),
        is_train=bool(d["is_train"]),
        target_column=d.get("target_column"),
        task=Task(task) if task else None,
    )


def load_registry(path: str | Path) -> list[DatasetRegistryEntry]:
    """Load a registry manifest (YAML list of entries, or {datasets: [...]})."""
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise IoOrEndpointError(f"cannot read registry {path}: {e}") from e
    if isinstance(raw, dict):
        raw = raw.get("datasets", [])
    if not isinstance(raw, list):
        raise ValidationError("registry manifest must be a list of entries")
    entries = [_entry_from_dict(d) for d in raw]
    ids = [e.id for e in entries]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate dataset ids in registry")
    return entries


def save_registry(entries: list[DatasetRegistryEntry], path: str | Path) -> None:
    data = []
    for e in entries:
        d: dict = {
            "id": e.id,
            "topic": e.topic,
            "source_path": e.source_path,
            "is_train": e.is_train,
        }
        if e.target_column is not None:
            d["target_column"] = e.target_column
            d["task"] = e.task.value
        data.append(d)
    Path(path).write_text(
        yaml.safe_dump(data, sort_keys=False), encoding="utf-8"
    )


def builtin_registry() -> list[DatasetRegistryEntry]:
    """The checked-in manifest of the 20 public datasets (CSVs user-supplied)."""
    with resources.files("tabsynth.data").joinpath("registry_manifest.yaml").open(
        "r", encoding="utf-8"
    ) as f:
        raw = yaml.safe_load(f)
    return [_entry_from_dict(d) for d in raw["datasets"]]
