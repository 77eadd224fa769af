"""Typed table representation, CSV ingestion/emission, and row serialization.

Cells are ``float`` (numerical), ``str`` (categorical/textual), or ``None``
for missing. Empty CSV fields map to missing on load.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DuplicateHeaderError,
    IndexOutOfRangeError,
    RaggedRowError,
    ValidationError,
)

# Columns whose distinct-value count or distinct ratio falls at or below
# these thresholds are inferred Categorical (overridable per column).
CATEGORICAL_MAX_DISTINCT = 50
CATEGORICAL_MAX_RATIO = 0.05


class DataType(enum.Enum):
    NUMERICAL = "numerical"
    CATEGORICAL = "categorical"
    TEXTUAL = "textual"

    @classmethod
    def from_string(cls, s: str) -> "DataType":
        key = s.strip().lower()
        for dt in cls:
            if dt.value == key:
                return dt
        raise ValidationError(f"unknown data type: {s!r}")


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    dtype: DataType
    description: str = ""

    def __post_init__(self):
        if not self.name or self.name != self.name.strip():
            raise ValidationError(f"invalid column name: {self.name!r}")


@dataclass(frozen=True)
class Table:
    """Immutable typed table: ordered schema plus row-major cells."""

    schema: tuple[ColumnSchema, ...]
    rows: tuple[tuple[object, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        if len(self.schema) < 1:
            raise ValidationError("table needs at least one column")
        names = [c.name for c in self.schema]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate column names in schema")
        width = len(self.schema)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ValidationError(
                    f"row {i} has {len(row)} cells, expected {width}"
                )

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        return len(self.schema)

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.schema]

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.schema):
            if c.name == name:
                return i
        raise ValidationError(f"no such column: {name!r}")

    def column(self, name: str) -> list[object]:
        i = self.column_index(name)
        return [row[i] for row in self.rows]

    def select_rows(self, indices: list[int]) -> "Table":
        for i in indices:
            if not 0 <= i < self.n_rows:
                raise IndexOutOfRangeError(
                    f"row index {i} out of range for table with {self.n_rows} rows"
                )
        return Table(self.schema, tuple(self.rows[i] for i in indices))


@dataclass
class TableMetadata:
    """General description plus per-column descriptions, aligned to a schema."""

    general_description: str
    columns: list[ColumnSchema]

    def validate_against(self, schema: "tuple[ColumnSchema, ...] | list[ColumnSchema]") -> None:
        if [c.name for c in self.columns] != [c.name for c in schema]:
            raise ValidationError("metadata columns do not match schema order")


class SerializationFormat(enum.Enum):
    CSV_BLOCK = "csv"
    PIPE_TABLE = "pipe"


def format_number(x: float) -> str:
    """Shortest round-trip decimal; integral values render without a fraction."""
    if math.isnan(x) or math.isinf(x):
        raise ValidationError(f"non-finite number not serializable: {x}")
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def format_cell(cell) -> str:
    if cell is None:
        return ""
    if isinstance(cell, bool):
        return str(cell)
    if isinstance(cell, (int, float)):
        return format_number(float(cell))
    return str(cell)


def _parse_float(s: str) -> float | None:
    try:
        v = float(s)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def infer_dtype(values: list[str]) -> DataType:
    """Infer a column dtype from the multiset of its non-missing raw strings."""
    present = [v for v in values if v != ""]
    if not present:
        return DataType.TEXTUAL
    if all(_parse_float(v.strip()) is not None for v in present):
        return DataType.NUMERICAL
    distinct = len(set(present))
    if distinct <= CATEGORICAL_MAX_DISTINCT or distinct / len(present) <= CATEGORICAL_MAX_RATIO:
        return DataType.CATEGORICAL
    return DataType.TEXTUAL


def _coerce_loaded(raw: str, dtype: DataType):
    if raw == "":
        return None
    if dtype is DataType.NUMERICAL:
        return _parse_float(raw.strip())
    return raw


def load_csv(path: "str | Path", dtype_overrides: dict | None = None) -> Table:
    """Load an RFC-4180 CSV file into a typed Table.

    Dtypes are inferred per column unless overridden. Under an override to
    Numerical, unparseable cells become missing.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ValidationError(f"cannot read {path}: {e}") from e
    return load_csv_text(text, dtype_overrides)


def load_csv_text(text: str, dtype_overrides: dict | None = None) -> Table:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError("empty CSV: no header line")
    header = [h.strip() for h in header]
    seen = set()
    for name in header:
        if not name:
            raise ValidationError("empty column name in header")
        if name in seen:
            raise DuplicateHeaderError(name)
        seen.add(name)

    raw_rows: list[list[str]] = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise RaggedRowError(lineno, len(header), len(row))
        raw_rows.append(row)

    overrides = dtype_overrides or {}
    dtypes = []
    for j, name in enumerate(header):
        if name in overrides:
            dtypes.append(overrides[name])
        else:
            dtypes.append(infer_dtype([r[j] for r in raw_rows]))

    schema = tuple(ColumnSchema(name, dt) for name, dt in zip(header, dtypes))
    rows = tuple(
        tuple(_coerce_loaded(cell, dt) for cell, dt in zip(row, dtypes))
        for row in raw_rows
    )
    return Table(schema, rows)


def emit_csv(table: Table) -> str:
    """Render the whole table as RFC-4180 CSV with LF line endings."""
    return serialize_rows(table, list(range(table.n_rows)), SerializationFormat.CSV_BLOCK) + "\n"


def write_csv(table: Table, path: "str | Path") -> None:
    Path(path).write_text(emit_csv(table), encoding="utf-8", newline="")


def serialize_rows(
    table: Table,
    row_indices: list[int],
    fmt: SerializationFormat = SerializationFormat.CSV_BLOCK,
) -> str:
    """Deterministic text rendering of selected rows: header then rows in order."""
    for i in row_indices:
        if not 0 <= i < table.n_rows:
            raise IndexOutOfRangeError(
                f"row index {i} out of range for table with {table.n_rows} rows"
            )
    header = table.column_names
    body = [[format_cell(c) for c in table.rows[i]] for i in row_indices]

    if fmt is SerializationFormat.CSV_BLOCK:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in body:
            writer.writerow(row)
        return buf.getvalue().rstrip("\n")

    def pipe_escape(s: str) -> str:
        return s.replace("|", "\\|")

    lines = ["| " + " | ".join(pipe_escape(h) for h in header) + " |"]
    lines.append("|" + "|".join("---" for _ in header) + "|")
    for row in body:
        lines.append("| " + " | ".join(pipe_escape(c) for c in row) + " |")
    return "\n".join(lines)


def default_metadata(table: Table, topic: str = "") -> TableMetadata:
    """Placeholder metadata used when no generated sidecar is available."""
    desc = "A table"
    if topic:
        desc += f" about {topic}"
    desc += (
        f" with {table.n_cols} columns ({', '.join(table.column_names)}) "
        f"and {table.n_rows} rows."
    )
    return TableMetadata(general_description=desc, columns=list(table.schema))
