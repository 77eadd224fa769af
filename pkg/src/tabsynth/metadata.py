"""LLM-backed table metadata generation: prompt rendering, response parsing,
validation gates, and sidecar persistence."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import PromptTooLargeError, ValidationError
from .table import (
    ColumnSchema,
    DataType,
    SerializationFormat,
    Table,
    TableMetadata,
    serialize_rows,
)

GENERAL_MARKER = "General Description:"
COLUMNS_MARKER = "Column Descriptions:"

DEFAULT_TOKEN_BUDGET = 8000
SAMPLE_ROWS_ON_OVERFLOW = 200

_COLUMN_LINE = re.compile(r"^\s*-\s*(?P<name>[^()]+?)\s*\((?P<dtype>[^()]*)\)\s*:\s*(?P<desc>.*)$")


@dataclass
class MetadataDraft:
    raw_response: str
    parsed: TableMetadata | None
    issues: list[str] = field(default_factory=list)
    used_sample_fallback: bool = False


def estimate_tokens(text: str) -> int:
    # rough 4-chars-per-token heuristic; budgets are configurable
    return (len(text) + 3) // 4


def render_metadata_response(metadata: TableMetadata) -> str:
    """Render metadata in the exact format the prompt asks the model to emit."""
    lines = [GENERAL_MARKER, metadata.general_description, "", COLUMNS_MARKER]
    for col in metadata.columns:
        lines.append(f"- {col.name} ({col.dtype.value}): {col.description}")
    return "\n".join(lines)


def _render(table: Table, exemplar: TableMetadata, table_text: str, note: str) -> str:
    parts = [
        "Write a description of the table below. Respond in exactly this format:",
        "",
        GENERAL_MARKER,
        "<one paragraph covering the topic, the general structure, and typical applications>",
        "",
        COLUMNS_MARKER,
        "- <column name> (<numerical|categorical|textual>): <one-sentence description>",
        "",
        "Include one entry per column, in table order, with the data type in "
        "parentheses. Here is a completed example for a different table:",
        "",
        render_metadata_response(exemplar),
        "",
        note,
        table_text,
    ]
    return "\n".join(parts)


def render_metadata_prompt(
    table: Table,
    exemplar: TableMetadata,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> str:
    """Prompt embedding the exemplar and the whole table as a CSV block."""
    if table.n_rows == 0:
        raise ValidationError("cannot describe an empty table")
    table_text = serialize_rows(
        table, list(range(table.n_rows)), SerializationFormat.CSV_BLOCK
    )
    prompt = _render(table, exemplar, table_text, "Now describe this table:")
    est = estimate_tokens(prompt)
    if est > token_budget:
        raise PromptTooLargeError(est, token_budget)
    return prompt


def render_metadata_prompt_sampled(
    table: Table,
    exemplar: TableMetadata,
    n_rows: int = SAMPLE_ROWS_ON_OVERFLOW,
) -> str:
    """Overflow fallback: evenly spaced row sample plus per-column summaries."""
    step = max(1, table.n_rows // n_rows)
    indices = list(range(0, table.n_rows, step))[:n_rows]
    table_text = serialize_rows(table, indices, SerializationFormat.CSV_BLOCK)
    summaries = []
    for col in table.schema:
        values = [v for v in table.column(col.name) if v is not None]
        if col.dtype is DataType.NUMERICAL and values:
            summaries.append(
                f"- {col.name}: numeric, min {min(values)}, max {max(values)}"
            )
        else:
            distinct = len({str(v) for v in values})
            summaries.append(f"- {col.name}: {distinct} distinct values")
    note = (
        f"The table has {table.n_rows} rows; a sample of {len(indices)} rows "
        "is shown, with per-column summaries:\n" + "\n".join(summaries) +
        "\n\nNow describe this table:"
    )
    return _render(table, exemplar, table_text, note)


def _normalize_name(s: str) -> str:
    return " ".join(s.strip().lower().split())


def parse_metadata_response(
    raw: str, schema: "list[ColumnSchema] | tuple[ColumnSchema, ...]"
) -> MetadataDraft:
    """Total parser: every failure becomes an issue, never an exception.

    Structural issues (missing markers or columns) leave `parsed` absent;
    dtype mismatches keep the schema dtype and only record an issue.
    """
    issues: list[str] = []
    structural = False

    gpos = raw.find(GENERAL_MARKER)
    cpos = raw.find(COLUMNS_MARKER)
    general = ""
    if gpos < 0:
        issues.append("missing section marker 'General Description'")
        structural = True
    if cpos < 0:
        issues.append("missing section marker 'Column Descriptions'")
        structural = True

    if gpos >= 0:
        end = cpos if cpos > gpos else len(raw)
        general = raw[gpos + len(GENERAL_MARKER):end].strip()
    if not general:
        issues.append("empty general description")

    entries: dict[str, tuple[str, str]] = {}
    if cpos >= 0:
        for line in raw[cpos + len(COLUMNS_MARKER):].split("\n"):
            m = _COLUMN_LINE.match(line)
            if m:
                entries[_normalize_name(m.group("name"))] = (
                    m.group("dtype").strip(),
                    m.group("desc").strip(),
                )

    columns: list[ColumnSchema] = []
    for col in schema:
        key = _normalize_name(col.name)
        if key not in entries:
            issues.append(f"missing column {col.name!r}")
            structural = True
            continue
        dtype_str, desc = entries[key]
        try:
            claimed = DataType.from_string(dtype_str)
        except ValidationError:
            claimed = None
            issues.append(f"column {col.name!r}: unknown dtype {dtype_str!r}")
        if claimed is not None and claimed is not col.dtype:
            issues.append(
                f"column {col.name!r}: response says {dtype_str!r}, "
                f"schema says {col.dtype.value!r}"
            )
        if not desc:
            issues.append(f"column {col.name!r}: empty description")
        columns.append(ColumnSchema(col.name, col.dtype, desc))

    known = {_normalize_name(c.name) for c in schema}
    for extra in entries:
        if extra not in known:
            issues.append(f"unexpected column {extra!r} in response")

    parsed = None
    if not structural:
        parsed = TableMetadata(general_description=general, columns=columns)
    return MetadataDraft(raw_response=raw, parsed=parsed, issues=issues)


# --- sidecar persistence ---------------------------------------------------


def sidecar_path(csv_path: str | Path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.name + ".metadata.json")


def save_metadata_sidecar(metadata: TableMetadata, path: str | Path) -> None:
    data = {
        "general_description": metadata.general_description,
        "columns": [
            {"name": c.name, "dtype": c.dtype.value, "description": c.description}
            for c in metadata.columns
        ],
    }
    Path(path).write_text(
        json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def load_metadata_sidecar(path: str | Path) -> TableMetadata:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return TableMetadata(
        general_description=data["general_description"],
        columns=[
            ColumnSchema(
                c["name"], DataType.from_string(c["dtype"]), c.get("description", "")
            )
            for c in data["columns"]
        ],
    )
