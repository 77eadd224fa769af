"""Salvage typed tables out of raw LLM text.

Recognizes CSV blocks (header matching most of the expected schema, or
headerless with exact arity) and markdown pipe tables, coerces cells to the
schema dtypes, and classifies the outcome as Clean, Salvaged, or Rejected.
All entry points are total: malformed input never raises.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import re
from dataclasses import dataclass, field

from .table import ColumnSchema, DataType, Table

HEADER_MATCH_THRESHOLD = 0.8

_ALIGN_CELL = re.compile(r"^\s*:?-+:?\s*$")
_CURRENCY = "$€£¥"


class ParseStatus(enum.Enum):
    CLEAN = "clean"
    SALVAGED = "salvaged"
    REJECTED = "rejected"


@dataclass
class CoercionFailure:
    row: int
    column: str
    raw: str


@dataclass
class ParseOutcome:
    status: ParseStatus
    table: Table | None
    rows_recovered: int
    rows_requested: int
    discarded_spans: list[tuple[int, int]] = field(default_factory=list)
    coercion_failures: list[CoercionFailure] = field(default_factory=list)
    dropped_rows: int = 0
    n_blocks: int = 0
    hint: str = ""

    def to_json_dict(self) -> dict:
        from .table import emit_csv

        return {
            "status": self.status.value,
            "rows_recovered": self.rows_recovered,
            "rows_requested": self.rows_requested,
            "discarded_spans": [list(s) for s in self.discarded_spans],
            "coercion_failures": [
                {"row": f.row, "column": f.column, "raw": f.raw}
                for f in self.coercion_failures
            ],
            "dropped_rows": self.dropped_rows,
            "hint": self.hint,
            "table_csv": emit_csv(self.table) if self.table is not None else None,
        }


def _normalize(s: str) -> str:
    return " ".join(s.strip().lower().split())


def coerce_cell(raw: str, dtype: DataType, vocabulary: set | None = None):
    """Coerce one raw cell string; returns (value, ok)."""
    if raw is None:
        return None, True
    stripped = raw.strip()
    if stripped == "":
        return None, True
    if dtype is DataType.NUMERICAL:
        cleaned = stripped
        while cleaned and cleaned[0] in _CURRENCY:
            cleaned = cleaned[1:].lstrip()
        cleaned = cleaned.replace(",", "")
        try:
            v = float(cleaned)
        except ValueError:
            return None, False
        if not math.isfinite(v):
            return None, False
        return v, True
    if dtype is DataType.CATEGORICAL:
        if vocabulary is not None:
            if stripped in vocabulary:
                return stripped, True
            norm = _normalize(stripped)
            for v in vocabulary:
                if _normalize(str(v)) == norm:
                    return v, True
            return None, False
        return stripped, True
    return raw, True


# --- line-level scanning ---------------------------------------------------


@dataclass
class _Line:
    text: str
    start: int
    end: int  # exclusive, without the newline


def _split_lines(text: str) -> list[_Line]:
    lines = []
    pos = 0
    for part in text.split("\n"):
        lines.append(_Line(part, pos, pos + len(part)))
        pos += len(part) + 1
    return lines


def _csv_cells(line: str) -> list[str] | None:
    if not line.strip():
        return None
    try:
        rows = list(csv.reader(io.StringIO(line)))
    except csv.Error:
        return None
    if len(rows) != 1:
        return None
    return rows[0]


def _pipe_cells(line: str) -> list[str] | None:
    s = line.strip()
    if not s.startswith("|") or s.count("|") < 2:
        return None
    inner = s[1:-1] if s.endswith("|") else s[1:]
    cells = re.split(r"(?<!\\)\|", inner)
    return [c.replace("\\|", "|").strip() for c in cells]


def _is_alignment_row(cells: list[str]) -> bool:
    return len(cells) >= 1 and all(_ALIGN_CELL.match(c) for c in cells)


def _header_match(cells: list[str], schema_norm: set[str]) -> float:
    matched = {_normalize(c) for c in cells} & schema_norm
    return len(matched) / len(schema_norm)


@dataclass
class _Block:
    # rows: list of (line_index, raw cells aligned to header or position)
    header_map: list[int | None] | None  # schema col -> source cell index
    rows: list[tuple[int, list[str]]]
    consumed_lines: list[int]
    dropped_lines: list[int]


def _scan_blocks(
    lines: list[_Line],
    schema: list[ColumnSchema],
    threshold: float,
) -> list[_Block]:
    n_cols = len(schema)
    schema_norm = {_normalize(c.name) for c in schema}
    blocks: list[_Block] = []
    i = 0
    L = len(lines)

    def header_mapping(cells: list[str]) -> list[int | None]:
        cell_norm = [_normalize(c) for c in cells]
        mapping: list[int | None] = []
        for col in schema:
            want = _normalize(col.name)
            idx = cell_norm.index(want) if want in cell_norm else None
            mapping.append(idx)
        return mapping

    while i < L:
        line = lines[i]
        if not line.text.strip() or line.text.strip().startswith("```"):
            i += 1
            continue

        pipe = _pipe_cells(line.text)
        if pipe is not None:
            # maximal run of pipe lines
            j = i
            run: list[tuple[int, list[str]]] = []
            while j < L:
                cells = _pipe_cells(lines[j].text)
                if cells is None:
                    break
                run.append((j, cells))
                j += 1
            block = _pipe_block(run, schema_norm, n_cols, threshold, header_mapping)
            if block is not None:
                blocks.append(block)
            i = j
            continue

        cells = _csv_cells(line.text)
        if cells is not None and len(cells) >= 1:
            if _header_match(cells, schema_norm) >= threshold:
                block = _csv_header_block(lines, i, cells, header_mapping)
                blocks.append(block)
                i = block.consumed_lines[-1] + 1 if block.consumed_lines else i + 1
                continue
            if n_cols >= 2 and len(cells) == n_cols:
                block, nxt = _csv_headerless_block(lines, i, schema)
                if block is not None:
                    blocks.append(block)
                    i = nxt
                    continue
        i += 1
    return blocks


def _pipe_block(run, schema_norm, n_cols, threshold, header_mapping) -> _Block | None:
    if not run:
        return None
    first_idx, first_cells = run[0]
    consumed: list[int] = []
    dropped: list[int] = []
    rows: list[tuple[int, list[str]]] = []
    if _header_match(first_cells, schema_norm) >= threshold:
        mapping = header_mapping(first_cells)
        arity = len(first_cells)
        consumed.append(first_idx)
        for idx, cells in run[1:]:
            if _is_alignment_row(cells):
                consumed.append(idx)
                continue
            if len(cells) == arity:
                rows.append((idx, cells))
                consumed.append(idx)
            else:
                dropped.append(idx)
        return _Block(mapping, rows, consumed, dropped)
    # headerless: accept only if every row has the schema arity
    body = [r for r in run if not _is_alignment_row(r[1])]
    if body and all(len(c) == n_cols for _, c in body):
        for idx, cells in run:
            if _is_alignment_row(cells):
                consumed.append(idx)
            else:
                rows.append((idx, cells))
                consumed.append(idx)
        return _Block(None, rows, consumed, dropped)
    return None


def _csv_header_block(lines, start, header_cells, header_mapping) -> _Block:
    mapping = header_mapping(header_cells)
    arity = len(header_cells)
    consumed = [start]
    dropped: list[int] = []
    rows: list[tuple[int, list[str]]] = []
    k = start + 1
    while k < len(lines):
        text = lines[k].text
        if not text.strip() or text.strip().startswith("```"):
            break
        if _pipe_cells(text) is not None:
            break
        cells = _csv_cells(text)
        if cells is not None and len(cells) == arity:
            rows.append((k, cells))
            consumed.append(k)
            k += 1
            continue
        # tolerate a single malformed row if the block resumes right after
        if k + 1 < len(lines):
            nxt = _csv_cells(lines[k + 1].text)
            if nxt is not None and len(nxt) == arity:
                dropped.append(k)
                k += 1
                continue
        break
    return _Block(mapping, rows, consumed, dropped)


def _csv_headerless_block(lines, start, schema):
    """Run of >= 2 lines with exact schema arity; numeric cells must mostly parse."""
    n_cols = len(schema)
    k = start
    collected: list[tuple[int, list[str]]] = []
    while k < len(lines):
        cells = _csv_cells(lines[k].text)
        if cells is None or len(cells) != n_cols:
            break
        collected.append((k, cells))
        k += 1
    if len(collected) < 2:
        return None, start + 1
    num_idx = [j for j, c in enumerate(schema) if c.dtype is DataType.NUMERICAL]
    if num_idx:
        total = len(collected) * len(num_idx)
        ok = sum(
            1
            for _, cells in collected
            for j in num_idx
            if coerce_cell(cells[j], DataType.NUMERICAL)[1]
        )
        if ok < 0.5 * total:
            return None, start + 1
    consumed = [idx for idx, _ in collected]
    return _Block(None, collected, consumed, []), k


# --- assembly --------------------------------------------------------------


def _merge_spans(text: str, line_indices: list[int], lines: list[_Line]) -> list[tuple[int, int]]:
    """Turn discarded line indices into merged char spans, skipping whitespace gaps."""
    spans: list[tuple[int, int]] = []
    for idx in sorted(set(line_indices)):
        ln = lines[idx]
        if not ln.text.strip():
            continue
        # trim the span to the non-whitespace content of the line
        s = ln.start + (len(ln.text) - len(ln.text.lstrip()))
        e = ln.start + len(ln.text.rstrip())
        if spans and not text[spans[-1][1]:s].strip():
            spans[-1] = (spans[-1][0], e)
        else:
            spans.append((s, e))
    return spans


def parse_llm_output(
    raw: str,
    schema: "list[ColumnSchema] | tuple[ColumnSchema, ...]",
    rows_requested: int,
    vocabularies: dict | None = None,
    header_match_threshold: float = HEADER_MATCH_THRESHOLD,
) -> ParseOutcome:
    """Scan raw text for tabular blocks and assemble up to rows_requested rows."""
    schema = list(schema)
    lines = _split_lines(raw)
    blocks = _scan_blocks(lines, schema, header_match_threshold)

    failures: list[CoercionFailure] = []
    out_rows: list[tuple] = []
    consumed_lines: list[int] = []
    dropped_lines: list[int] = []
    excess_lines: list[int] = []
    n_dropped = 0

    for block in blocks:
        dropped_lines.extend(block.dropped_lines)
        n_dropped += len(block.dropped_lines)
        for line_idx, cells in block.rows:
            if len(out_rows) >= rows_requested:
                excess_lines.append(line_idx)
                continue
            consumed_lines.append(line_idx)
            row = []
            for col_pos, col in enumerate(schema):
                if block.header_map is not None:
                    src = block.header_map[col_pos]
                    raw_cell = cells[src] if src is not None else ""
                else:
                    raw_cell = cells[col_pos]
                vocab = vocabularies.get(col.name) if vocabularies else None
                value, ok = coerce_cell(raw_cell, col.dtype, vocab)
                if not ok:
                    failures.append(
                        CoercionFailure(len(out_rows), col.name, raw_cell)
                    )
                row.append(value)
            out_rows.append(tuple(row))
        # header/alignment lines of blocks that contributed rows are consumed
        row_lines = {idx for idx, _ in block.rows}
        consumed_lines.extend(
            idx for idx in block.consumed_lines if idx not in row_lines
        )

    consumed_set = set(consumed_lines)
    discarded_line_idx = [
        idx
        for idx, ln in enumerate(lines)
        if ln.text.strip()
        and idx not in consumed_set
    ]
    spans = _merge_spans(raw, discarded_line_idx, lines)

    rows_recovered = len(out_rows)
    hint = ""
    if rows_recovered == 0:
        stripped = raw.strip()
        if stripped.startswith("[") and "{" in stripped:
            hint = "output looks like a JSON array of objects, which is not supported"

    if rows_recovered == 0:
        status = ParseStatus.REJECTED
        table = None
    else:
        table = Table(tuple(schema), tuple(out_rows))
        clean = (
            rows_recovered == rows_requested
            and not spans
            and n_dropped == 0
            and len([b for b in blocks if b.rows]) == 1
        )
        status = ParseStatus.CLEAN if clean else ParseStatus.SALVAGED

    return ParseOutcome(
        status=status,
        table=table,
        rows_recovered=rows_recovered,
        rows_requested=rows_requested,
        discarded_spans=spans,
        coercion_failures=failures,
        dropped_rows=n_dropped,
        n_blocks=len([b for b in blocks if b.rows]),
        hint=hint,
    )


def parse_table_text(
    text: str,
    schema: "list[ColumnSchema] | tuple[ColumnSchema, ...]",
    vocabularies: dict | None = None,
) -> ParseOutcome:
    """Parse text expected to be one contiguous tabular block.

    rows_requested is taken to be whatever the block yields, so a fully
    consumed single block is Clean regardless of its row count.
    """
    probe = parse_llm_output(
        text, schema, rows_requested=len(text.split("\n")) + 1,
        vocabularies=vocabularies,
    )
    probe.rows_requested = probe.rows_recovered
    if probe.status is ParseStatus.SALVAGED:
        if (
            not probe.discarded_spans
            and probe.dropped_rows == 0
            and probe.n_blocks == 1
        ):
            probe.status = ParseStatus.CLEAN
    return probe
