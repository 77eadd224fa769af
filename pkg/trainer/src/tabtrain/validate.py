"""Dataset-contract validation for instruction JSONL files.

Each line must be a JSON object with exactly the fields
{prompt, completion, dataset_id, split, seed}; the summary additionally
reports a token-length histogram under the declared tokenizer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .tokenizer import ByteTokenizer

REQUIRED_FIELDS = ("prompt", "completion", "dataset_id", "split", "seed")
VALID_SPLITS = ("train", "eval", "ood_eval")
HISTOGRAM_BUCKET = 256


@dataclass
class ValidationSummary:
    record_count: int
    violations: list[tuple[int, str]] = field(default_factory=list)
    token_length_histogram: dict[str, int] = field(default_factory=dict)
    overlong_records: int = 0
    tokenizer: str = ByteTokenizer.name

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json_dict(self) -> dict:
        return {
            "record_count": self.record_count,
            "valid": self.ok,
            "violations": [
                {"line": line, "message": message}
                for line, message in self.violations
            ],
            "token_length_histogram": self.token_length_histogram,
            "overlong_records": self.overlong_records,
            "tokenizer": self.tokenizer,
        }


def _check_record(rec: object) -> list[str]:
    if not isinstance(rec, dict):
        return ["record is not a JSON object"]
    problems = []
    for name in REQUIRED_FIELDS:
        if name not in rec:
            problems.append(f"missing field {name!r}")
    for name in ("prompt", "completion", "dataset_id"):
        if name in rec and not isinstance(rec[name], str):
            problems.append(f"field {name!r} must be a string")
    if isinstance(rec.get("prompt"), str) and not rec["prompt"].strip():
        problems.append("field 'prompt' is empty")
    if "split" in rec and rec["split"] not in VALID_SPLITS:
        problems.append(
            f"field 'split' must be one of {list(VALID_SPLITS)}, got {rec['split']!r}"
        )
    if "seed" in rec and (
        not isinstance(rec["seed"], int) or isinstance(rec["seed"], bool)
    ):
        problems.append("field 'seed' must be an integer")
    extra = sorted(set(rec) - set(REQUIRED_FIELDS))
    if extra:
        problems.append(f"unexpected fields {extra}")
    return problems


def validate_dataset(
    path: str | Path, max_sequence_length: int = 4096
) -> ValidationSummary:
    """Validate every line of a JSONL dataset; line numbers are 1-based."""
    path = Path(path)
    tokenizer = ByteTokenizer()
    summary = ValidationSummary(record_count=0)
    histogram: dict[int, int] = {}
    with path.open(encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                summary.violations.append((line_number, "blank line"))
                continue
            summary.record_count += 1
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                summary.violations.append((line_number, f"invalid JSON: {e.msg}"))
                continue
            problems = _check_record(rec)
            for message in problems:
                summary.violations.append((line_number, message))
            if problems:
                continue
            n_tokens = (
                len(tokenizer.encode(rec["prompt"]))
                + len(tokenizer.encode(rec["completion"]))
                + 1  # end-of-sequence token
            )
            bucket = (n_tokens // HISTOGRAM_BUCKET) * HISTOGRAM_BUCKET
            histogram[bucket] = histogram.get(bucket, 0) + 1
            if n_tokens > max_sequence_length:
                summary.overlong_records += 1
    summary.token_length_histogram = {
        f"{lo}-{lo + HISTOGRAM_BUCKET - 1}": histogram[lo]
        for lo in sorted(histogram)
    }
    return summary
