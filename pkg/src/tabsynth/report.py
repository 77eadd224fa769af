"""Report rendering (markdown/CSV/JSON) and run manifests."""

from __future__ import annotations

import enum
import hashlib
import io
import csv as csv_mod
import json
import time
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .errors import SchemaMismatchError


class ReportFormat(enum.Enum):
    MARKDOWN = "markdown"
    CSV = "csv"
    JSON = "json"


def format_fidelity(v: float) -> str:
    return f"{v:.2f}"


def format_utility(v: float) -> str:
    return f"{v:.4f}"


def _validate(inputs: list[dict]) -> None:
    for doc in inputs:
        kind = doc.get("kind")
        if kind == "fidelity":
            required = {"dataset", "algorithm", "shape", "trend"}
        elif kind == "utility":
            required = {"dataset", "algorithm", "metric", "average"}
        else:
            raise SchemaMismatchError(f"unknown report kind: {kind!r}")
        missing = required - set(doc)
        if missing:
            raise SchemaMismatchError(
                f"{kind} report missing fields: {sorted(missing)}"
            )


def _fidelity_grid(docs: list[dict]):
    datasets = sorted({d["dataset"] for d in docs})
    algorithms = sorted({d["algorithm"] for d in docs})
    cell: dict = {}
    notes: dict = {}
    for d in docs:
        key = (d["dataset"], d["algorithm"])
        shape = d.get("shape")
        trend = d.get("trend")
        cell[key] = (shape, trend)
        if d.get("exclusion_reason"):
            notes[key] = d["exclusion_reason"]
    return datasets, algorithms, cell, notes


def _utility_grid(docs: list[dict]):
    datasets = sorted({d["dataset"] for d in docs})
    algorithms = sorted({d["algorithm"] for d in docs})
    cell: dict = {}
    notes: dict = {}
    baseline: dict = {}
    for d in docs:
        key = (d["dataset"], d["algorithm"])
        cell[key] = d.get("average")
        if d.get("baseline_real") is not None:
            baseline[d["dataset"]] = d["baseline_real"]
        if d.get("exclusion_reason"):
            notes[key] = d["exclusion_reason"]
    return datasets, algorithms, cell, notes, baseline


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and v == v  # excludes None and NaN


def report_render(inputs: list[dict], fmt: ReportFormat = ReportFormat.MARKDOWN) -> str:
    """Render fidelity/utility report JSONs as one document.

    Deterministic ordering: datasets then algorithms, both sorted. Missing
    entries render "--" with a reason footnote.
    """
    _validate(inputs)
    fidelity_docs = [d for d in inputs if d["kind"] == "fidelity"]
    utility_docs = [d for d in inputs if d["kind"] == "utility"]

    if fmt is ReportFormat.JSON:
        return json.dumps(
            {"fidelity": fidelity_docs, "utility": utility_docs},
            indent=2,
            ensure_ascii=False,
        )

    if fmt is ReportFormat.CSV:
        return _render_csv(fidelity_docs, utility_docs)
    return _render_markdown(fidelity_docs, utility_docs)


def _render_markdown(fidelity_docs, utility_docs) -> str:
    out: list[str] = []
    footnotes: list[str] = []

    if fidelity_docs:
        datasets, algorithms, cell, notes = _fidelity_grid(fidelity_docs)
        out.append("# Fidelity")
        out.append("")
        header = ["Dataset"]
        for algo in algorithms:
            header += [f"{algo} Shape", f"{algo} Trends"]
        out.append("| " + " | ".join(header) + " |")
        out.append("|" + "|".join([" --- "] * len(header)) + "|")
        for ds in datasets:
            row = [ds]
            for algo in algorithms:
                shape, trend = cell.get((ds, algo), (None, None))
                for v in (shape, trend):
                    if _is_number(v):
                        row.append(format_fidelity(v))
                    else:
                        row.append("--")
                        reason = notes.get((ds, algo), "no score available")
                        note = f"{ds}/{algo}: {reason}"
                        if note not in footnotes:
                            footnotes.append(note)
            out.append("| " + " | ".join(row) + " |")
        out.append("")

    # one section per metric, never mixed columns
    for metric in sorted({d["metric"] for d in utility_docs}):
        docs = [d for d in utility_docs if d["metric"] == metric]
        datasets, algorithms, cell, notes, baseline = _utility_grid(docs)
        out.append(f"# Utility ({metric.upper()})")
        out.append("")
        header = ["Dataset", "Real"] + algorithms
        out.append("| " + " | ".join(header) + " |")
        out.append("|" + "|".join([" --- "] * len(header)) + "|")
        for ds in datasets:
            row = [ds]
            row.append(
                format_utility(baseline[ds]) if _is_number(baseline.get(ds)) else "--"
            )
            for algo in algorithms:
                v = cell.get((ds, algo))
                if _is_number(v):
                    row.append(format_utility(v))
                else:
                    row.append("--")
                    reason = notes.get((ds, algo), "no score available")
                    note = f"{ds}/{algo}: {reason}"
                    if note not in footnotes:
                        footnotes.append(note)
            out.append("| " + " | ".join(row) + " |")
        out.append("")

    if footnotes:
        out.append("Notes:")
        for note in footnotes:
            out.append(f"- {note}")
        out.append("")
    return "\n".join(out)


def _render_csv(fidelity_docs, utility_docs) -> str:
    buf = io.StringIO()
    writer = csv_mod.writer(buf, lineterminator="\n")
    if fidelity_docs:
        datasets, algorithms, cell, _ = _fidelity_grid(fidelity_docs)
        header = ["section", "dataset"]
        for algo in algorithms:
            header += [f"{algo}_shape", f"{algo}_trends"]
        writer.writerow(header)
        for ds in datasets:
            row = ["fidelity", ds]
            for algo in algorithms:
                shape, trend = cell.get((ds, algo), (None, None))
                row.append(format_fidelity(shape) if _is_number(shape) else "--")
                row.append(format_fidelity(trend) if _is_number(trend) else "--")
            writer.writerow(row)
    for metric in sorted({d["metric"] for d in utility_docs}):
        docs = [d for d in utility_docs if d["metric"] == metric]
        datasets, algorithms, cell, _, baseline = _utility_grid(docs)
        writer.writerow([f"utility_{metric}", "dataset", "real"] + algorithms)
        for ds in datasets:
            row = [f"utility_{metric}", ds]
            row.append(
                format_utility(baseline[ds]) if _is_number(baseline.get(ds)) else "--"
            )
            for algo in algorithms:
                v = cell.get((ds, algo))
                row.append(format_utility(v) if _is_number(v) else "--")
            writer.writerow(row)
    return buf.getvalue()


# --- run manifests ---------------------------------------------------------


@dataclass
class RunManifest:
    command: str
    config_hash: str
    registry_version: str
    seeds: dict
    endpoint: dict
    timestamp: str
    tool_version: str


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _redact_endpoint(endpoint: dict) -> dict:
    # never persist secret material; only the env var *name* is recorded
    return {k: v for k, v in endpoint.items() if k != "api_key"}


def append_manifest(
    out_dir: str | Path,
    command: str,
    config: dict,
    seeds: dict | None = None,
    registry_version: str = "",
) -> Path:
    """Append a run entry to the directory's single manifest file."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "manifest.json"
    entries = []
    if path.exists():
        entries = json.loads(path.read_text(encoding="utf-8"))
    entry = RunManifest(
        command=command,
        config_hash=config_hash(config),
        registry_version=registry_version,
        seeds=seeds or {},
        endpoint=_redact_endpoint(config.get("endpoint", {})),
        timestamp=time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        tool_version=__version__,
    )
    entries.append(entry.__dict__)
    path.write_text(
        json.dumps(entries, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return path
