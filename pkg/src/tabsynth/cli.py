"""Single entry point wiring all modules together.

Exit codes: 0 success, 1 validation error, 2 I/O or endpoint exhaustion.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import yaml

from .builder import BuildPlan, build_dataset, read_jsonl
from .client import (
    EndpointConfig,
    MockMode,
    complete,
    generate_batch,
    mock_transport,
)
from .errors import IoOrEndpointError, TabsynthError, ValidationError
from .fidelity import fidelity_report, pool_tables
from .metadata import (
    parse_metadata_response,
    render_metadata_prompt,
    save_metadata_sidecar,
    sidecar_path,
    load_metadata_sidecar,
)
from .parser import parse_llm_output, parse_table_text
from .registry import load_registry
from .report import ReportFormat, append_manifest, report_render
from .table import load_csv, load_csv_text
from .utility import ModelFamily, ModelSpec, tstr


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise IoOrEndpointError(f"cannot read config {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValidationError("config file must be a mapping")
    return data


def _endpoint_from_config(config: dict) -> EndpointConfig:
    ep = config.get("endpoint", {})
    if "base_url" not in ep or "model_name" not in ep:
        raise ValidationError("config endpoint needs base_url and model_name")
    return EndpointConfig(**ep)


def _plan_from_config(config: dict) -> BuildPlan:
    build = dict(config.get("build", {}))
    build.setdefault("seed", config.get("seed", 0))
    return BuildPlan(**build)


@click.group()
def cli():
    """Toolkit for LLM-based synthetic tabular data generation and evaluation."""


@cli.command("build-dataset")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
def cmd_build_dataset(config_path, out_dir):
    """Build train/eval/ood_eval JSONL instruction datasets."""
    config = _load_config(config_path)
    if "registry" not in config:
        raise ValidationError("config needs a 'registry' path")
    registry = load_registry(config["registry"])
    plan = _plan_from_config(config)
    summary = build_dataset(registry, plan, out_dir)
    append_manifest(
        out_dir, "build-dataset", config, seeds={"build": plan.seed}
    )
    click.echo(
        json.dumps(
            {
                "train_records": summary.train_records,
                "eval_records": summary.eval_records,
                "ood_records": summary.ood_records,
            }
        )
    )


@cli.command("gen-metadata")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--dataset", "dataset_id", required=True)
@click.option("--interactive", is_flag=True, default=False)
def cmd_gen_metadata(config_path, dataset_id, interactive):
    """Generate and validate table metadata via the configured endpoint."""
    config = _load_config(config_path)
    registry = load_registry(config["registry"])
    entry = next((e for e in registry if e.id == dataset_id), None)
    if entry is None:
        raise ValidationError(f"dataset {dataset_id!r} not in registry")
    table = load_csv(entry.source_path)

    exemplar_path = config.get("metadata", {}).get("exemplar")
    if not exemplar_path:
        raise ValidationError("config metadata.exemplar sidecar path is required")
    exemplar = load_metadata_sidecar(exemplar_path)

    budget = config.get("metadata", {}).get("token_budget", 8000)
    prompt = render_metadata_prompt(table, exemplar, token_budget=budget)
    endpoint = _endpoint_from_config(config)
    result = complete(endpoint, prompt)
    draft = parse_metadata_response(result.text, list(table.schema))
    for issue in draft.issues:
        click.echo(f"issue: {issue}", err=True)
    if draft.parsed is None:
        raise ValidationError("metadata response failed structural validation")
    if interactive:
        click.echo(result.text)
        if not click.confirm("accept this metadata?"):
            raise ValidationError("metadata rejected by reviewer")
    out = sidecar_path(entry.source_path)
    save_metadata_sidecar(draft.parsed, out)
    click.echo(str(out))


@cli.command("generate")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--records", "records_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option(
    "--mock",
    "mock_mode",
    type=click.Choice([m.value for m in MockMode]),
    default=None,
    help="use a deterministic offline mock instead of the endpoint",
)
@click.option("--seed", type=int, default=0)
def cmd_generate(config_path, records_path, out_path, mock_mode, seed):
    """Run instruction records through the endpoint (or an offline mock)."""
    config = _load_config(config_path)
    if mock_mode:
        transport = mock_transport(MockMode(mock_mode), seed)
        records = generate_batch(None, records_path, out_path, transport=transport)
    else:
        endpoint = _endpoint_from_config(config)
        records = generate_batch(endpoint, records_path, out_path)
    errors = sum(1 for r in records if r.error)
    click.echo(json.dumps({"records": len(records), "errors": errors}))


@cli.command("parse")
@click.option("--schema-csv", required=True, type=click.Path(),
              help="CSV file whose header/dtypes define the expected schema")
@click.option("--rows", "rows_requested", type=int, default=None)
@click.option("--in", "in_path", type=click.Path(), default=None,
              help="raw text file (stdin when omitted)")
def cmd_parse(schema_csv, rows_requested, in_path):
    """Parse raw LLM text into a table; prints a ParseOutcome JSON."""
    schema = list(load_csv(schema_csv).schema)
    raw = (
        Path(in_path).read_text(encoding="utf-8")
        if in_path
        else sys.stdin.read()
    )
    if rows_requested is None:
        outcome = parse_table_text(raw, schema)
    else:
        outcome = parse_llm_output(raw, schema, rows_requested)
    click.echo(json.dumps(outcome.to_json_dict(), ensure_ascii=False))


def _load_synth(real, synth_csv, synth_dir):
    if synth_csv:
        return load_csv(synth_csv)
    tables = []
    for path in sorted(Path(synth_dir).glob("*.json")):
        doc = json.loads(path.read_text(encoding="utf-8"))
        if doc.get("status") == "rejected" or not doc.get("table_csv"):
            continue
        tables.append(load_csv_text(doc["table_csv"]))
    return pool_tables(real.schema, tables)


@cli.command("eval-fidelity")
@click.option("--real", "real_csv", required=True, type=click.Path())
@click.option("--synth", "synth_csv", type=click.Path(), default=None)
@click.option("--synth-dir", type=click.Path(), default=None,
              help="directory of ParseOutcome JSONs to pool")
@click.option("--dataset", "dataset_id", default="dataset")
@click.option("--algorithm", default="model")
@click.option("--out", "out_path", type=click.Path(), default=None)
def cmd_eval_fidelity(real_csv, synth_csv, synth_dir, dataset_id, algorithm, out_path):
    """Compute Shape/Trend fidelity between a real and synthetic table."""
    if bool(synth_csv) == bool(synth_dir):
        raise ValidationError("exactly one of --synth / --synth-dir is required")
    real = load_csv(real_csv)
    synth = _load_synth(real, synth_csv, synth_dir)
    doc = {"kind": "fidelity", "dataset": dataset_id, "algorithm": algorithm}
    if synth is None:
        doc.update(
            shape=None,
            trend=None,
            exclusion_reason="no usable synthetic rows (all outputs rejected)",
        )
    else:
        rep = fidelity_report(real, synth)
        doc.update(rep.to_json_dict())
        if doc["trend"] != doc["trend"]:  # NaN -> not renderable
            doc["trend"] = None
    text = json.dumps(doc, ensure_ascii=False, indent=2)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
    click.echo(text)


@cli.command("eval-utility")
@click.option("--real", "real_csv", required=True, type=click.Path())
@click.option("--synth", "synth_csv", type=click.Path(), default=None)
@click.option("--synth-dir", type=click.Path(), default=None)
@click.option("--registry", "registry_path", required=True, type=click.Path())
@click.option("--dataset", "dataset_id", required=True)
@click.option("--algorithm", default="model")
@click.option("--split-seed", type=int, default=0)
@click.option("--model-seed", type=int, default=0)
@click.option("--out", "out_path", type=click.Path(), default=None)
def cmd_eval_utility(
    real_csv, synth_csv, synth_dir, registry_path, dataset_id, algorithm,
    split_seed, model_seed, out_path,
):
    """Run TSTR with linear, random forest, and gradient-boosted models."""
    if bool(synth_csv) == bool(synth_dir):
        raise ValidationError("exactly one of --synth / --synth-dir is required")
    registry = load_registry(registry_path)
    entry = next((e for e in registry if e.id == dataset_id), None)
    if entry is None:
        raise ValidationError(f"dataset {dataset_id!r} not in registry")
    real = load_csv(real_csv)
    synth = _load_synth(real, synth_csv, synth_dir)
    from .utility import default_specs

    report = tstr(
        real, synth, entry, specs=default_specs(model_seed), split_seed=split_seed
    )
    doc = {"kind": "utility", "dataset": dataset_id, "algorithm": algorithm}
    doc.update(report.to_json_dict())
    if doc["average"] != doc["average"]:
        doc["average"] = None
        reasons = sorted(set(report.failures.values()))
        doc["exclusion_reason"] = "; ".join(reasons) or "all model families failed"
    text = json.dumps(doc, ensure_ascii=False, indent=2)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
    click.echo(text)


@cli.command("report")
@click.option("--in", "in_dir", required=True, type=click.Path())
@click.option(
    "--format",
    "fmt",
    type=click.Choice([f.value for f in ReportFormat]),
    default="markdown",
)
@click.option("--out", "out_path", type=click.Path(), default=None)
def cmd_report(in_dir, fmt, out_path):
    """Aggregate fidelity/utility JSONs into one rendered document."""
    docs = []
    for path in sorted(Path(in_dir).glob("*.json")):
        if path.name == "manifest.json":
            continue
        doc = json.loads(path.read_text(encoding="utf-8"))
        if isinstance(doc, dict) and doc.get("kind") in ("fidelity", "utility"):
            docs.append(doc)
    rendered = report_render(docs, ReportFormat(fmt))
    if out_path:
        Path(out_path).write_text(rendered, encoding="utf-8")
    else:
        click.echo(rendered, nl=False)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("error: aborted", err=True)
        return 1
    except click.ClickException as e:
        click.echo(f"error: {e.format_message()}", err=True)
        return 1
    except ValidationError as e:
        click.echo(f"error: {e}", err=True)
        return 1
    except IoOrEndpointError as e:
        click.echo(f"error: {e}", err=True)
        return 2
    except OSError as e:
        click.echo(f"error: {e}", err=True)
        return 2
    except TabsynthError as e:
        click.echo(f"error: {e}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
