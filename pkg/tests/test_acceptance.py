"""Acceptance gate: one criterion per test, one pass/fail line per criterion.

Each test wraps its body in the `criterion` context manager (a fixture), which
prints a single `[ACCEPTANCE] <name>: PASS|FAIL` line with output capture
suspended so the verdict is always visible in the pytest output.
"""

import json
import random
import string
import sys
import threading
import time
from contextlib import contextmanager
from fractions import Fraction
from http.server import ThreadingHTTPServer
from pathlib import Path

import numpy as np
import pytest

from tablegen import FIXTURE_TABLE_MAKERS
from tabsynth.builder import BuildPlan, build_dataset, read_jsonl
from tabsynth.cli import main
from tabsynth.client import CompletionResult, MockMode, complete, generate_batch, mock_complete
from tabsynth.errors import AuthError, ExhaustedRetriesError
from tabsynth.fidelity import ks_statistic, shape_score, trend_score, tv_distance
from tabsynth.parser import ParseOutcome, ParseStatus, parse_llm_output
from tabsynth.registry import DatasetRegistryEntry, Task
from tabsynth.report import ReportFormat, report_render
from tabsynth.table import (
    ColumnSchema,
    DataType,
    SerializationFormat,
    Table,
    load_csv,
    serialize_rows,
)
from tabsynth.utility import auc, stratified_split, tstr
from test_client import ScriptedHandler, _config
from test_utility import _blobs, _table_from_arrays, brute_force_auc

FIXTURES = Path(__file__).parent / "data" / "fixtures"
GOLDEN = Path(__file__).parent / "data" / "golden"


@pytest.fixture
def criterion(request):
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def announce(verdict, name):
        with capman.global_and_fixture_disabled():
            print(f"\n[ACCEPTANCE] {name}: {verdict}", flush=True)

    @contextmanager
    def run(name, max_seconds=None):
        start = time.perf_counter()
        try:
            yield
        except BaseException:
            announce("FAIL", name)
            raise
        elapsed = time.perf_counter() - start
        if max_seconds is not None and elapsed >= max_seconds:
            announce("FAIL", name)
            raise AssertionError(f"{name}: runtime {elapsed:.1f}s >= {max_seconds}s")
        announce("PASS", name)

    return run


def test_metric_identity(criterion):
    with criterion("metric-identity", max_seconds=5):
        assert len(FIXTURE_TABLE_MAKERS) >= 5
        for name, maker in FIXTURE_TABLE_MAKERS.items():
            t = maker()
            _, shape, _ = shape_score(t, t)
            assert shape == 100.0, name
            _, trend, _ = trend_score(t, t)
            assert trend == pytest.approx(100.0, abs=1e-9), name


def test_metric_oracles(criterion):
    with criterion("metric-oracles", max_seconds=30):
        rng = random.Random(42)
        for _ in range(1000):
            a = [rng.randint(-3, 3) for _ in range(rng.randint(1, 8))]
            b = [rng.randint(-3, 3) for _ in range(rng.randint(1, 8))]
            points = sorted(set(a) | set(b))
            oracle = max(
                abs(
                    sum(1 for v in a if v <= p) / len(a)
                    - sum(1 for v in b if v <= p) / len(b)
                )
                for p in points
            )
            assert abs(ks_statistic(a, b) - oracle) <= 1e-12

        cats = "ABCDEF"
        for _ in range(1000):
            a = [rng.choice(cats) for _ in range(rng.randint(1, 10))]
            b = [rng.choice(cats) for _ in range(rng.randint(1, 10))]
            oracle = float(
                sum(
                    abs(
                        Fraction(a.count(c), len(a)) - Fraction(b.count(c), len(b))
                    )
                    for c in set(a) | set(b)
                )
                / 2
            )
            assert tv_distance(a, b) == oracle

        np_rng = np.random.default_rng(7)
        for _ in range(500):
            n = int(np_rng.integers(2, 201))
            labels = np_rng.integers(0, 2, n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            scores = np.round(np_rng.normal(size=n), 1)
            assert auc(scores, labels) == brute_force_auc(scores, labels)


def test_hand_computed_values(criterion):
    with criterion("hand-computed-values"):
        schema = (ColumnSchema("c", DataType.CATEGORICAL),)
        real = Table(schema, (("A",), ("A",), ("B",), ("B",)))
        synth = Table(schema, (("A",), ("A",), ("A",), ("B",)))
        _, shape, _ = shape_score(real, synth)
        assert shape == 75.0

        assert ks_statistic([0, 0, 1, 1], [0, 1, 1, 1]) == 0.25

        nn = (
            ColumnSchema("x", DataType.NUMERICAL),
            ColumnSchema("y", DataType.NUMERICAL),
        )
        xs = [float(i) for i in range(10)]
        up = Table(nn, tuple((x, x) for x in xs))
        down = Table(nn, tuple((x, -x) for x in xs))
        _, trend, _ = trend_score(up, down)
        assert trend == pytest.approx(0.0, abs=1e-9)


def test_dataset_builder(criterion, tmp_path):
    with criterion("dataset-builder", max_seconds=60):
        registry = [
            DatasetRegistryEntry("weather", "t", str(FIXTURES / "weather.csv"), True),
            DatasetRegistryEntry("housing", "t", str(FIXTURES / "housing.csv"), True),
        ]
        plan = BuildPlan(
            n_rows=20,
            train_instances_per_table=500,
            eval_instances_per_table=100,
            seed=13,
        )
        summary = build_dataset(registry, plan, tmp_path)
        assert summary.train_records == 1000
        assert summary.eval_records == 200
        schemas = {
            "weather": list(load_csv(FIXTURES / "weather.csv").schema),
            "housing": list(load_csv(FIXTURES / "housing.csv").schema),
        }
        for fname in ("train.jsonl", "eval.jsonl"):
            for rec in read_jsonl(tmp_path / fname):
                snapshot = rec["prompt"].split("Input rows (20 rows):\n", 1)[1]
                snapshot_lines = snapshot.split("\n")
                assert len(snapshot_lines) == 21  # header + 20 rows
                out = parse_llm_output(
                    rec["completion"], schemas[rec["dataset_id"]], 20
                )
                assert out.status is ParseStatus.CLEAN
                assert out.rows_recovered == 20
                # fixture rows are unique, so row-text disjointness is
                # equivalent to row-identity disjointness
                assert not set(snapshot_lines[1:]) & set(
                    rec["completion"].split("\n")[1:]
                )


def _random_token(rng):
    return "".join(rng.choice(string.ascii_letters) for _ in range(rng.randint(1, 8)))


def _random_table(rng):
    n_cols = rng.randint(2, 6)
    schema = []
    for i in range(n_cols):
        dtype = rng.choice([DataType.NUMERICAL, DataType.CATEGORICAL])
        schema.append(ColumnSchema(f"col{i}", dtype))
    rows = []
    for _ in range(rng.randint(1, 15)):
        row = []
        for c in schema:
            if rng.random() < 0.05:
                row.append(None)
            elif c.dtype is DataType.NUMERICAL:
                row.append(round(rng.uniform(-100, 100), rng.randint(0, 4)))
            else:
                row.append(_random_token(rng))
        rows.append(tuple(row))
    return Table(tuple(schema), tuple(rows))


def test_parser_totality_and_roundtrip(criterion):
    with criterion("parser-totality-roundtrip"):
        rng = random.Random(99)
        schema = [
            ColumnSchema("a", DataType.NUMERICAL),
            ColumnSchema("b", DataType.CATEGORICAL),
        ]
        alphabet = string.printable + "|,\"'`\n"
        for _ in range(10_000):
            raw = "".join(
                rng.choice(alphabet) for _ in range(rng.randint(0, 120))
            )
            out = parse_llm_output(raw, schema, 5)
            assert isinstance(out, ParseOutcome)
            assert out.status in (
                ParseStatus.CLEAN,
                ParseStatus.SALVAGED,
                ParseStatus.REJECTED,
            )

        for _ in range(100):
            t = _random_table(rng)
            fmt = rng.choice(list(SerializationFormat))
            text = serialize_rows(t, list(range(t.n_rows)), fmt)
            out = parse_llm_output(text, list(t.schema), t.n_rows)
            assert out.status is ParseStatus.CLEAN, (fmt, text)
            assert out.table.rows == t.rows

        # base-LLM-style garbage: instruction-echo prose, no tabular payload
        weather = load_csv(FIXTURES / "weather.csv")
        snapshot = serialize_rows(weather, list(range(20)))
        prompt = f"Input rows (20 rows):\n{snapshot}"
        for seed in range(10):
            garbage = mock_complete(
                prompt + " " * seed, MockMode.GARBAGE, seed=seed
            )
            out = parse_llm_output(garbage, list(weather.schema), 20)
            assert out.status is ParseStatus.REJECTED

        # preamble + fenced CSV + trailing prose: salvaged, full recovery
        body = serialize_rows(weather, list(range(20)))
        for preamble in (
            "Sure! Here are 20 new rows for you.",
            "Certainly, I generated the table below.",
        ):
            raw = f"{preamble}\n```\n{body}\n```\nHope this helps!"
            out = parse_llm_output(raw, list(weather.schema), 20)
            assert out.status is ParseStatus.SALVAGED
            assert out.rows_recovered == 20


def _e2e_run(tmp_path, run_name, capsys):
    run = tmp_path / run_name
    run.mkdir()
    registry = run / "registry.yaml"
    registry.write_text(
        json.dumps(
            {
                "datasets": [
                    {
                        "id": ds,
                        "topic": ds,
                        "source_path": str(FIXTURES / f"{ds}.csv"),
                        "is_train": True,
                    }
                    for ds in ("weather", "housing", "iris")
                ]
            }
        )
    )
    config = run / "config.yaml"
    config.write_text(
        json.dumps(
            {
                "registry": str(registry),
                "build": {
                    "train_instances_per_table": 0,
                    "eval_instances_per_table": 25,
                    "seed": 21,
                },
            }
        )
    )
    build_dir = run / "build"
    assert main(["build-dataset", "--config", str(config), "--out", str(build_dir)]) == 0
    capsys.readouterr()
    gen_path = run / "gen.jsonl"
    assert (
        main(
            [
                "generate",
                "--records",
                str(build_dir / "eval.jsonl"),
                "--out",
                str(gen_path),
                "--mock",
                "resample",
                "--seed",
                "5",
            ]
        )
        == 0
    )
    capsys.readouterr()

    parsed = {ds: run / f"parsed_{ds}" for ds in ("weather", "housing", "iris")}
    for p in parsed.values():
        p.mkdir()
    schemas = {
        ds: list(load_csv(FIXTURES / f"{ds}.csv").schema)
        for ds in parsed
    }
    with gen_path.open() as f:
        for i, line in enumerate(f):
            rec = json.loads(line)
            out = parse_llm_output(rec["raw_response"], schemas[rec["dataset_id"]], 20)
            assert out.status is not ParseStatus.REJECTED
            (parsed[rec["dataset_id"]] / f"p{i}.json").write_text(
                json.dumps(out.to_json_dict())
            )

    reports = run / "reports"
    reports.mkdir()
    for ds in parsed:
        assert (
            main(
                [
                    "eval-fidelity",
                    "--real",
                    str(FIXTURES / f"{ds}.csv"),
                    "--synth-dir",
                    str(parsed[ds]),
                    "--dataset",
                    ds,
                    "--algorithm",
                    "mock-resample",
                    "--out",
                    str(reports / f"{ds}.json"),
                ]
            )
            == 0
        )
        capsys.readouterr()
        doc = json.loads((reports / f"{ds}.json").read_text())
        assert doc["shape"] >= 95.0, ds
        assert doc["trend"] >= 85.0, ds

    report_md = run / "report.md"
    assert (
        main(
            [
                "report",
                "--in",
                str(reports),
                "--format",
                "markdown",
                "--out",
                str(report_md),
            ]
        )
        == 0
    )
    capsys.readouterr()
    return report_md.read_bytes(), build_dir, schemas


def test_offline_end_to_end(criterion, tmp_path, capsys):
    with criterion("offline-end-to-end", max_seconds=120):
        bytes_a, build_dir, schemas = _e2e_run(tmp_path, "runA", capsys)
        bytes_b, _, _ = _e2e_run(tmp_path, "runB", capsys)
        assert bytes_a == bytes_b

        # garbage mode: everything rejected, report shows "--" with a reason
        gen_path = tmp_path / "garbage.jsonl"
        assert (
            main(
                [
                    "generate",
                    "--records",
                    str(build_dir / "eval.jsonl"),
                    "--out",
                    str(gen_path),
                    "--mock",
                    "garbage",
                    "--seed",
                    "5",
                ]
            )
            == 0
        )
        capsys.readouterr()
        parsed_dir = tmp_path / "garbage_parsed"
        parsed_dir.mkdir()
        n = 0
        with gen_path.open() as f:
            for i, line in enumerate(f):
                rec = json.loads(line)
                if rec["dataset_id"] != "weather":
                    continue
                out = parse_llm_output(rec["raw_response"], schemas["weather"], 20)
                assert out.status is ParseStatus.REJECTED
                (parsed_dir / f"p{i}.json").write_text(json.dumps(out.to_json_dict()))
                n += 1
        assert n == 25
        reports = tmp_path / "garbage_reports"
        reports.mkdir()
        assert (
            main(
                [
                    "eval-fidelity",
                    "--real",
                    str(FIXTURES / "weather.csv"),
                    "--synth-dir",
                    str(parsed_dir),
                    "--dataset",
                    "weather",
                    "--algorithm",
                    "base",
                    "--out",
                    str(reports / "weather.json"),
                ]
            )
            == 0
        )
        capsys.readouterr()
        assert main(["report", "--in", str(reports)]) == 0
        rendered = capsys.readouterr().out
        assert "| weather | -- | -- |" in rendered
        assert "rejected" in rendered


def test_tstr_self_consistency(criterion):
    with criterion("tstr-self-consistency", max_seconds=120):
        X, y = _blobs(n=200, margin=3.0, seed=2)
        real = _table_from_arrays(X, y, Task.CLASSIFICATION)
        entry = DatasetRegistryEntry(
            "blob", "", "", True, target_column="target", task=Task.CLASSIFICATION
        )
        train_idx, _ = stratified_split(
            real.n_rows, [r[2] for r in real.rows], 0.2, 0
        )
        synth = real.select_rows(train_idx.tolist())
        report = tstr(real, synth, entry, split_seed=0)
        assert abs(report.average - report.baseline_real) <= 0.02
        for family, score in report.per_model.items():
            assert score >= 0.95, family

        rng = np.random.default_rng(12)
        Xr = rng.normal(size=(150, 2))
        yr = 2 * Xr[:, 0] + 1 + rng.normal(0, 0.05, 150)
        real_r = _table_from_arrays(Xr, yr, Task.REGRESSION)
        entry_r = DatasetRegistryEntry(
            "lin", "", "", True, target_column="target", task=Task.REGRESSION
        )
        train_idx, _ = stratified_split(real_r.n_rows, None, 0.2, 0)
        synth_r = real_r.select_rows(train_idx.tolist())
        report_r = tstr(real_r, synth_r, entry_r, split_seed=0)
        assert abs(report_r.average - report_r.baseline_real) <= 0.05


def test_report_layout_golden(criterion):
    with criterion("report-layout-golden"):
        docs = []
        for path in sorted((GOLDEN / "inputs").glob("*.json")):
            if path.name == "manifest.json":
                continue
            docs.append(json.loads(path.read_text()))
        assert report_render(docs, ReportFormat.MARKDOWN) == (
            GOLDEN / "report.md"
        ).read_text()
        assert report_render(docs, ReportFormat.CSV) == (
            GOLDEN / "report.csv"
        ).read_text()


def _start_server(script, delay=0.0):
    handler = type(
        "Handler",
        (ScriptedHandler,),
        {
            "script": script,
            "lock": threading.Lock(),
            "calls": 0,
            "active": 0,
            "max_active": 0,
            "delay": delay,
        },
    )
    httpd = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    threading.Thread(target=httpd.serve_forever, daemon=True).start()
    return httpd, handler, f"http://127.0.0.1:{httpd.server_address[1]}"


def test_llm_client_contract(criterion, tmp_path):
    with criterion("llm-client-contract"):
        servers = []
        try:
            # 429 x2 then 200 -> three attempts
            httpd, handler, url = _start_server([(429, None), (429, None), (200, "ok")])
            servers.append(httpd)
            assert complete(_config(url), "p").attempt_count == 3

            # 401 -> exactly one attempt, no retry
            httpd, handler, url = _start_server([(401, None)])
            servers.append(httpd)
            with pytest.raises(AuthError):
                complete(_config(url), "p")
            assert handler.calls == 1

            # timeout -> max_retries + 1 attempts
            httpd, handler, url = _start_server(["sleep"])
            servers.append(httpd)
            with pytest.raises(ExhaustedRetriesError) as e:
                complete(_config(url, timeout=0.2, max_retries=2), "p")
            assert e.value.attempts == 3

            # resume issues exactly the missing calls
            records = tmp_path / "records.jsonl"
            with records.open("w") as f:
                for i in range(60):
                    f.write(
                        json.dumps(
                            {
                                "prompt": f"p{i}",
                                "completion": "",
                                "dataset_id": "d",
                                "split": "eval",
                                "seed": 0,
                            }
                        )
                        + "\n"
                    )
            progress = tmp_path / "progress.jsonl"
            calls = []

            def transport(prompt):
                calls.append(prompt)
                return CompletionResult(prompt, 1, 0.0)

            partial = tmp_path / "partial.jsonl"
            partial.write_text(
                "".join(records.read_text().splitlines(keepends=True)[:35])
            )
            generate_batch(None, partial, progress, transport=transport)
            assert len(calls) == 35
            out = generate_batch(None, records, progress, transport=transport)
            assert len(calls) == 60
            assert sorted(r.index for r in out) == list(range(60))

            # in-flight never exceeds max_in_flight (server-side counter)
            httpd, handler, url = _start_server([(200, "ok")], delay=0.02)
            servers.append(httpd)
            generate_batch(
                _config(url, max_in_flight=4), records, tmp_path / "p2.jsonl"
            )
            assert handler.calls == 60
            assert handler.max_active <= 4
        finally:
            for s in servers:
                s.shutdown()
                s.server_close()
