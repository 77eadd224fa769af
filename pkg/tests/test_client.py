import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from tabsynth.builder import BuildPlan, default_metadata, sample_instance, render_prompt
from tabsynth.client import (
    CompletionResult,
    EndpointConfig,
    MockMode,
    complete,
    generate_batch,
    mock_complete,
    mock_transport,
)
from tabsynth.errors import (
    AuthError,
    ExhaustedRetriesError,
    SnapshotNotFoundError,
)
from tabsynth.parser import ParseStatus, parse_llm_output
from tabsynth.table import load_csv


class ScriptedHandler(BaseHTTPRequestHandler):
    """Replays a per-server script of (status, body|None) or 'sleep' actions."""

    script = []
    lock = threading.Lock()
    calls = 0
    active = 0
    max_active = 0
    delay = 0.0

    def log_message(self, *args):
        pass

    def do_POST(self):
        cls = type(self)
        with cls.lock:
            cls.calls += 1
            cls.active += 1
            cls.max_active = max(cls.max_active, cls.active)
            idx = cls.calls - 1
        # `active` is decremented just before the response body is written:
        # once the client can observe the response and fire its next request,
        # this handler no longer counts as in flight.
        decremented = False
        try:
            if cls.delay:
                time.sleep(cls.delay)
            action = cls.script[min(idx, len(cls.script) - 1)]
            if action == "sleep":
                time.sleep(5)
                return
            status, text = action
            body = json.dumps(
                {
                    "choices": [
                        {"message": {"content": text or ""}, "finish_reason": "stop"}
                    ]
                }
            ).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            with cls.lock:
                cls.active -= 1
                decremented = True
            self.wfile.write(body)
        finally:
            if not decremented:
                with cls.lock:
                    cls.active -= 1


@pytest.fixture
def server():
    servers = []

    def start(script, delay=0.0):
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
        thread = threading.Thread(target=httpd.serve_forever, daemon=True)
        thread.start()
        servers.append(httpd)
        return handler, f"http://127.0.0.1:{httpd.server_address[1]}"

    yield start
    for s in servers:
        s.shutdown()
        s.server_close()


def _config(url, **kw):
    defaults = dict(
        base_url=url,
        model_name="test-model",
        max_retries=3,
        timeout=2.0,
        backoff_base=0.01,
    )
    defaults.update(kw)
    return EndpointConfig(**defaults)


def test_complete_happy_path(server):
    handler, url = server([(200, "OK")])
    result = complete(_config(url), "hello")
    assert result.text == "OK"
    assert result.attempt_count == 1


def test_retry_on_429_then_success(server):
    handler, url = server([(429, None), (429, None), (200, "done")])
    result = complete(_config(url), "hi")
    assert result.text == "done"
    assert result.attempt_count == 3
    assert handler.calls == 3


def test_auth_error_no_retry(server):
    handler, url = server([(401, None)])
    with pytest.raises(AuthError):
        complete(_config(url), "hi")
    assert handler.calls == 1


def test_timeout_exhausts_retries(server):
    handler, url = server(["sleep"])
    config = _config(url, timeout=0.2, max_retries=2)
    with pytest.raises(ExhaustedRetriesError) as e:
        complete(config, "hi")
    assert e.value.attempts == 3  # max_retries + 1


def test_backoff_delays_within_jitter_bounds(server):
    handler, url = server([(500, None)] * 4)
    delays = []
    config = _config(url, max_retries=3, backoff_base=1.0)
    with pytest.raises(ExhaustedRetriesError):
        complete(config, "hi", sleep=delays.append)
    assert len(delays) == 3
    for k, d in enumerate(delays, start=1):
        assert 0 <= d <= 1.0 * 2 ** (k - 1)


def _write_records(path, n):
    with path.open("w") as f:
        for i in range(n):
            f.write(
                json.dumps(
                    {
                        "prompt": f"prompt {i}",
                        "completion": "",
                        "dataset_id": "d",
                        "split": "eval",
                        "seed": 0,
                    }
                )
                + "\n"
            )


def test_generate_batch_order_and_concurrency(server, tmp_path):
    handler, url = server([(200, "resp")], delay=0.02)
    records = tmp_path / "eval.jsonl"
    _write_records(records, 40)
    config = _config(url, max_in_flight=4)
    out = generate_batch(config, records, tmp_path / "progress.jsonl")
    assert len(out) == 40
    assert [r.index for r in out] == list(range(40))
    assert handler.max_active <= 4
    assert handler.calls == 40


def test_generate_batch_resume(tmp_path):
    records = tmp_path / "eval.jsonl"
    _write_records(records, 100)
    progress = tmp_path / "progress.jsonl"

    calls = []

    def transport(prompt):
        calls.append(prompt)
        return CompletionResult(text=f"echo:{prompt}", attempt_count=1, latency=0.0)

    # first run: only the first 50 records (simulate a kill by truncation)
    half = tmp_path / "half.jsonl"
    _write_records(half, 50)
    generate_batch(None, half, progress, transport=transport)
    assert len(calls) == 50

    out = generate_batch(None, records, progress, transport=transport)
    assert len(calls) == 100  # exactly 50 new endpoint calls
    assert len(out) == 100
    assert [r.index for r in out] == list(range(100))
    assert all(r.raw_response == f"echo:prompt {r.index}" for r in out)


def test_generate_batch_per_record_error_isolation(tmp_path):
    records = tmp_path / "eval.jsonl"
    _write_records(records, 5)

    def transport(prompt):
        if prompt.endswith("2"):
            raise RuntimeError("prompt too long")
        return CompletionResult(text="ok", attempt_count=1, latency=0.0)

    out = generate_batch(None, records, tmp_path / "p.jsonl", transport=transport)
    assert len(out) == 5
    assert out[2].error.startswith("RuntimeError")
    assert all(not r.error for i, r in enumerate(out) if i != 2)


def test_no_duplicates_or_losses(tmp_path):
    records = tmp_path / "eval.jsonl"
    _write_records(records, 30)
    out = generate_batch(
        None, records, tmp_path / "p.jsonl",
        transport=lambda p: CompletionResult(p, 1, 0.0),
    )
    assert sorted(r.index for r in out) == list(range(30))


# --- mocks -----------------------------------------------------------------


@pytest.fixture
def weather_prompt(fixtures_path):
    table = load_csv(fixtures_path / "weather.csv")
    inst = sample_instance(
        table, default_metadata(table), BuildPlan(seed=5), 0, "weather"
    )
    return render_prompt(inst), table


def test_mock_echo(weather_prompt):
    prompt, table = weather_prompt
    text = mock_complete(prompt, MockMode.ECHO_INPUT)
    out = parse_llm_output(text, list(table.schema), 20)
    assert out.status is ParseStatus.CLEAN
    assert out.rows_recovered == 20


def test_mock_resample_deterministic(weather_prompt):
    prompt, table = weather_prompt
    a = mock_complete(prompt, MockMode.RESAMPLE_ROWS, seed=3)
    b = mock_complete(prompt, MockMode.RESAMPLE_ROWS, seed=3)
    assert a == b
    out = parse_llm_output(a, list(table.schema), 20)
    assert out.rows_recovered == 20
    # resampled rows are a multiset drawn from the snapshot rows
    snapshot_rows = set(prompt.split("Input rows (20 rows):\n", 1)[1].split("\n")[1:])
    for line in a.split("\n")[1:]:
        assert line in snapshot_rows


def test_mock_garbage_rejected(weather_prompt):
    prompt, table = weather_prompt
    text = mock_complete(prompt, MockMode.GARBAGE, seed=1)
    out = parse_llm_output(text, list(table.schema), 20)
    assert out.status is ParseStatus.REJECTED


def test_mock_snapshot_not_found():
    with pytest.raises(SnapshotNotFoundError):
        mock_complete("no snapshot here", MockMode.ECHO_INPUT)


def test_secret_never_in_records(tmp_path, monkeypatch, server):
    monkeypatch.setenv("TABSYNTH_API_KEY", "sk-super-secret")
    handler, url = server([(200, "ok")])
    records = tmp_path / "eval.jsonl"
    _write_records(records, 3)
    progress = tmp_path / "p.jsonl"
    generate_batch(_config(url), records, progress)
    assert "sk-super-secret" not in progress.read_text()
