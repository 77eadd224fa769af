"""OpenAI-compatible chat-completions client with retries, bounded concurrency,
idempotent batch resume, and deterministic offline mocks."""

from __future__ import annotations

import enum
import json
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .builder import SNAPSHOT_MARKER, read_jsonl
from .errors import (
    AuthError,
    ExhaustedRetriesError,
    MalformedResponseError,
    SnapshotNotFoundError,
    ValidationError,
)

RETRYABLE_STATUSES = {429, 500, 502, 503, 504}


@dataclass
class EndpointConfig:
    base_url: str
    model_name: str
    api_key_env: str = "TABSYNTH_API_KEY"
    temperature: float = 0.7
    max_output_tokens: int = 2048
    timeout: float = 60.0
    max_retries: int = 3
    max_in_flight: int = 4
    backoff_base: float = 1.0  # seconds; attempt k waits within [0, base*2^(k-1)]

    def __post_init__(self):
        if not self.base_url.startswith(("http://", "https://")):
            raise ValidationError(f"malformed base_url: {self.base_url!r}")
        if self.max_retries < 0:
            raise ValidationError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ValidationError("max_in_flight must be >= 1")
        if self.temperature < 0:
            raise ValidationError("temperature must be >= 0")

    def api_key(self) -> str:
        return os.environ.get(self.api_key_env, "")


@dataclass
class CompletionResult:
    text: str
    attempt_count: int
    latency: float
    finish_reason: str = ""


@dataclass
class GenerationRecord:
    dataset_id: str
    split: str
    index: int
    prompt: str
    raw_response: str
    latency: float
    attempt_count: int
    finish_reason: str = ""
    error: str = ""

    def to_json_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "split": self.split,
            "index": self.index,
            "prompt": self.prompt,
            "raw_response": self.raw_response,
            "latency": self.latency,
            "attempt_count": self.attempt_count,
            "finish_reason": self.finish_reason,
            "error": self.error,
        }


def complete(
    config: EndpointConfig,
    prompt: str,
    session: requests.Session | None = None,
    sleep=time.sleep,
    rng: random.Random | None = None,
) -> CompletionResult:
    """One chat-completion call with exponential backoff and full jitter."""
    rng = rng or random.Random()
    url = config.base_url.rstrip("/") + "/v1/chat/completions"
    headers = {"Content-Type": "application/json"}
    key = config.api_key()
    if key:
        headers["Authorization"] = f"Bearer {key}"
    payload = {
        "model": config.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": config.temperature,
        "max_tokens": config.max_output_tokens,
    }
    http = session or requests
    start = time.monotonic()
    last_status: int | str = "no attempt"
    attempts = config.max_retries + 1
    for attempt in range(1, attempts + 1):
        try:
            resp = http.post(
                url, json=payload, headers=headers, timeout=config.timeout
            )
            status = resp.status_code
        except requests.RequestException as e:
            status = None
            last_status = type(e).__name__
        if status is not None:
            last_status = status
            if status in (401, 403):
                raise AuthError(status)
            if status == 200:
                try:
                    body = resp.json()
                    choice = body["choices"][0]
                    text = choice["message"]["content"]
                    finish = choice.get("finish_reason", "")
                except (ValueError, KeyError, IndexError, TypeError) as e:
                    raise MalformedResponseError(
                        f"unexpected response body: {e}"
                    ) from e
                return CompletionResult(
                    text=text,
                    attempt_count=attempt,
                    latency=time.monotonic() - start,
                    finish_reason=finish,
                )
            if status not in RETRYABLE_STATUSES:
                raise MalformedResponseError(f"unexpected HTTP status {status}")
        if attempt < attempts:
            sleep(rng.uniform(0, config.backoff_base * 2 ** (attempt - 1)))
    raise ExhaustedRetriesError(attempts, last_status)


# --- offline mocks ---------------------------------------------------------


class MockMode(enum.Enum):
    ECHO_INPUT = "echo"
    RESAMPLE_ROWS = "resample"
    GARBAGE = "garbage"


def extract_snapshot(prompt: str) -> list[str]:
    """Return the snapshot lines (header + rows) from a rendered prompt."""
    lines = prompt.split("\n")
    for i, line in enumerate(lines):
        if line.startswith(SNAPSHOT_MARKER):
            block = [l for l in lines[i + 1:] if l.strip()]
            if len(block) >= 2:
                return block
            break
    raise SnapshotNotFoundError("prompt contains no parseable input snapshot")


_GARBAGE_LINES = [
    "Sure! Here are some instructions you can follow:",
    "1. First decide what kind of table you would like to create.",
    "2. Think carefully about the structure of your data.",
    "3. Consider the relationships between the different fields.",
    "4. Write down a description of each field in your own words.",
    "5. Review everything and make sure it is consistent.",
    "I hope these instructions are helpful for your task!",
    "Let me know if you would like more detail on any step.",
]


def mock_complete(prompt: str, mode: MockMode, seed: int = 0) -> str:
    """Deterministic offline stand-in for an endpoint."""
    if mode is MockMode.GARBAGE:
        rng = random.Random(f"garbage:{seed}:{len(prompt)}")
        k = rng.randint(4, len(_GARBAGE_LINES))
        return "\n".join(_GARBAGE_LINES[:k])
    block = extract_snapshot(prompt)
    header, rows = block[0], block[1:]
    if mode is MockMode.ECHO_INPUT:
        return "\n".join(block)
    rng = random.Random(f"resample:{seed}:{prompt}")
    sampled = [rng.choice(rows) for _ in range(len(rows))]
    return "\n".join([header] + sampled)


def mock_transport(mode: MockMode, seed: int = 0):
    def call(prompt: str) -> CompletionResult:
        return CompletionResult(
            text=mock_complete(prompt, mode, seed),
            attempt_count=1,
            latency=0.0,
            finish_reason="stop",
        )

    return call


# --- batch generation ------------------------------------------------------


def _record_key(rec: dict) -> tuple:
    return (rec.get("dataset_id", ""), rec.get("split", ""), rec["index"])


def generate_batch(
    config: EndpointConfig | None,
    records_path: str | Path,
    out_path: str | Path,
    transport=None,
) -> list[GenerationRecord]:
    """Run every instruction record through the endpoint.

    At most max_in_flight requests are outstanding at once; the returned list
    follows input order. Progress is appended to out_path as JSONL so a rerun
    only issues calls for records not already completed.
    """
    if transport is None:
        if config is None:
            raise ValidationError("either a config or a transport is required")
        session = requests.Session()

        def transport(prompt: str) -> CompletionResult:
            return complete(config, prompt, session=session)

    inputs = read_jsonl(records_path)
    for i, rec in enumerate(inputs):
        if "prompt" not in rec:
            raise ValidationError(f"record {i} has no prompt field")
        rec["index"] = i

    out_path = Path(out_path)
    done: dict[tuple, GenerationRecord] = {}
    if out_path.exists():
        for rec in read_jsonl(out_path):
            done[_record_key(rec)] = GenerationRecord(
                dataset_id=rec.get("dataset_id", ""),
                split=rec.get("split", ""),
                index=rec["index"],
                prompt=rec.get("prompt", ""),
                raw_response=rec.get("raw_response", ""),
                latency=rec.get("latency", 0.0),
                attempt_count=rec.get("attempt_count", 0),
                finish_reason=rec.get("finish_reason", ""),
                error=rec.get("error", ""),
            )

    pending = [rec for rec in inputs if _record_key(rec) not in done]
    write_lock = threading.Lock()
    max_workers = config.max_in_flight if config else 8

    def run_one(rec: dict) -> GenerationRecord:
        out = GenerationRecord(
            dataset_id=rec.get("dataset_id", ""),
            split=rec.get("split", ""),
            index=rec["index"],
            prompt=rec["prompt"],
            raw_response="",
            latency=0.0,
            attempt_count=0,
        )
        try:
            result = transport(rec["prompt"])
            out.raw_response = result.text
            out.latency = result.latency
            out.attempt_count = result.attempt_count
            out.finish_reason = result.finish_reason
        except Exception as e:  # per-record isolation: the batch never aborts
            out.error = f"{type(e).__name__}: {e}"
        with write_lock:
            with out_path.open("a", encoding="utf-8") as f:
                f.write(json.dumps(out.to_json_dict(), ensure_ascii=False) + "\n")
        return out

    if pending:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for result in pool.map(run_one, pending):
                done[(result.dataset_id, result.split, result.index)] = result

    return [done[_record_key(rec)] for rec in inputs]
