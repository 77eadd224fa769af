"""Supervised fine-tuning of a causal LM on prompt/completion records.

The real training target is any HF-style causal LM; CI exercises a tiny
byte-level model so the loop, masking, and logging are testable offline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import torch
from torch import nn

from .config import LossMasking, TrainConfig
from .tokenizer import ByteTokenizer
from .validate import validate_dataset

IGNORE_INDEX = -100


class DatasetContractError(ValueError):
    pass


@dataclass
class Example:
    input_ids: list[int]
    labels: list[int]
    n_prompt_tokens: int


@dataclass
class TrainResult:
    checkpoint_dir: Path
    epoch_losses: list[float]
    n_examples: int
    dropped_overlong: list[tuple[int, int]]  # (record index, token length)


def load_records(path: str | Path) -> list[dict]:
    summary = validate_dataset(path)
    if not summary.ok:
        first = summary.violations[:5]
        raise DatasetContractError(
            f"{path}: {len(summary.violations)} contract violations, e.g. {first}"
        )
    with Path(path).open(encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def build_examples(
    records: list[dict],
    masking: LossMasking,
    max_sequence_length: int,
) -> tuple[list[Example], list[tuple[int, int]]]:
    """Tokenize records; overlong sequences are dropped and reported."""
    tokenizer = ByteTokenizer()
    examples: list[Example] = []
    dropped: list[tuple[int, int]] = []
    for i, rec in enumerate(records):
        prompt_ids = tokenizer.encode(rec["prompt"])
        completion_ids = tokenizer.encode(rec["completion"]) + [tokenizer.eos_id]
        ids = prompt_ids + completion_ids
        if len(ids) > max_sequence_length:
            dropped.append((i, len(ids)))
            continue
        labels = list(ids)
        if masking is LossMasking.COMPLETION_ONLY:
            labels[: len(prompt_ids)] = [IGNORE_INDEX] * len(prompt_ids)
        examples.append(Example(ids, labels, len(prompt_ids)))
    return examples, dropped


def collate(batch: list[Example], pad_id: int) -> tuple[torch.Tensor, torch.Tensor]:
    width = max(len(e.input_ids) for e in batch)
    ids = torch.full((len(batch), width), pad_id, dtype=torch.long)
    labels = torch.full((len(batch), width), IGNORE_INDEX, dtype=torch.long)
    for r, e in enumerate(batch):
        ids[r, : len(e.input_ids)] = torch.tensor(e.input_ids)
        labels[r, : len(e.labels)] = torch.tensor(e.labels)
    return ids, labels


def loss_weights(labels: torch.Tensor) -> torch.Tensor:
    """Per-position loss weight for a collated label tensor (0 where masked)."""
    return (labels != IGNORE_INDEX).float()


class ToyByteLM(nn.Module):
    """Minimal causal LM over the byte vocabulary (per-token bigram head)."""

    def __init__(self, vocab_size: int = ByteTokenizer.vocab_size, d_model: int = 32):
        super().__init__()
        self.embed = nn.Embedding(vocab_size, d_model)
        self.head = nn.Linear(d_model, vocab_size)

    def forward(self, input_ids: torch.Tensor) -> torch.Tensor:
        return self.head(self.embed(input_ids))


def batch_loss(model: nn.Module, ids: torch.Tensor, labels: torch.Tensor):
    logits = model(ids)
    # causal shift: position t predicts token t+1
    return nn.functional.cross_entropy(
        logits[:, :-1].reshape(-1, logits.shape[-1]),
        labels[:, 1:].reshape(-1),
        ignore_index=IGNORE_INDEX,
    )


def resolve_dry_run(config: TrainConfig) -> dict:
    """Resolve the full config and token budget without touching any weights
    or writing any files."""
    records = load_records(config.dataset_path)
    examples, dropped = build_examples(
        records, config.loss_masking, config.max_sequence_length
    )
    total_tokens = sum(len(e.input_ids) for e in examples)
    trained_tokens = sum(
        sum(1 for t in e.labels if t != IGNORE_INDEX) for e in examples
    )
    return {
        "dry_run": True,
        "config": config.to_json_dict(),
        "record_count": len(records),
        "trainable_examples": len(examples),
        "dropped_overlong": [
            {"record": i, "tokens": n} for i, n in dropped
        ],
        "total_tokens": total_tokens,
        "loss_bearing_tokens": trained_tokens,
    }


def finetune(config: TrainConfig, model: nn.Module | None = None) -> TrainResult:
    """Train on the dataset and write a checkpoint plus a loss log."""
    records = load_records(config.dataset_path)
    examples, dropped = build_examples(
        records, config.loss_masking, config.max_sequence_length
    )
    if not examples:
        raise DatasetContractError(
            f"{config.dataset_path}: no trainable examples "
            f"({len(dropped)} dropped as overlong)"
        )

    torch.manual_seed(config.seed)
    if model is None:
        model = ToyByteLM()
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    pad_id = ByteTokenizer.pad_id

    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    generator = torch.Generator().manual_seed(config.seed)
    epoch_losses: list[float] = []
    with (out_dir / "loss_log.jsonl").open("w", encoding="utf-8") as log:
        for epoch in range(config.epochs):
            order = torch.randperm(len(examples), generator=generator).tolist()
            losses = []
            for start in range(0, len(order), config.per_device_batch_size):
                batch = [examples[i] for i in order[start : start + config.per_device_batch_size]]
                ids, labels = collate(batch, pad_id)
                loss = batch_loss(model, ids, labels)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                losses.append(float(loss.detach()))
            mean_loss = sum(losses) / len(losses)
            epoch_losses.append(mean_loss)
            log.write(json.dumps({"epoch": epoch, "loss": mean_loss}) + "\n")

    torch.save(model.state_dict(), out_dir / "model.pt")
    (out_dir / "config.json").write_text(
        json.dumps(
            {
                **config.to_json_dict(),
                "tokenizer": ByteTokenizer.name,
                "dropped_overlong": dropped,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return TrainResult(out_dir, epoch_losses, len(examples), dropped)
