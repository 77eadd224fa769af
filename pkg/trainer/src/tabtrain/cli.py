"""CLI for dataset validation and fine-tuning.

Exit codes: 0 success, 1 validation/contract failure, 2 I/O error.
"""

from __future__ import annotations

import json
import sys

import click

from .config import ConfigError, LossMasking, TrainConfig
from .validate import validate_dataset


@click.group()
def cli():
    """Fine-tuning adapter for prompt/completion instruction datasets."""


@cli.command("validate")
@click.option("--dataset", "dataset_path", required=True, type=click.Path())
@click.option("--max-seq-len", type=int, default=4096)
def cmd_validate(dataset_path, max_seq_len):
    """Check every record against the JSONL contract; nonzero exit on violations."""
    summary = validate_dataset(dataset_path, max_sequence_length=max_seq_len)
    click.echo(json.dumps(summary.to_json_dict(), indent=2))
    if not summary.ok:
        raise SystemExit(1)


@cli.command("finetune")
@click.option("--dataset", "dataset_path", required=True, type=click.Path())
@click.option("--out", "output_dir", required=True, type=click.Path())
@click.option("--base-model", default="toy-byte-lm")
@click.option("--lr", "learning_rate", type=float, default=2e-5)
@click.option("--batch-size", "per_device_batch_size", type=int, default=3)
@click.option("--epochs", type=int, default=2)
@click.option("--max-seq-len", "max_sequence_length", type=int, default=4096)
@click.option(
    "--masking",
    type=click.Choice([m.value for m in LossMasking]),
    default=LossMasking.COMPLETION_ONLY.value,
)
@click.option("--seed", type=int, default=0)
@click.option("--dry-run", is_flag=True, default=False)
def cmd_finetune(
    dataset_path,
    output_dir,
    base_model,
    learning_rate,
    per_device_batch_size,
    epochs,
    max_sequence_length,
    masking,
    seed,
    dry_run,
):
    """Fine-tune on the dataset (or resolve the run with --dry-run)."""
    config = TrainConfig(
        dataset_path=dataset_path,
        output_dir=output_dir,
        base_model_id=base_model,
        learning_rate=learning_rate,
        per_device_batch_size=per_device_batch_size,
        epochs=epochs,
        max_sequence_length=max_sequence_length,
        loss_masking=masking,
        seed=seed,
    )
    from .train import finetune, resolve_dry_run

    if dry_run:
        click.echo(json.dumps(resolve_dry_run(config), indent=2))
        return
    result = finetune(config)
    click.echo(
        json.dumps(
            {
                "checkpoint_dir": str(result.checkpoint_dir),
                "epoch_losses": result.epoch_losses,
                "n_examples": result.n_examples,
                "dropped_overlong": len(result.dropped_overlong),
            }
        )
    )


def main(argv=None) -> int:
    from .train import DatasetContractError

    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except SystemExit as e:
        return int(e.code or 0)
    except click.ClickException as e:
        click.echo(f"error: {e.format_message()}", err=True)
        return 1
    except (ConfigError, DatasetContractError) as e:
        click.echo(f"error: {e}", err=True)
        return 1
    except OSError as e:
        click.echo(f"error: {e}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
