"""Training configuration for the fine-tuning adapter."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path


class LossMasking(enum.Enum):
    """Which token positions carry loss weight during training."""

    COMPLETION_ONLY = "completion_only"
    FULL = "full"


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    dataset_path: str
    output_dir: str
    base_model_id: str = "toy-byte-lm"
    learning_rate: float = 2e-5
    per_device_batch_size: int = 3
    epochs: int = 2
    max_sequence_length: int = 4096
    loss_masking: LossMasking = LossMasking.COMPLETION_ONLY
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.loss_masking, str):
            self.loss_masking = LossMasking(self.loss_masking)
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.per_device_batch_size < 1:
            raise ConfigError(
                f"per_device_batch_size must be >= 1, got {self.per_device_batch_size}"
            )
        if self.max_sequence_length < 1:
            raise ConfigError(
                f"max_sequence_length must be >= 1, got {self.max_sequence_length}"
            )

    def to_json_dict(self) -> dict:
        return {
            "dataset_path": str(self.dataset_path),
            "output_dir": str(self.output_dir),
            "base_model_id": self.base_model_id,
            "learning_rate": self.learning_rate,
            "per_device_batch_size": self.per_device_batch_size,
            "epochs": self.epochs,
            "max_sequence_length": self.max_sequence_length,
            "loss_masking": self.loss_masking.value,
            "seed": self.seed,
        }
