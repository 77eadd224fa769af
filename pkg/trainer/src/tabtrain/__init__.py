"""Fine-tuning adapter for prompt/completion instruction JSONL datasets."""

from .config import LossMasking, TrainConfig
from .validate import ValidationSummary, validate_dataset

__version__ = "0.1.0"

__all__ = [
    "LossMasking",
    "TrainConfig",
    "ValidationSummary",
    "validate_dataset",
]
