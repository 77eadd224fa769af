"""Train-on-Synthetic-Test-on-Real utility evaluation."""

from .encode import EncoderState, SupervisedMatrix, encode, fit_encoder, transform
from .metrics import auc, binary_auc, mape, r2
from .models import (
    GradientBoostedModel,
    LinearModel,
    ModelFamily,
    ModelSpec,
    RandomForestModel,
    build_model,
    default_specs,
)
from .tstr import UtilityReport, stratified_split, tstr

__all__ = [
    "EncoderState",
    "SupervisedMatrix",
    "encode",
    "fit_encoder",
    "transform",
    "auc",
    "binary_auc",
    "mape",
    "r2",
    "GradientBoostedModel",
    "LinearModel",
    "ModelFamily",
    "ModelSpec",
    "RandomForestModel",
    "build_model",
    "default_specs",
    "UtilityReport",
    "stratified_split",
    "tstr",
]
