"""Training: configuration, data batching, loops, checkpoints."""

from .checkpoint import load_checkpoint, save_checkpoint
from .config import FINETUNE_LR, PRETRAIN_LR, TrainConfig
from .data import TensorSplit, batch_indices, prepare_split, subsample_windows
from .loop import (
    LossBreakdown,
    TrainingResult,
    evaluate_graph_auroc,
    finetune_step,
    fit,
    pretrain_step,
    validate,
)

__all__ = [
    "TrainConfig",
    "PRETRAIN_LR",
    "FINETUNE_LR",
    "TensorSplit",
    "prepare_split",
    "batch_indices",
    "subsample_windows",
    "LossBreakdown",
    "TrainingResult",
    "pretrain_step",
    "finetune_step",
    "fit",
    "validate",
    "evaluate_graph_auroc",
    "save_checkpoint",
    "load_checkpoint",
]
