"""Training hyperparameters."""

from __future__ import annotations

from dataclasses import dataclass, fields

from ..errors import ConfigError

PRETRAIN_LR = 1e-3
FINETUNE_LR = 1e-4


@dataclass
class TrainConfig:
    """Optimization settings shared by pretraining and fine-tuning.

    Pretraining optimizes reconstruction plus weighted graph supervision,
    noise KL, and intervention terms; fine-tuning keeps only reconstruction
    and KL. ``max_windows`` caps how many windows of each series one step
    encodes (a fresh random subset per step); None encodes all of them.
    """

    mode: str = "pretrain"
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float | None = None
    weight_graph: float = 0.6
    weight_kl: float = 0.6
    weight_intervention: float = 0.6
    grad_clip: float = 5.0
    patience: int = 30
    num_mc: int = 8
    temperature: float = 0.1
    mixup_alpha: float = 1.0
    max_windows: int | None = 32
    kl_direction: str = "q_to_p"
    use_mixup: bool = True
    use_intervention: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("pretrain", "finetune"):
            raise ConfigError(f"mode must be 'pretrain' or 'finetune', got {self.mode!r}")
        if self.learning_rate is None:
            self.learning_rate = PRETRAIN_LR if self.mode == "pretrain" else FINETUNE_LR
        for name in ("epochs", "batch_size", "num_mc", "patience"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.max_windows is not None and self.max_windows < 1:
            raise ConfigError(f"max_windows must be >= 1 or None, got {self.max_windows}")
        for name in ("learning_rate", "temperature", "mixup_alpha"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("weight_graph", "weight_kl", "weight_intervention", "grad_clip"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown training config keys: {', '.join(unknown)}")
        return cls(**data)
