"""Checkpoint container: model weights with an integrity checksum and the
configs and history needed to rebuild the run."""

from __future__ import annotations

import hashlib
import io
from pathlib import Path

import torch

from ..errors import DataError
from ..model import CausalDiscoveryModel, ModelConfig

CHECKPOINT_VERSION = 1


def save_checkpoint(
    path: str | Path,
    model: CausalDiscoveryModel,
    train_config: dict | None = None,
    history: list | None = None,
    extra: dict | None = None,
) -> None:
    """Serialize weights into a checksummed payload. The payload bytes are
    produced by torch.save of the state dict, so loading restores every
    tensor bit for bit, whatever its dtype."""
    buffer = io.BytesIO()
    torch.save(model.state_dict(), buffer)
    payload = buffer.getvalue()
    blob = {
        "format_version": CHECKPOINT_VERSION,
        "model_config": model.config.to_dict(),
        "train_config": train_config,
        "history": history or [],
        "extra": extra or {},
        "payload": payload,
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    torch.save(blob, out)


def load_checkpoint(path: str | Path) -> tuple[CausalDiscoveryModel, dict]:
    """Rebuild the model from a checkpoint; returns (model, metadata).

    Metadata carries train_config, history, and extra. A payload that fails
    its checksum is rejected."""
    p = Path(path)
    if not p.exists():
        raise DataError(f"no checkpoint at {path}")
    try:
        blob = torch.load(p, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise DataError(f"unreadable checkpoint {path}: {exc}") from exc
    if not isinstance(blob, dict) or blob.get("format_version") != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint format in {path}")
    payload = blob["payload"]
    if hashlib.sha256(payload).hexdigest() != blob["sha256"]:
        raise DataError(f"checkpoint payload checksum mismatch in {path}")
    model = CausalDiscoveryModel(ModelConfig.from_dict(blob["model_config"]))
    state = torch.load(io.BytesIO(payload), map_location="cpu", weights_only=True)
    sample = next(iter(state.values()))
    if sample.dtype == torch.float64:
        model.double()
    model.load_state_dict(state)
    meta = {
        "train_config": blob.get("train_config"),
        "history": blob.get("history", []),
        "extra": blob.get("extra", {}),
    }
    return model, meta
