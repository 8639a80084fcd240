"""Pretraining and fine-tuning loops with early stopping.

One optimization step encodes a random subset of each series' windows
(``max_windows``), which keeps single-core wall time bounded while leaving
the encoder agnostic to window count. Validation reuses a fixed window
subset drawn once from the eval stream, so scores stay comparable across
epochs.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from ..errors import NumericError
from ..metrics import auroc
from ..model import (
    CausalDiscoveryModel,
    contrastive_node_loss,
    graph_bce,
    intervention_window_loss,
    kl_mixture,
    mixup_interpolate,
    reconstruction_loss,
    sample_mixup,
    sample_posterior,
)
from ..seeding import seed_streams
from ..windows import split_window
from .config import TrainConfig
from .data import TensorSplit, batch_indices, subsample_windows


@dataclass
class LossBreakdown:
    """Unweighted term values, their weights, and the weighted total.

    ``total`` is accumulated in float64 from the logged terms, so
    ``total == recomputed_total()`` holds exactly.
    """

    terms: dict[str, float]
    weights: dict[str, float]
    total: float

    def recomputed_total(self) -> float:
        return math.fsum(self.weights[k] * self.terms[k] for k in self.terms)

    @classmethod
    def assemble(
        cls, named: dict[str, torch.Tensor], weights: dict[str, float]
    ) -> tuple[torch.Tensor, "LossBreakdown"]:
        """Weighted sum as a differentiable tensor plus the float64 record."""
        tensor_total = sum(weights[k] * t for k, t in named.items())
        terms = {k: float(t.detach().to(torch.float64)) for k, t in named.items()}
        total = math.fsum(weights[k] * terms[k] for k in terms)
        return tensor_total, cls(terms=terms, weights=dict(weights), total=total)


@dataclass
class TrainingResult:
    history: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    best_val_total: float = math.inf
    stopped_early: bool = False


def _mean_breakdown(parts: list[LossBreakdown]) -> LossBreakdown:
    keys = parts[0].terms.keys()
    terms = {k: math.fsum(p.terms[k] for p in parts) / len(parts) for k in keys}
    weights = parts[0].weights
    total = math.fsum(weights[k] * terms[k] for k in keys)
    return LossBreakdown(terms=terms, weights=weights, total=total)


def _segment_batch(
    split: TensorSplit, batch: dict, window_idx: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor | None, torch.Tensor | None]:
    """Flattened windows for the clean series and, when present, the twin,
    restricted to the chosen window subset."""
    from ..windows import segment_windows

    clean = segment_windows(batch["series"], split.n_lags, split.stride)[:, window_idx]
    twin = None
    labels = None
    if batch["twin"] is not None:
        twin = segment_windows(batch["twin"], split.n_lags, split.stride)[:, window_idx]
        labels = batch["labels"][:, window_idx]
    return clean, twin, labels


def _reconstruction_term(
    model: CausalDiscoveryModel, outputs, generator: torch.Generator | None
) -> torch.Tensor:
    eps = torch.empty_like(outputs.post_mean).normal_(generator=generator)
    z = sample_posterior(outputs.post_mean, outputs.post_logvar, eps)
    _, current = split_window(outputs.windows, model.config.num_channels)
    return reconstruction_loss(current, model.reconstruct(outputs, z))


def pretrain_step(
    model: CausalDiscoveryModel,
    split: TensorSplit,
    batch: dict,
    cfg: TrainConfig,
    gens: dict[str, torch.Generator],
) -> tuple[torch.Tensor, LossBreakdown]:
    """All pretraining terms for one batch: reconstruction on the clean
    series and its twin, graph supervision on clean and mixed inputs, the
    noise KL on clean windows, and the intervention window and node
    contrast terms against the twin."""
    window_idx = subsample_windows(split.num_windows, cfg.max_windows, gens["windows"])
    clean_w, twin_w, labels = _segment_batch(split, batch, window_idx)
    clean_out = model.forward_windows(clean_w)

    named: dict[str, torch.Tensor] = {}
    weights: dict[str, float] = {}

    recon = _reconstruction_term(model, clean_out, gens["mc"])

    graph = graph_bce(batch["graph"], clean_out.graph_probs)
    if cfg.use_mixup:
        lam, perm = sample_mixup(clean_w.shape[0], cfg.mixup_alpha, gens["mixup"])
        mixed_w = mixup_interpolate(clean_w, clean_w[perm], lam)
        mixed_graph = mixup_interpolate(batch["graph"], batch["graph"][perm], lam)
        mixed_out = model.forward_windows(mixed_w)
        graph = graph + graph_bce(mixed_graph, mixed_out.graph_probs)

    kl = kl_mixture(
        clean_out.post_mean,
        clean_out.post_logvar,
        model.prior,
        clean_out.log_weights,
        num_mc=cfg.num_mc,
        generator=gens["mc"],
        direction=cfg.kl_direction,
    ).mean()

    if cfg.use_intervention and twin_w is not None:
        twin_out = model.forward_windows(twin_w)
        recon = 0.5 * (recon + _reconstruction_term(model, twin_out, gens["mc"]))
        do = intervention_window_loss(twin_out.intervention_probs, labels)
        do = do + contrastive_node_loss(clean_out.nodes, twin_out.nodes, cfg.temperature)
        named["intervention"] = do
        weights["intervention"] = cfg.weight_intervention

    named["recon"] = recon
    weights["recon"] = 1.0
    named["graph"] = graph
    weights["graph"] = cfg.weight_graph
    named["kl"] = kl
    weights["kl"] = cfg.weight_kl
    return LossBreakdown.assemble(named, weights)


def finetune_step(
    model: CausalDiscoveryModel,
    split: TensorSplit,
    batch: dict,
    cfg: TrainConfig,
    gens: dict[str, torch.Generator],
) -> tuple[torch.Tensor, LossBreakdown]:
    """Unsupervised adaptation: reconstruction plus the noise KL."""
    window_idx = subsample_windows(split.num_windows, cfg.max_windows, gens["windows"])
    clean_w, _, _ = _segment_batch(split, batch, window_idx)
    out = model.forward_windows(clean_w)
    recon = _reconstruction_term(model, out, gens["mc"])
    kl = kl_mixture(
        out.post_mean,
        out.post_logvar,
        model.prior,
        out.log_weights,
        num_mc=cfg.num_mc,
        generator=gens["mc"],
        direction=cfg.kl_direction,
    ).mean()
    return LossBreakdown.assemble(
        {"recon": recon, "kl": kl}, {"recon": 1.0, "kl": cfg.weight_kl}
    )


def _step_fn(cfg: TrainConfig):
    return pretrain_step if cfg.mode == "pretrain" else finetune_step


def _make_generators(streams: dict[str, int]) -> dict[str, torch.Generator]:
    gens = {}
    for name, key in (("mixup", "mixup"), ("mc", "mc"), ("windows", "shuffle")):
        g = torch.Generator()
        g.manual_seed(int(streams[key]))
        gens[name] = g
    return gens


@torch.no_grad()
def validate(
    model: CausalDiscoveryModel, split: TensorSplit, cfg: TrainConfig, eval_seed: int
) -> LossBreakdown:
    """Loss over a held-out split with frozen randomness: the same window
    subset, noise draws, and mixup pairings every call."""
    was_training = model.training
    model.eval()
    gens = {
        name: torch.Generator().manual_seed(int(eval_seed) + off)
        for off, name in enumerate(("mixup", "mc", "windows"))
    }
    step = _step_fn(cfg)
    parts = []
    try:
        for idx in batch_indices(split.size, cfg.batch_size):
            _, breakdown = step(model, split, split.slice(idx), cfg, gens)
            parts.append(breakdown)
    finally:
        model.train(was_training)
    return _mean_breakdown(parts)


def fit(
    model: CausalDiscoveryModel,
    train_split: TensorSplit,
    val_split: TensorSplit | None,
    cfg: TrainConfig,
    verbose: bool = False,
) -> TrainingResult:
    """Optimize with Adam, clip gradients, stop early on the validation
    total, and restore the best weights before returning."""
    streams = seed_streams(cfg.seed)
    gens = _make_generators(streams)
    shuffle_rng = np.random.default_rng(streams["shuffle"])
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    step = _step_fn(cfg)

    result = TrainingResult()
    best_state: dict | None = None
    bad_epochs = 0
    for epoch in range(cfg.epochs):
        model.train()
        parts = []
        for idx in batch_indices(train_split.size, cfg.batch_size, shuffle_rng):
            optimizer.zero_grad(set_to_none=True)
            loss, breakdown = step(model, train_split, train_split.slice(idx), cfg, gens)
            if not math.isfinite(breakdown.total):
                raise NumericError(
                    f"non-finite training loss {breakdown.total} at epoch {epoch}"
                )
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            optimizer.step()
            parts.append(breakdown)
        train_mean = _mean_breakdown(parts)

        entry = {"epoch": epoch, "train": train_mean.terms | {"total": train_mean.total}}
        monitored = train_mean.total
        if val_split is not None:
            val_mean = validate(model, val_split, cfg, streams["eval"])
            entry["val"] = val_mean.terms | {"total": val_mean.total}
            monitored = val_mean.total
        result.history.append(entry)
        if verbose:
            val_note = f" val={entry['val']['total']:.4f}" if "val" in entry else ""
            print(f"[{cfg.mode}] epoch {epoch} train={train_mean.total:.4f}{val_note}")

        if monitored < result.best_val_total:
            result.best_val_total = monitored
            result.best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                result.stopped_early = True
                break
    if best_state is not None:
        model.load_state_dict(best_state)
    return result


@torch.no_grad()
def evaluate_graph_auroc(
    model: CausalDiscoveryModel, split: TensorSplit, batch_size: int = 16
) -> float:
    """Mean per-series AUROC of predicted link probabilities against the
    true adjacency, using every window of every series."""
    was_training = model.training
    model.eval()
    scores = []
    try:
        for idx in batch_indices(split.size, batch_size):
            batch = split.slice(idx)
            probs = model(batch["series"]).graph_probs
            for row in range(probs.shape[0]):
                target = batch["graph"][row].numpy().ravel()
                if target.min() == target.max():
                    continue  # single-class graph carries no ranking signal
                scores.append(auroc(probs[row].numpy().ravel(), target))
    finally:
        model.train(was_training)
    if not scores:
        raise NumericError("no graph in the split has both present and absent links")
    return float(np.mean(scores))
