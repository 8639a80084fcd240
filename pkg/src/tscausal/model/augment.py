"""Training-time augmentation objectives: intervention window detection,
node-level contrast between a series and its intervened twin, and mixup
over encoded series."""

from __future__ import annotations

import torch
from torch import nn

from ..errors import ConfigError
from .heads import PROB_EPS


def intervention_window_loss(probs: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Binary cross-entropy over window labels, summed over the windows of
    each series and averaged over the batch.

    probs and labels are both (B, m); labels mark windows overlapping the
    intervened span.
    """
    if probs.shape != labels.shape:
        raise ConfigError(f"probs shape {tuple(probs.shape)} != labels {tuple(labels.shape)}")
    p = probs.clamp(PROB_EPS, 1.0 - PROB_EPS)
    per_window = -(labels * p.log() + (1.0 - labels) * (1.0 - p).log())
    return per_window.sum(dim=-1).mean()


def contrastive_node_loss(
    clean_nodes: torch.Tensor, twin_nodes: torch.Tensor, temperature: float = 0.1
) -> torch.Tensor:
    """InfoNCE over node positions: each aggregated node representation of a
    series must pick out the same position in its intervened twin among all
    of the twin's positions.

    Both inputs are (B, P, d). Cosine similarities scaled by the
    temperature; cross-entropy summed over positions, averaged over batch.
    """
    if clean_nodes.shape != twin_nodes.shape:
        raise ConfigError(
            f"clean shape {tuple(clean_nodes.shape)} != twin {tuple(twin_nodes.shape)}"
        )
    if temperature <= 0:
        raise ConfigError(f"temperature must be positive, got {temperature}")
    a = nn.functional.normalize(clean_nodes, dim=-1)
    b = nn.functional.normalize(twin_nodes, dim=-1)
    logits = torch.einsum("bpd,bqd->bpq", a, b) / temperature
    # Reductions run in sorted-value order so that relabeling the node
    # positions consistently in both inputs leaves the result bit-identical.
    diag = torch.diagonal(logits, dim1=-2, dim2=-1)
    shifted = logits - logits.max(dim=-1, keepdim=True).values
    log_norm = logits.max(dim=-1).values + torch.log(
        shifted.exp().sort(dim=-1).values.sum(dim=-1)
    )
    per_node = log_norm - diag
    return per_node.sort(dim=-1).values.sum(dim=-1).mean()


def sample_mixup(
    batch_size: int, alpha: float = 1.0, generator: torch.Generator | None = None
) -> tuple[torch.Tensor, torch.Tensor]:
    """Mixing coefficients lambda ~ Beta(alpha, alpha) and a partner
    permutation for pairing series within the batch."""
    if alpha <= 0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    # Beta(1, 1) is uniform, which covers the default; other alphas go
    # through the inverse-CDF-free Johnk construction U^(1/a) normalization
    # so the draw stays on the provided generator.
    if alpha == 1.0:
        lam = torch.empty(batch_size).uniform_(generator=generator)
    else:
        u = torch.empty(batch_size).uniform_(generator=generator).pow(1.0 / alpha)
        v = torch.empty(batch_size).uniform_(generator=generator).pow(1.0 / alpha)
        total = u + v
        # rejection step of the Johnk sampler: resample rows until u+v <= 1
        bad = total > 1.0
        while bool(bad.any()):
            u2 = torch.empty(int(bad.sum())).uniform_(generator=generator).pow(1.0 / alpha)
            v2 = torch.empty(int(bad.sum())).uniform_(generator=generator).pow(1.0 / alpha)
            u[bad] = u2
            v[bad] = v2
            total = u + v
            bad = total > 1.0
        lam = u / total
    perm = torch.randperm(batch_size, generator=generator)
    return lam, perm


def mixup_interpolate(
    values: torch.Tensor, partner: torch.Tensor, lam: torch.Tensor
) -> torch.Tensor:
    """Convex combination lam * values + (1 - lam) * partner, with lam
    broadcast over trailing axes."""
    if values.shape != partner.shape:
        raise ConfigError(f"values shape {tuple(values.shape)} != partner {tuple(partner.shape)}")
    if lam.ndim != 1 or lam.shape[0] != values.shape[0]:
        raise ConfigError(f"lam must be (batch,), got {tuple(lam.shape)}")
    shape = (-1,) + (1,) * (values.ndim - 1)
    lam = lam.reshape(shape).to(values.dtype)
    return lam * values + (1.0 - lam) * partner
