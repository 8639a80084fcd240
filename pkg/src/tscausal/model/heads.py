"""Aggregation over windows and the prediction heads."""

from __future__ import annotations

import math

import torch
from torch import nn

from ..errors import ConfigError

PROB_EPS = 1e-7


def _mlp(dim_in: int, hidden: int, dim_out: int) -> nn.Sequential:
    return nn.Sequential(nn.Linear(dim_in, hidden), nn.GELU(), nn.Linear(hidden, dim_out))


class NodeAggregator(nn.Module):
    """Per-position summary over windows: mean (default) or learned-query
    attention pooling, then layer norm."""

    def __init__(self, dim: int, pooling: str = "mean") -> None:
        super().__init__()
        if pooling not in ("mean", "attention"):
            raise ConfigError(f"pooling must be 'mean' or 'attention', got {pooling!r}")
        self.pooling = pooling
        self.norm = nn.LayerNorm(dim)
        if pooling == "attention":
            self.query = nn.Parameter(torch.randn(dim) * 0.02)

    def forward(self, s: torch.Tensor) -> torch.Tensor:
        """(B, m, P, d) -> (B, P, d)."""
        if self.pooling == "mean":
            pooled = s.mean(dim=1)
        else:
            scores = (s * self.query).sum(-1) / math.sqrt(s.shape[-1])  # (B, m, P)
            weights = torch.softmax(scores, dim=1)
            pooled = (weights.unsqueeze(-1) * s).sum(dim=1)
        return self.norm(pooled)


class GraphHead(nn.Module):
    """Bilinear link-probability head: project lag-position and current-step
    summaries, take inner products, squash to (0, 1)."""

    def __init__(self, dim: int, num_channels: int, hidden: int | None = None) -> None:
        super().__init__()
        self.num_channels = num_channels
        hidden = hidden or dim
        self.lag_proj = _mlp(dim, hidden, dim)
        self.current_proj = _mlp(dim, hidden, dim)

    def forward(self, u: torch.Tensor) -> torch.Tensor:
        """(B, P, d) -> (B, n*C, C) of link probabilities."""
        c = self.num_channels
        lag = self.lag_proj(u[..., :-c, :])
        current = self.current_proj(u[..., -c:, :])
        return torch.sigmoid(lag @ current.transpose(-1, -2))


class InterventionHead(nn.Module):
    """Per-window intervention probability from the mean-pooled window slice."""

    def __init__(self, dim: int, hidden: int | None = None) -> None:
        super().__init__()
        self.score = _mlp(dim, hidden or dim, 1)

    def forward(self, s: torch.Tensor) -> torch.Tensor:
        """(B, m, P, d) -> (B, m)."""
        return torch.sigmoid(self.score(s.mean(dim=2)).squeeze(-1))


def graph_bce(target: torch.Tensor, probs: torch.Tensor) -> torch.Tensor:
    """Mean binary cross-entropy between a (possibly soft) target adjacency
    and predicted link probabilities, probabilities clipped away from {0, 1}."""
    if target.shape != probs.shape:
        raise ConfigError(f"target shape {tuple(target.shape)} != probs {tuple(probs.shape)}")
    p = probs.clamp(PROB_EPS, 1.0 - PROB_EPS)
    return -(target * torch.log(p) + (1.0 - target) * torch.log1p(-p)).mean()
