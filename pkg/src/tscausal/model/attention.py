"""Embedding and the alternating two-axis attention encoder.

A batch of series becomes (B, m, P, d): m overlapping windows of P=(n+1)*C
scalar positions each. Every encoder block runs self-attention twice: over
the P axis (positions talk within a window) and over the m axis (each
position talks to itself across windows). Both sub-blocks carry a residual
connection and layer normalization; without them deep alternating stacks do
not train.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from ..errors import ConfigError


class SelfAttention(nn.Module):
    """Scaled dot-product self-attention over the second-to-last axis,
    with residual and layer norm. Single-head by default; with several
    heads an output projection merges them."""

    def __init__(self, dim: int, heads: int = 1) -> None:
        super().__init__()
        if heads < 1 or dim % heads != 0:
            raise ConfigError(f"heads={heads} must divide embed dim {dim}")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.query = nn.Linear(dim, dim)
        self.key = nn.Linear(dim, dim)
        self.value = nn.Linear(dim, dim)
        self.merge = nn.Linear(dim, dim) if heads > 1 else None
        self.norm = nn.LayerNorm(dim)

    def mix(self, x: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
        """Apply given attention weights to the value path of x; used by the
        forward pass and by tests pinning degenerate weight patterns."""
        *batch, length, _ = x.shape
        v = self.value(x).view(*batch, length, self.heads, self.head_dim).transpose(-3, -2)
        y = weights @ v
        y = y.transpose(-3, -2).reshape(*batch, length, self.dim)
        if self.merge is not None:
            y = self.merge(y)
        return self.norm(x + y)

    def attention_weights(self, x: torch.Tensor) -> torch.Tensor:
        *batch, length, _ = x.shape
        q = self.query(x).view(*batch, length, self.heads, self.head_dim).transpose(-3, -2)
        k = self.key(x).view(*batch, length, self.heads, self.head_dim).transpose(-3, -2)
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        return torch.softmax(scores, dim=-1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.mix(x, self.attention_weights(x))


class WindowEmbedding(nn.Module):
    """Scalar value projection plus a learned per-position encoding over the
    (n+1)*C window positions."""

    def __init__(self, positions: int, dim: int) -> None:
        super().__init__()
        self.project = nn.Linear(1, dim)
        self.position = nn.Parameter(torch.randn(positions, dim) * 0.02)

    def forward(self, windows: torch.Tensor) -> torch.Tensor:
        """(B, m, P) scalars -> (B, m, P, d)."""
        if windows.shape[-1] != self.position.shape[0]:
            raise ConfigError(
                f"windows have {windows.shape[-1]} positions, embedding expects "
                f"{self.position.shape[0]}"
            )
        return self.project(windows.unsqueeze(-1)) + self.position


class EncoderBlock(nn.Module):
    """One alternation: attention over window positions, then over windows."""

    def __init__(self, dim: int, heads: int = 1, skip_intra: bool = False, skip_inter: bool = False) -> None:
        super().__init__()
        self.intra = None if skip_intra else SelfAttention(dim, heads)
        self.inter = None if skip_inter else SelfAttention(dim, heads)

    def forward(self, s: torch.Tensor) -> torch.Tensor:
        if self.intra is not None:
            s = self.intra(s)
        if self.inter is not None:
            s = self.inter(s.transpose(1, 2)).transpose(1, 2)
        return s


class WindowEncoder(nn.Module):
    """Embedding followed by N alternating attention blocks."""

    def __init__(
        self,
        positions: int,
        dim: int,
        num_blocks: int = 4,
        heads: int = 1,
        skip_intra: bool = False,
        skip_inter: bool = False,
    ) -> None:
        super().__init__()
        if num_blocks < 1:
            raise ConfigError(f"num_blocks must be >= 1, got {num_blocks}")
        self.embed = WindowEmbedding(positions, dim)
        self.blocks = nn.ModuleList(
            EncoderBlock(dim, heads, skip_intra, skip_inter) for _ in range(num_blocks)
        )

    def forward(self, windows: torch.Tensor) -> torch.Tensor:
        """(B, m, P) -> (B, m, P, d)."""
        s = self.embed(windows)
        for block in self.blocks:
            s = block(s)
        return s
