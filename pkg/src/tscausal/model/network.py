"""Full causal-discovery network: encoder, aggregation, and every head
behind one forward pass."""

from __future__ import annotations

from dataclasses import dataclass, fields

import torch
from torch import nn

from ..errors import ConfigError
from ..windows import segment_windows, split_window
from .attention import WindowEncoder
from .exogenous import MixturePrior, PosteriorHead, ReconstructionDecoder, Router
from .heads import GraphHead, InterventionHead, NodeAggregator


@dataclass
class ModelConfig:
    """Architecture hyperparameters.

    ``skip_intra`` / ``skip_inter`` drop one attention axis (ablations);
    ``fixed_prior`` replaces the learned mixture with a frozen standard
    normal.
    """

    num_channels: int
    n_lags: int
    embed_dim: int = 32
    num_blocks: int = 4
    num_heads: int = 1
    mixture_components: int = 10
    stride: int = 1
    pooling: str = "mean"
    head_hidden: int = 64
    decoder_hidden: int = 32
    skip_intra: bool = False
    skip_inter: bool = False
    fixed_prior: bool = False

    def __post_init__(self) -> None:
        if self.num_channels < 1:
            raise ConfigError(f"num_channels must be >= 1, got {self.num_channels}")
        if self.n_lags < 1:
            raise ConfigError(f"n_lags must be >= 1, got {self.n_lags}")
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")

    @property
    def window_positions(self) -> int:
        """Scalars per flattened window, (n+1)*C."""
        return (self.n_lags + 1) * self.num_channels

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown model config keys: {', '.join(unknown)}")
        return cls(**data)


@dataclass
class ModelOutputs:
    """Everything one forward pass produces.

    windows: (B, m, P) flattened inputs actually encoded
    encoded: (B, m, P, d) per-position window representations
    nodes: (B, P, d) aggregated per-position summaries
    graph_probs: (B, n*C, C) link probabilities
    intervention_probs: (B, m) per-window intervention probabilities
    router_logits: (B, K) mixture weight logits
    post_mean / post_logvar: (B, m, C) noise posterior moments
    """

    windows: torch.Tensor
    encoded: torch.Tensor
    nodes: torch.Tensor
    graph_probs: torch.Tensor
    intervention_probs: torch.Tensor
    router_logits: torch.Tensor
    post_mean: torch.Tensor
    post_logvar: torch.Tensor

    @property
    def log_weights(self) -> torch.Tensor:
        return torch.log_softmax(self.router_logits, dim=-1)


class CausalDiscoveryModel(nn.Module):
    """Window-attention encoder with graph, intervention, and noise heads."""

    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        self.config = config
        self.encoder = WindowEncoder(
            config.window_positions,
            config.embed_dim,
            num_blocks=config.num_blocks,
            heads=config.num_heads,
            skip_intra=config.skip_intra,
            skip_inter=config.skip_inter,
        )
        self.aggregator = NodeAggregator(config.embed_dim, pooling=config.pooling)
        self.graph_head = GraphHead(config.embed_dim, config.num_channels, config.head_hidden)
        self.intervention_head = InterventionHead(config.embed_dim, config.head_hidden)
        self.posterior = PosteriorHead(config.embed_dim, config.num_channels)
        self.router = Router(config.embed_dim, config.mixture_components)
        self.prior = MixturePrior(
            config.mixture_components, config.num_channels, fixed=config.fixed_prior
        )
        self.decoder = ReconstructionDecoder(config.num_channels, config.decoder_hidden)

    def forward_windows(self, windows: torch.Tensor) -> ModelOutputs:
        """Run precomputed flattened windows (B, m, P) through every head."""
        if windows.ndim != 3:
            raise ConfigError(f"windows must be (batch, m, positions), got {tuple(windows.shape)}")
        encoded = self.encoder(windows)
        nodes = self.aggregator(encoded)
        post_mean, post_logvar = self.posterior(encoded)
        return ModelOutputs(
            windows=windows,
            encoded=encoded,
            nodes=nodes,
            graph_probs=self.graph_head(nodes),
            intervention_probs=self.intervention_head(encoded),
            router_logits=self.router(encoded),
            post_mean=post_mean,
            post_logvar=post_logvar,
        )

    def forward(self, series: torch.Tensor) -> ModelOutputs:
        """Segment a batch of series (B, T, C) into windows and encode."""
        if series.ndim != 3:
            raise ConfigError(f"series must be (batch, time, channels), got {tuple(series.shape)}")
        if series.shape[-1] != self.config.num_channels:
            raise ConfigError(
                f"series has {series.shape[-1]} channels, model expects "
                f"{self.config.num_channels}"
            )
        windows = segment_windows(series, self.config.n_lags, self.config.stride)
        return self.forward_windows(windows)

    def reconstruct(self, outputs: ModelOutputs, noise: torch.Tensor) -> torch.Tensor:
        """Rebuild each window's current step from its lag values, the
        predicted link probabilities, and a noise draw (B, m, C)."""
        lag_values, _ = split_window(outputs.windows, self.config.num_channels)
        return self.decoder(outputs.graph_probs, lag_values, noise)

    @torch.no_grad()
    def predict_graph(self, series: torch.Tensor) -> torch.Tensor:
        """Link probabilities (B, n*C, C) for a batch of series, eval mode."""
        was_training = self.training
        self.eval()
        try:
            return self.forward(series).graph_probs
        finally:
            self.train(was_training)

    @torch.no_grad()
    def estimate_noise(self, series: torch.Tensor) -> torch.Tensor:
        """Posterior mean of the exogenous noise for every window, (B, m, C).

        Window i's current step is time i*stride + n, so entry (b, i, c)
        estimates the noise on channel c at that step.
        """
        was_training = self.training
        self.eval()
        try:
            outputs = self.forward(series)
        finally:
            self.train(was_training)
        return outputs.post_mean
