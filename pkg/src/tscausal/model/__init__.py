"""Window-attention model: encoder, heads, exogenous mixture, augmentation."""

from .attention import SelfAttention, WindowEmbedding, WindowEncoder
from .augment import contrastive_node_loss, intervention_window_loss, mixup_interpolate, sample_mixup
from .exogenous import (
    MixturePrior,
    PosteriorHead,
    ReconstructionDecoder,
    Router,
    gaussian_log_prob,
    kl_mixture,
    reconstruction_loss,
    sample_posterior,
)
from .heads import GraphHead, InterventionHead, NodeAggregator, graph_bce
from .network import CausalDiscoveryModel, ModelConfig, ModelOutputs

__all__ = [
    "SelfAttention",
    "WindowEmbedding",
    "WindowEncoder",
    "GraphHead",
    "InterventionHead",
    "NodeAggregator",
    "graph_bce",
    "MixturePrior",
    "PosteriorHead",
    "Router",
    "ReconstructionDecoder",
    "gaussian_log_prob",
    "kl_mixture",
    "sample_posterior",
    "reconstruction_loss",
    "intervention_window_loss",
    "contrastive_node_loss",
    "sample_mixup",
    "mixup_interpolate",
    "CausalDiscoveryModel",
    "ModelConfig",
    "ModelOutputs",
]
