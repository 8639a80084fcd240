"""Exogenous noise model: routed Gaussian-mixture prior, per-window
variational posterior, and the graph-weighted reconstruction decoder."""

from __future__ import annotations

import math

import torch
from torch import nn

from ..errors import ConfigError

LOGVAR_RANGE = (-10.0, 10.0)
LOG_2PI = math.log(2.0 * math.pi)


class Router(nn.Module):
    """Series-level mixing weights: pool the encoded windows, map through a
    small feed-forward net to K logits."""

    def __init__(self, dim: int, components: int, hidden: int | None = None) -> None:
        super().__init__()
        if components < 1:
            raise ConfigError(f"components must be >= 1, got {components}")
        self.net = nn.Sequential(
            nn.Linear(dim, hidden or dim), nn.GELU(), nn.Linear(hidden or dim, components)
        )

    def forward(self, s: torch.Tensor) -> torch.Tensor:
        """(B, m, P, d) -> (B, K) logits; softmax for the simplex weights."""
        return self.net(s.mean(dim=(1, 2)))


class MixturePrior(nn.Module):
    """K diagonal Gaussians over the C-dimensional noise vector.

    Variances are exponentials of free parameters, so strictly positive.
    ``fixed=True`` freezes a single standard-normal component (the ablation
    without the learned mixture).
    """

    def __init__(self, components: int, num_channels: int, fixed: bool = False) -> None:
        super().__init__()
        if components < 1:
            raise ConfigError(f"components must be >= 1, got {components}")
        self.components = 1 if fixed else components
        self.num_channels = num_channels
        self.fixed = fixed
        if fixed:
            self.register_buffer("means", torch.zeros(1, num_channels))
            self.register_buffer("log_vars", torch.zeros(1, num_channels))
        else:
            self.means = nn.Parameter(torch.randn(components, num_channels) * 0.5)
            self.log_vars = nn.Parameter(torch.zeros(components, num_channels))

    def component_log_prob(self, z: torch.Tensor) -> torch.Tensor:
        """(..., C) -> (..., K): log density of z under each component."""
        diff = z.unsqueeze(-2) - self.means
        log_vars = self.log_vars
        per_dim = -0.5 * (LOG_2PI + log_vars + diff.pow(2) / log_vars.exp())
        return per_dim.sum(-1)

    def log_prob(self, z: torch.Tensor, log_weights: torch.Tensor) -> torch.Tensor:
        """Mixture log density. ``log_weights`` (..., K) broadcasts against
        the leading shape of z."""
        comp = self.component_log_prob(z)
        return torch.logsumexp(comp + log_weights, dim=-1)

    def stats(self) -> tuple[torch.Tensor, torch.Tensor]:
        """Per-component means and stds, both (K, C)."""
        return self.means.detach(), (0.5 * self.log_vars).exp().detach()


class PosteriorHead(nn.Module):
    """Per-window diagonal Gaussian over the noise vector, read off the
    current-step position representations."""

    def __init__(self, dim: int, num_channels: int) -> None:
        super().__init__()
        self.num_channels = num_channels
        self.project = nn.Linear(dim, 2)

    def forward(self, s: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """(B, m, P, d) -> mean and log-variance, each (B, m, C)."""
        current = s[..., -self.num_channels :, :]
        out = self.project(current)
        mean = out[..., 0]
        log_var = out[..., 1].clamp(*LOGVAR_RANGE)
        return mean, log_var


def gaussian_log_prob(z: torch.Tensor, mean: torch.Tensor, log_var: torch.Tensor) -> torch.Tensor:
    """Diagonal Gaussian log density, summed over the last axis."""
    return (-0.5 * (LOG_2PI + log_var + (z - mean).pow(2) / log_var.exp())).sum(-1)


def sample_posterior(
    mean: torch.Tensor, log_var: torch.Tensor, eps: torch.Tensor
) -> torch.Tensor:
    """Reparameterized draw mean + std * eps; gradients flow through both
    moments while eps stays fixed."""
    return mean + (0.5 * log_var).exp() * eps


def kl_mixture(
    mean: torch.Tensor,
    log_var: torch.Tensor,
    prior: MixturePrior,
    log_weights: torch.Tensor,
    num_mc: int = 8,
    eps: torch.Tensor | None = None,
    generator: torch.Generator | None = None,
    direction: str = "q_to_p",
) -> torch.Tensor:
    """Monte Carlo KL between per-window posteriors and the mixture prior.

    Returns one value per window, mean over ``num_mc`` samples. The default
    direction KL(q || p) is the one trained on; ``direction="p_to_q"``
    evaluates the reverse by sampling from the prior instead.
    ``eps`` pins the standard-normal draws (num_mc, *mean.shape) for
    deterministic evaluation.
    """
    if direction not in ("q_to_p", "p_to_q"):
        raise ConfigError(f"unknown KL direction {direction!r}")
    if eps is None:
        eps = torch.empty((num_mc, *mean.shape), dtype=mean.dtype, device=mean.device).normal_(
            generator=generator
        )
    elif eps.shape[0] != num_mc or eps.shape[1:] != mean.shape:
        raise ConfigError(f"eps shape {tuple(eps.shape)} != ({num_mc}, *{tuple(mean.shape)})")
    if direction == "q_to_p":
        z = sample_posterior(mean, log_var, eps)
        log_q = gaussian_log_prob(z, mean, log_var)
        log_p = prior.log_prob(z, log_weights.unsqueeze(-2))
        return (log_q - log_p).mean(0)
    # literal reverse direction: draw from the mixture prior
    with torch.no_grad():
        weights = torch.broadcast_to(
            log_weights.unsqueeze(-2).exp(), (*mean.shape[:-1], prior.components)
        )
        comp = torch.multinomial(
            weights.reshape(-1, prior.components),
            num_samples=num_mc,
            replacement=True,
            generator=generator,
        )
        comp = comp.T.reshape(num_mc, *mean.shape[:-1])
    means_k = prior.means[comp]
    stds_k = (0.5 * prior.log_vars[comp]).exp()
    z = means_k + stds_k * eps
    log_p = prior.log_prob(z, log_weights.unsqueeze(-2))
    log_q = gaussian_log_prob(z, mean, log_var)
    return (log_p - log_q).mean(0)


class ReconstructionDecoder(nn.Module):
    """Rebuild the current step from lag values routed through predicted
    link probabilities: elementwise feature map on the lag scalars, weighted
    sum through the soft adjacency, channel mixer, plus the noise draw."""

    def __init__(self, num_channels: int, hidden: int = 32) -> None:
        super().__init__()
        self.feature = nn.Sequential(nn.Linear(1, hidden), nn.GELU(), nn.Linear(hidden, 1))
        self.mixer = nn.Sequential(
            nn.Linear(num_channels, hidden), nn.GELU(), nn.Linear(hidden, num_channels)
        )

    def forward(
        self, link_probs: torch.Tensor, lag_values: torch.Tensor, noise: torch.Tensor
    ) -> torch.Tensor:
        """link_probs (B, nC, C), lag_values (B, m, nC), noise (B, m, C)
        -> reconstructed current step (B, m, C)."""
        feats = self.feature(lag_values.unsqueeze(-1)).squeeze(-1)
        mixed = torch.einsum("bmp,bpc->bmc", feats, link_probs)
        return self.mixer(mixed) + noise


def reconstruction_loss(target: torch.Tensor, prediction: torch.Tensor) -> torch.Tensor:
    """Euclidean norm of the per-window residual, averaged over windows and
    batch."""
    if target.shape != prediction.shape:
        raise ConfigError(
            f"target shape {tuple(target.shape)} != prediction {tuple(prediction.shape)}"
        )
    return torch.linalg.vector_norm(target - prediction, dim=-1).mean()
