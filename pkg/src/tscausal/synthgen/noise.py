"""Per-channel Gaussian-mixture exogenous noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass
class GaussianMixtureNoiseSpec:
    """One Gaussian mixture per channel.

    ``weights[c]``, ``means[c]`` and ``stds[c]`` are aligned 1-D arrays for
    channel c; component counts may differ across channels.
    """

    weights: tuple[np.ndarray, ...]
    means: tuple[np.ndarray, ...]
    stds: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        self.weights = tuple(np.asarray(w, dtype=np.float64) for w in self.weights)
        self.means = tuple(np.asarray(m, dtype=np.float64) for m in self.means)
        self.stds = tuple(np.asarray(s, dtype=np.float64) for s in self.stds)
        if not len(self.weights) == len(self.means) == len(self.stds):
            raise ConfigError("weights, means and stds must cover the same channels")
        for c, (w, m, s) in enumerate(zip(self.weights, self.means, self.stds)):
            if not w.shape == m.shape == s.shape or w.ndim != 1 or w.size == 0:
                raise ConfigError(f"channel {c}: mismatched mixture component arrays")
            if abs(w.sum() - 1.0) > 1e-9 or (w < 0).any():
                raise ConfigError(f"channel {c}: mixture weights must be a distribution")
            if (s <= 0).any():
                raise ConfigError(f"channel {c}: mixture stds must be strictly positive")

    @property
    def num_channels(self) -> int:
        return len(self.weights)

    def channel_mean(self, channel: int) -> float:
        return float(self.weights[channel] @ self.means[channel])

    def channel_std(self, channel: int) -> float:
        w, m, s = self.weights[channel], self.means[channel], self.stds[channel]
        second_moment = w @ (s**2 + m**2)
        return float(np.sqrt(second_moment - (w @ m) ** 2))

    def sample(self, rng: np.random.Generator, steps: int) -> np.ndarray:
        """(steps, C) matrix of independent mixture draws."""
        out = np.empty((steps, self.num_channels), dtype=np.float64)
        for c in range(self.num_channels):
            comp = rng.choice(len(self.weights[c]), size=steps, p=self.weights[c])
            out[:, c] = rng.normal(self.means[c][comp], self.stds[c][comp])
        return out

    def sample_channel(self, rng: np.random.Generator, channel: int, size: int = 1) -> np.ndarray:
        comp = rng.choice(len(self.weights[channel]), size=size, p=self.weights[channel])
        return rng.normal(self.means[channel][comp], self.stds[channel][comp])

    def to_dict(self) -> dict:
        return {
            "channels": [
                {"weights": w.tolist(), "means": m.tolist(), "stds": s.tolist()}
                for w, m, s in zip(self.weights, self.means, self.stds)
            ]
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GaussianMixtureNoiseSpec":
        chans = payload["channels"]
        return cls(
            weights=tuple(np.asarray(c["weights"]) for c in chans),
            means=tuple(np.asarray(c["means"]) for c in chans),
            stds=tuple(np.asarray(c["stds"]) for c in chans),
        )


def sample_noise_model(
    num_channels: int,
    rng: np.random.Generator,
    max_components: int = 5,
    mean_range: tuple[float, float] = (-1.0, 1.0),
    std_range: tuple[float, float] = (0.1, 0.5),
) -> GaussianMixtureNoiseSpec:
    """Draw a mixture spec per channel: component count uniform in
    [1, max_components], means and stds uniform in their ranges, weights
    from a flat Dirichlet."""
    weights, means, stds = [], [], []
    for _ in range(num_channels):
        k = int(rng.integers(1, max_components + 1))
        weights.append(rng.dirichlet(np.ones(k)))
        means.append(rng.uniform(*mean_range, size=k))
        stds.append(rng.uniform(*std_range, size=k))
    return GaussianMixtureNoiseSpec(weights=tuple(weights), means=tuple(means), stds=tuple(stds))
