"""Forward simulation of the lagged recursion, interventions and spikes.

The recursion is x[t] = g(sum over edges of f(parent value)) + Z[t] with the
first n steps drawn i.i.d. from the channel noise mixtures. Histories are
clipped to +-CLIP_BOUND before each step; a non-finite post-step value is a
hard numeric error naming the offending step and channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, NumericError
from ..types import InterventionRecord, MultivariateSeries
from .mechanisms import MechanismSet
from .noise import GaussianMixtureNoiseSpec

CLIP_BOUND = 1e6


@dataclass
class SimulationResult:
    """Trimmed series plus the full trajectory and noise draws that made it."""

    series: MultivariateSeries
    trajectory: np.ndarray  # (burn_in + T, C), pre-trim
    noise: np.ndarray  # (burn_in + T, C)
    burn_in: int


def _recurse(
    x: np.ndarray,
    noise: np.ndarray,
    mechanisms: MechanismSet,
    n_lags: int,
    start: int,
) -> None:
    """Fill x[start:] in place following the recursion with the given noise."""
    total = x.shape[0]
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(start, total):
            history = np.clip(x[t - n_lags : t], -CLIP_BOUND, CLIP_BOUND)
            x[t] = mechanisms.step(history) + noise[t]
            if not np.isfinite(x[t]).all():
                channel = int(np.flatnonzero(~np.isfinite(x[t]))[0])
                raise NumericError(f"simulation diverged at t={t}, channel={channel}")


def simulate(
    graph_n_lags: int,
    mechanisms: MechanismSet,
    noise_spec: GaussianMixtureNoiseSpec,
    length: int,
    burn_in: int = 100,
    rng: np.random.Generator | None = None,
    noise: np.ndarray | None = None,
    series_id: str = "",
    graph_id: str = "",
) -> SimulationResult:
    """Simulate burn_in + length steps and return the final ``length``.

    ``noise`` overrides the exogenous draws (shape (burn_in + length, C));
    otherwise they are sampled from ``noise_spec`` with ``rng``. The first
    min(n, total) steps serve as initial conditions taken directly from the
    noise draws.
    """
    if length < 1:
        raise ConfigError(f"length must be >= 1, got {length}")
    if burn_in < 0:
        raise ConfigError(f"burn_in must be >= 0, got {burn_in}")
    total = burn_in + length
    channels = noise_spec.num_channels
    if noise is None:
        if rng is None:
            raise ConfigError("simulate needs either an rng or explicit noise draws")
        noise = noise_spec.sample(rng, total)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != (total, channels):
        raise ConfigError(f"noise must have shape {(total, channels)}, got {noise.shape}")
    x = np.empty((total, channels), dtype=np.float64)
    init = min(graph_n_lags, total)
    x[:init] = noise[:init]
    _recurse(x, noise, mechanisms, graph_n_lags, init)
    series = MultivariateSeries(
        values=x[burn_in:].copy(), series_id=series_id, graph_id=graph_id
    )
    return SimulationResult(series=series, trajectory=x, noise=noise, burn_in=burn_in)


def apply_intervention(
    sim: SimulationResult,
    graph_n_lags: int,
    mechanisms: MechanismSet,
    noise_spec: GaussianMixtureNoiseSpec,
    t1: int,
    t2: int,
    rng: np.random.Generator,
    channels: tuple[int, ...] | None = None,
) -> tuple[MultivariateSeries, InterventionRecord]:
    """Hard intervention on a simulated series, sharing its noise draws.

    At ``t1`` (index into the trimmed series) each treated channel's value is
    replaced by a fresh draw from its own noise mixture; every later step is
    regenerated through the recursion from the modified history with the base
    noise, so steps whose history is untouched reproduce the base values
    exactly. ``[t1, t2]`` is the labelled extent recorded for training.
    """
    length = sim.series.length
    if not 0 <= t1 <= t2 < length:
        raise ConfigError(f"need 0 <= t1 <= t2 < {length}, got t1={t1}, t2={t2}")
    if channels is None:
        channels = (int(rng.integers(noise_spec.num_channels)),)
    channels = tuple(int(c) for c in channels)
    if any(not 0 <= c < noise_spec.num_channels for c in channels):
        raise ConfigError(f"treated channels {channels} outside [0, {noise_spec.num_channels})")

    x = sim.trajectory.copy()
    abs_t1 = sim.burn_in + t1
    values = tuple(float(noise_spec.sample_channel(rng, c, 1)[0]) for c in channels)
    x[abs_t1, list(channels)] = values
    _recurse(x, sim.noise, mechanisms, graph_n_lags, abs_t1 + 1)
    series = MultivariateSeries(
        values=x[sim.burn_in :].copy(),
        series_id=sim.series.series_id + ".do" if sim.series.series_id else "",
        graph_id=sim.series.graph_id,
    )
    record = InterventionRecord(
        series_id=sim.series.series_id, t1=t1, t2=t2, channels=channels, values=values
    )
    return series, record


def simulate_with_spikes(
    graph_n_lags: int,
    mechanisms: MechanismSet,
    noise_spec: GaussianMixtureNoiseSpec,
    length: int,
    spikes: list[tuple[int, int, float]],
    burn_in: int = 100,
    rng: np.random.Generator | None = None,
) -> tuple[SimulationResult, list[tuple[int, int]]]:
    """Simulate with additive exogenous spikes.

    ``spikes`` holds (t, channel, magnitude) triples; each adds
    magnitude * channel_std to the noise at step t of the trimmed series.
    Returns the result plus the (t, channel) ground-truth list.
    """
    if rng is None:
        raise ConfigError("simulate_with_spikes needs an rng")
    total = burn_in + length
    noise = noise_spec.sample(rng, total)
    truth = []
    for t, channel, magnitude in spikes:
        if not 0 <= t < length:
            raise ConfigError(f"spike time {t} outside [0, {length})")
        noise[burn_in + t, channel] += magnitude * noise_spec.channel_std(channel)
        truth.append((int(t), int(channel)))
    result = simulate(
        graph_n_lags, mechanisms, noise_spec, length, burn_in=burn_in, noise=noise
    )
    return result, truth
