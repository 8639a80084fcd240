"""Root-cause identification from estimated exogenous noise.

A reference stretch of normal operation calibrates per-component noise
statistics (responsibility-weighted moments under the learned mixture) and
per-channel detection thresholds. Online noise estimates then score each
channel by its distance to the nearest component; channels whose scores
breach their streaming threshold are ranked as root-cause candidates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import ConfigError, NumericError
from .model import CausalDiscoveryModel
from .spot import SpotDetector

MIN_REFERENCE_STEPS = 10
STD_FLOOR = 1e-4


@dataclass
class NoiseReference:
    """Per-component noise statistics calibrated on normal data.

    means / stds: (K, C) responsibility-weighted moments
    weights: (K,) average responsibilities
    """

    means: np.ndarray
    stds: np.ndarray
    weights: np.ndarray

    @property
    def num_components(self) -> int:
        return self.means.shape[0]

    @property
    def num_channels(self) -> int:
        return self.means.shape[1]


def estimate_noise_matrix(model: CausalDiscoveryModel, series: np.ndarray) -> np.ndarray:
    """Posterior-mean noise estimates (m, C) for one series (T, C).

    Row i estimates the noise at time i * stride + n of the input."""
    values = torch.as_tensor(np.asarray(series), dtype=torch.float32)
    if values.ndim != 2:
        raise ConfigError(f"series must be (time, channels), got {tuple(values.shape)}")
    return model.estimate_noise(values.unsqueeze(0))[0].numpy().astype(np.float64)


def fit_reference(
    model: CausalDiscoveryModel,
    series: np.ndarray,
    min_steps: int = MIN_REFERENCE_STEPS,
) -> NoiseReference:
    """Calibrate component moments from a normal reference series.

    Each window's noise estimate is softly assigned to the prior's
    components (responsibilities from the learned mixture densities and the
    series' routed weights); component means and standard deviations are
    the responsibility-weighted moments, with a floor keeping every scale
    usable for scoring."""
    values = torch.as_tensor(np.asarray(series), dtype=torch.float32)
    if values.ndim != 2:
        raise ConfigError(f"series must be (time, channels), got {tuple(values.shape)}")
    with torch.no_grad():
        was_training = model.training
        model.eval()
        try:
            out = model(values.unsqueeze(0))
        finally:
            model.train(was_training)
        z = out.post_mean[0]  # (m, C)
        if z.shape[0] < min_steps:
            raise NumericError(
                f"reference yields {z.shape[0]} noise estimates; need at least {min_steps}"
            )
        log_comp = model.prior.component_log_prob(z)  # (m, K)
        log_resp = log_comp + out.log_weights[0]
        resp = torch.softmax(log_resp, dim=-1).to(torch.float64)  # (m, K)
        z64 = z.to(torch.float64)
    r = resp.numpy()
    zn = z64.numpy()
    mass = r.sum(axis=0)  # (K,)
    safe_mass = np.maximum(mass, 1e-12)
    means = (r.T @ zn) / safe_mass[:, None]  # (K, C)
    sq = (r.T @ zn**2) / safe_mass[:, None] - means**2
    stds = np.sqrt(np.maximum(sq, 0.0))
    # components that captured nothing fall back to the global moments
    empty = mass < 1e-8
    if empty.any():
        means[empty] = zn.mean(axis=0)
        stds[empty] = zn.std(axis=0)
    stds = np.maximum(stds, STD_FLOOR)
    return NoiseReference(means=means, stds=stds, weights=mass / mass.sum())


def channel_scores(
    noise: np.ndarray, reference: NoiseReference, signed: bool = False
) -> np.ndarray:
    """Distance of each noise estimate to its nearest calibrated component.

    noise: (m, C) estimates; returns (m, C) scores. The default is the
    absolute standardized distance min_k |z - mu_k| / std_k; ``signed``
    keeps the sign of the deviation at that nearest component."""
    z = np.asarray(noise, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != reference.num_channels:
        raise ConfigError(
            f"noise must be (steps, {reference.num_channels}), got {tuple(z.shape)}"
        )
    norm = (z[:, None, :] - reference.means[None]) / reference.stds[None]  # (m, K, C)
    magnitude = np.abs(norm)
    if not signed:
        return magnitude.min(axis=1)
    k_star = magnitude.argmin(axis=1)  # (m, C)
    return np.take_along_axis(norm, k_star[:, None, :], axis=1)[:, 0, :]


@dataclass
class ChannelDetection:
    """Streaming detection outcome for one channel."""

    channel: int
    flagged_steps: list[int] = field(default_factory=list)
    max_excess: float = -np.inf
    final_threshold: float = np.nan


@dataclass
class RootCauseResult:
    """Channels ranked most-suspect first, with per-channel detail."""

    ranking: list[int]
    detections: list[ChannelDetection]

    def top(self, k: int) -> list[int]:
        return self.ranking[:k]


def rank_root_causes(
    reference_scores: np.ndarray,
    online_scores: np.ndarray,
    risk: float = 1e-4,
    q_init: float = 0.98,
) -> RootCauseResult:
    """Rank channels by how far their online scores break their thresholds.

    Each channel calibrates its own streaming detector on the reference
    scores, then consumes its online scores. Channels order by the largest
    margin above the threshold at flag time; channels never flagged trail
    behind, ordered by how close they came. Equal margins break toward the
    lower channel index."""
    ref = np.asarray(reference_scores, dtype=np.float64)
    online = np.asarray(online_scores, dtype=np.float64)
    if ref.ndim != 2 or online.ndim != 2 or ref.shape[1] != online.shape[1]:
        raise ConfigError(
            f"score matrices must share channels, got {ref.shape} and {online.shape}"
        )
    detections = []
    for c in range(ref.shape[1]):
        det = ChannelDetection(channel=c)
        detector = SpotDetector(ref[:, c], risk=risk, q_init=q_init)
        for t, score in enumerate(online[:, c]):
            excess = float(score) - detector.threshold
            if detector.update(float(score)):
                det.flagged_steps.append(t)
            det.max_excess = max(det.max_excess, excess)
        det.final_threshold = detector.threshold
        detections.append(det)
    ranking = sorted(
        range(len(detections)),
        key=lambda c: (-bool(detections[c].flagged_steps), -detections[c].max_excess, c),
    )
    return RootCauseResult(ranking=ranking, detections=detections)


def identify_root_causes(
    model: CausalDiscoveryModel,
    reference_series: np.ndarray,
    online_series: np.ndarray,
    risk: float = 1e-4,
    q_init: float = 0.98,
    signed: bool = False,
) -> RootCauseResult:
    """End-to-end root-cause ranking from raw (scaled) series."""
    reference = fit_reference(model, reference_series)
    ref_scores = channel_scores(
        estimate_noise_matrix(model, reference_series), reference, signed=signed
    )
    online = channel_scores(
        estimate_noise_matrix(model, online_series), reference, signed=signed
    )
    return rank_root_causes(ref_scores, online, risk=risk, q_init=q_init)
