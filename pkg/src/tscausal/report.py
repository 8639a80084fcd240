"""Figure rendering for run reports.

Every command that writes tabular output also renders the matching figure
next to it, so a run directory reads as a self-contained report. All
functions save PNG files and return the path they wrote.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import ConfigError
from .metrics import auroc

_DPI = 120


def _finish(fig, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(out, dpi=_DPI)
    plt.close(fig)
    return out


def training_curves(history: list[dict], path: str | Path) -> Path:
    """Loss totals and per-term curves over epochs, train and validation."""
    if not history:
        raise ConfigError("history is empty; nothing to plot")
    epochs = [entry["epoch"] for entry in history]
    terms = [key for key in history[0]["train"] if key != "total"]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    axes[0].plot(epochs, [e["train"]["total"] for e in history], label="train")
    if all(e.get("val") for e in history):
        axes[0].plot(epochs, [e["val"]["total"] for e in history], label="validation")
    axes[0].set_xlabel("epoch")
    axes[0].set_ylabel("total loss")
    axes[0].legend()
    for term in terms:
        axes[1].plot(epochs, [e["train"][term] for e in history], label=term)
    axes[1].set_xlabel("epoch")
    axes[1].set_ylabel("term value")
    if terms:
        axes[1].legend()
    return _finish(fig, path)


def graph_heatmap(
    probs: np.ndarray,
    path: str | Path,
    target: np.ndarray | None = None,
    num_channels: int | None = None,
) -> Path:
    """Predicted link probabilities as a heatmap, true adjacency alongside
    when given. Horizontal rules separate the lag blocks."""
    probs = np.asarray(probs)
    if probs.ndim != 2:
        raise ConfigError(f"probability matrix must be 2-d, got {probs.shape}")
    panels = 1 if target is None else 2
    fig, axes = plt.subplots(1, panels, figsize=(4.2 * panels, 4.5), squeeze=False)
    mats = [("predicted", probs)] if target is None else [
        ("predicted", probs),
        ("true", np.asarray(target)),
    ]
    for ax, (title, mat) in zip(axes[0], mats):
        im = ax.imshow(mat, vmin=0.0, vmax=1.0, cmap="viridis", aspect="auto")
        ax.set_title(title)
        ax.set_xlabel("target channel")
        ax.set_ylabel("lagged source position")
        if num_channels:
            for row in range(num_channels, mat.shape[0], num_channels):
                ax.axhline(row - 0.5, color="white", linewidth=0.8)
        fig.colorbar(im, ax=ax, fraction=0.046)
    return _finish(fig, path)


def per_lag_auroc(probs: np.ndarray, target: np.ndarray, num_channels: int) -> dict[int, float]:
    """AUROC restricted to each lag's block of rows.

    Row block k holds sources at lag n - k, so the result maps lag (steps
    back in time) to its score. Blocks whose targets are single-class are
    skipped."""
    probs = np.asarray(probs)
    target = np.asarray(target)
    if probs.shape != target.shape:
        raise ConfigError(f"shape mismatch: {probs.shape} vs {target.shape}")
    if probs.shape[0] % num_channels != 0:
        raise ConfigError(
            f"{probs.shape[0]} rows do not split into blocks of {num_channels}"
        )
    n_lags = probs.shape[0] // num_channels
    out: dict[int, float] = {}
    for k in range(n_lags):
        block = slice(k * num_channels, (k + 1) * num_channels)
        t = target[block].ravel()
        if t.min() == t.max():
            continue
        out[n_lags - k] = auroc(probs[block].ravel(), t)
    return out


def lag_auroc_bars(lag_scores: dict[int, float], path: str | Path) -> Path:
    """Bar chart of graph recovery quality per lag."""
    if not lag_scores:
        raise ConfigError("no per-lag scores to plot")
    lags = sorted(lag_scores)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar([str(lag) for lag in lags], [lag_scores[lag] for lag in lags])
    ax.axhline(0.5, color="gray", linestyle="--", linewidth=0.8)
    ax.set_xlabel("lag (steps back)")
    ax.set_ylabel("AUROC")
    ax.set_ylim(0.0, 1.0)
    return _finish(fig, path)


def score_traces(
    scores: np.ndarray,
    path: str | Path,
    thresholds: np.ndarray | None = None,
    flagged: dict[int, list[int]] | None = None,
    channel_names: list[str] | None = None,
) -> Path:
    """Per-channel anomaly score traces with detection thresholds and flags."""
    scores = np.asarray(scores)
    if scores.ndim != 2:
        raise ConfigError(f"scores must be (steps, channels), got {scores.shape}")
    channels = scores.shape[1]
    names = channel_names or [f"x{c}" for c in range(channels)]
    fig, axes = plt.subplots(channels, 1, figsize=(8, 1.6 * channels), sharex=True, squeeze=False)
    for c in range(channels):
        ax = axes[c, 0]
        ax.plot(scores[:, c], linewidth=0.8)
        if thresholds is not None and np.isfinite(thresholds[c]):
            ax.axhline(thresholds[c], color="crimson", linestyle="--", linewidth=0.8)
        if flagged and flagged.get(c):
            steps = flagged[c]
            ax.scatter(steps, scores[steps, c], color="crimson", s=12, zorder=3)
        ax.set_ylabel(names[c])
    axes[-1, 0].set_xlabel("window")
    return _finish(fig, path)


def recall_bars(recalls: dict[int, float], path: str | Path) -> Path:
    """Recall at each cutoff as a bar chart."""
    if not recalls:
        raise ConfigError("no recall values to plot")
    ks = sorted(recalls)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar([f"@{k}" for k in ks], [recalls[k] for k in ks])
    ax.set_ylabel("recall")
    ax.set_ylim(0.0, 1.05)
    return _finish(fig, path)
