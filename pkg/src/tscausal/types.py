"""Shared data containers.

Array layout conventions used everywhere:
  * a series is (T, C): time major, channels minor
  * a lagged graph is (n, C, C): entry [k, j, i] is the edge from channel j
    observed at time t-n+k to channel i at time t, so k=0 is the oldest lag
    and k=n-1 is lag one
  * a window of size n+1 flattens to (n+1)*C scalars, time major, so
    position k*C+j holds channel j at lag offset k and the last C positions
    hold the current step
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


def default_channel_names(num_channels: int) -> tuple[str, ...]:
    return tuple(f"ch{i}" for i in range(num_channels))


@dataclass
class MultivariateSeries:
    """A single multivariate time series with optional provenance tags."""

    values: np.ndarray
    channel_names: tuple[str, ...] = ()
    series_id: str = ""
    graph_id: str = ""

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError(f"series values must be 2-D (T, C), got shape {self.values.shape}")
        if not np.isfinite(self.values).all():
            t, c = np.argwhere(~np.isfinite(self.values))[0]
            raise DataError(f"series contains non-finite value at t={t}, channel={c}")
        if not self.channel_names:
            self.channel_names = default_channel_names(self.values.shape[1])
        if len(self.channel_names) != self.values.shape[1]:
            raise DataError(
                f"{len(self.channel_names)} channel names for {self.values.shape[1]} channels"
            )

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def num_channels(self) -> int:
        return self.values.shape[1]


@dataclass
class LaggedCausalGraph:
    """Lagged adjacency over channels.

    ``edges[k, j, i]`` is the weight of the edge from channel j at lag
    offset k (time t-n+k) into channel i at time t. Ground-truth graphs
    are binary; mixed or predicted graphs may hold values in [0, 1].
    """

    edges: np.ndarray
    graph_id: str = ""

    def __post_init__(self) -> None:
        self.edges = np.asarray(self.edges, dtype=np.float64)
        if self.edges.ndim != 3 or self.edges.shape[1] != self.edges.shape[2]:
            raise DataError(f"graph edges must be (n, C, C), got shape {self.edges.shape}")
        if not np.isfinite(self.edges).all():
            raise DataError("graph edges contain non-finite values")

    @property
    def n_lags(self) -> int:
        return self.edges.shape[0]

    @property
    def num_channels(self) -> int:
        return self.edges.shape[1]

    @property
    def num_edges(self) -> int:
        return int(np.count_nonzero(self.edges))

    @property
    def is_binary(self) -> bool:
        return bool(np.isin(self.edges, (0.0, 1.0)).all())

    def flatten_window(self) -> np.ndarray:
        """(n*C, C) view aligned with the flattened window layout: row k*C+j
        is the lag slot for channel j at offset k, column i the target channel."""
        n, c, _ = self.edges.shape
        return self.edges.reshape(n * c, c)

    def parents(self, channel: int) -> list[tuple[int, int]]:
        """(lag offset k, source channel j) pairs with an edge into ``channel``."""
        ks, js = np.nonzero(self.edges[:, :, channel])
        return list(zip(ks.tolist(), js.tolist()))


@dataclass
class InterventionRecord:
    """One hard intervention episode on a series.

    The value of each treated channel is replaced at ``t1`` and the
    recursion is propagated forward; ``[t1, t2]`` is the labelled extent.
    """

    series_id: str
    t1: int
    t2: int
    channels: tuple[int, ...]
    values: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.t1 < 0 or self.t2 < self.t1:
            raise DataError(f"intervention needs 0 <= t1 <= t2, got t1={self.t1}, t2={self.t2}")
        self.channels = tuple(int(c) for c in self.channels)
        self.values = tuple(float(v) for v in self.values)
        if self.values and len(self.values) != len(self.channels):
            raise DataError("one replacement value per treated channel required")
