"""Random lagged causal graph samplers."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..types import LaggedCausalGraph

TOPOLOGIES = ("er", "sf")


def sample_graph(
    num_channels: int,
    n_lags: int,
    topology: str,
    density: float,
    rng: np.random.Generator,
    graph_id: str = "",
) -> LaggedCausalGraph:
    """Draw a binary lagged graph.

    ``topology="er"``: every one of the n*C*C lagged edges is an independent
    Bernoulli(density) draw, lagged self-edges included.

    ``topology="sf"``: a preferential-attachment skeleton over channels with
    ``density`` edges per newly attached node (integer, 1 <= density < C),
    edges oriented from earlier-attached to later-attached node; each channel
    edge then receives one uniformly random lag in [1, n].
    """
    if num_channels < 1:
        raise ConfigError(f"num_channels must be >= 1, got {num_channels}")
    if n_lags < 1:
        raise ConfigError(f"n_lags must be >= 1, got {n_lags}")
    edges = np.zeros((n_lags, num_channels, num_channels), dtype=np.float64)
    if topology == "er":
        if not 0.0 <= density <= 1.0:
            raise ConfigError(f"er density must lie in [0, 1], got {density}")
        edges[rng.random(edges.shape) < density] = 1.0
    elif topology == "sf":
        attach = int(density)
        if attach != density or not 1 <= attach < num_channels:
            raise ConfigError(
                f"sf density is edges-per-node, integer in [1, {num_channels - 1}], got {density}"
            )
        import networkx as nx

        skeleton = nx.barabasi_albert_graph(
            num_channels, attach, seed=int(rng.integers(2**32))
        )
        for u, v in skeleton.edges():
            j, i = (u, v) if u < v else (v, u)
            lag = int(rng.integers(1, n_lags + 1))
            edges[n_lags - lag, j, i] = 1.0
    else:
        raise ConfigError(f"unknown topology {topology!r}, expected one of {TOPOLOGIES}")
    return LaggedCausalGraph(edges=edges, graph_id=graph_id)
