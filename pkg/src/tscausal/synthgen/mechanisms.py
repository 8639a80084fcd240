"""Randomly initialized mechanisms for the lagged simulator.

Each active edge (k, j, i) owns a scalar-to-scalar function f applied to the
parent value, and each target channel i owns a scalar-to-scalar g applied to
the summed parent contributions. Both come in two flavours: small random
ReLU networks (the default) and plain linear maps (handy for hand-checkable
recursions).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..types import LaggedCausalGraph


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


@dataclass
class _MLPStack:
    """A stack of scalar->scalar ReLU networks evaluated in parallel.

    Arrays are stacked over the function index; a leading dimension of 1
    broadcasts one shared network over all inputs.
    """

    w1: np.ndarray  # (E, H)
    b1: np.ndarray  # (E, H)
    w2: np.ndarray  # (E, H, H)
    b2: np.ndarray  # (E, H)
    w3: np.ndarray  # (E, H)
    b3: np.ndarray  # (E,)

    def apply(self, u: np.ndarray) -> np.ndarray:
        h1 = _relu(u[:, None] * self.w1 + self.b1)
        if self.w2.shape[0] == 1:
            h2 = _relu(h1 @ self.w2[0].T + self.b2)
        else:
            h2 = _relu(np.einsum("ehg,eg->eh", self.w2, h1) + self.b2)
        return (h2 * self.w3).sum(axis=-1) + self.b3

    @classmethod
    def random(cls, count: int, hidden: int, out_gain: float, rng: np.random.Generator) -> "_MLPStack":
        # He-scaled hidden layers; the output layer sets the overall gain so
        # composed mechanisms stay roughly unit-scale and recursions bounded
        return cls(
            w1=rng.normal(0.0, np.sqrt(2.0), size=(count, hidden)),
            b1=rng.normal(0.0, 0.1, size=(count, hidden)),
            w2=rng.normal(0.0, np.sqrt(2.0 / hidden), size=(count, hidden, hidden)),
            b2=rng.normal(0.0, 0.1, size=(count, hidden)),
            w3=rng.normal(0.0, out_gain / np.sqrt(hidden), size=(count, hidden)),
            b3=np.zeros(count),
        )


@dataclass
class _LinearStack:
    coef: np.ndarray  # (E,)
    intercept: np.ndarray  # (E,)

    def apply(self, u: np.ndarray) -> np.ndarray:
        return u * self.coef + self.intercept


@dataclass
class MechanismSet:
    """Edge and target functions bound to one graph.

    ``edge_index`` lists the active edges in sorted (k, j, i) order;
    ``edge_f.apply`` consumes parent values in that order. ``target_g``
    stacks one function per channel. ``saturation`` smoothly bounds the
    parent aggregate (b * tanh(agg / b)) before the target function; random
    mechanisms need it so recursions cannot run away, while the linear
    variant leaves it off for exact hand-checkable recursions. At typical
    scales (|agg| a few units against the default bound 10) it is within a
    few percent of the identity.
    """

    edge_index: tuple[tuple[int, int, int], ...]
    edge_f: _MLPStack | _LinearStack
    target_g: _MLPStack | _LinearStack
    num_channels: int
    saturation: float | None = None

    def __post_init__(self) -> None:
        self._sources = np.array([(k, j) for k, j, _ in self.edge_index], dtype=np.int64).reshape(-1, 2)
        self._targets = np.array([i for _, _, i in self.edge_index], dtype=np.int64)

    @property
    def num_edges(self) -> int:
        return len(self.edge_index)

    def step(self, history: np.ndarray) -> np.ndarray:
        """One recursion step: history is the (n, C) lag block, oldest first;
        returns the noise-free next values g_i(sum of edge contributions)."""
        if self.num_edges:
            u = history[self._sources[:, 0], self._sources[:, 1]]
            contrib = self.edge_f.apply(u)
            agg = np.bincount(self._targets, weights=contrib, minlength=self.num_channels)
        else:
            agg = np.zeros(self.num_channels)
        if self.saturation is not None:
            agg = self.saturation * np.tanh(agg / self.saturation)
        return self.target_g.apply(agg)

    @classmethod
    def random(
        cls,
        graph: LaggedCausalGraph,
        rng: np.random.Generator,
        hidden: int = 64,
        shared: bool = False,
        edge_gain: float = 0.9,
        target_gain: float = 0.8,
    ) -> "MechanismSet":
        """Fresh random networks for every edge and target of ``graph``.

        Each edge network's output layer is scaled by 1/sqrt(in-degree of its
        target) so the summed parent contribution has in-degree-independent
        variance and recursions stay bounded. ``shared=True`` draws a single
        edge network reused by all edges (no per-target scaling possible).
        """
        if hidden < 1:
            raise ConfigError(f"hidden width must be >= 1, got {hidden}")
        index = tuple(sorted(zip(*(a.tolist() for a in np.nonzero(graph.edges)))))
        count = 1 if shared else max(len(index), 1)
        edge_f = _MLPStack.random(count, hidden, edge_gain, rng)
        if not shared and index:
            in_degree = graph.edges.sum(axis=(0, 1))
            scale = 1.0 / np.sqrt([max(in_degree[i], 1.0) for _, _, i in index])
            edge_f.w3 = edge_f.w3 * scale[:, None]
            edge_f.b3 = edge_f.b3 * scale
        return cls(
            edge_index=index,
            edge_f=edge_f,
            target_g=_MLPStack.random(graph.num_channels, hidden, target_gain, rng),
            num_channels=graph.num_channels,
            saturation=10.0,
        )

    @classmethod
    def linear(
        cls,
        graph: LaggedCausalGraph,
        coef: float | dict[tuple[int, int, int], float] = 1.0,
    ) -> "MechanismSet":
        """Linear edge functions (u -> coef*u) and identity targets."""
        index = tuple(sorted(zip(*(a.tolist() for a in np.nonzero(graph.edges)))))
        if isinstance(coef, dict):
            coefs = np.array([coef.get(e, 1.0) for e in index], dtype=np.float64)
        else:
            coefs = np.full(len(index), float(coef))
        return cls(
            edge_index=index,
            edge_f=_LinearStack(coef=coefs, intercept=np.zeros(len(index))),
            target_g=_LinearStack(
                coef=np.ones(graph.num_channels), intercept=np.zeros(graph.num_channels)
            ),
            num_channels=graph.num_channels,
        )
