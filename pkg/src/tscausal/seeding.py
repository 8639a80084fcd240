"""Deterministic seed derivation.

All randomness in a run flows from one top-level seed. Consumers never
share a stream: each named purpose ("data", "init", "mixup", "mc", ...)
gets its own child seed derived via SeedSequence, so adding a consumer
never shifts the draws of another.
"""

from __future__ import annotations

import zlib

import numpy as np

# fixed registry keeps child streams stable across versions
_STREAMS = ("data", "init", "mixup", "mc", "shuffle", "intervention", "eval")


def _stream_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def child_seed(seed: int, name: str) -> int:
    """Derive a 32-bit child seed for a named stream from the top-level seed."""
    ss = np.random.SeedSequence([int(seed), _stream_key(name)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def rng_for(seed: int, name: str) -> np.random.Generator:
    """NumPy generator for a named stream."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), _stream_key(name)]))


def series_rng(dataset_seed: int, graph_index: int, series_index: int) -> np.random.Generator:
    """Independent stream per simulated series, keyed by (dataset seed, graph, series).

    Parallel or out-of-order generation reproduces sequential output because
    no series shares a stream with another.
    """
    ss = np.random.SeedSequence([int(dataset_seed), int(graph_index), int(series_index)])
    return np.random.default_rng(ss)


def seed_streams(seed: int) -> dict[str, int]:
    """Expand a top-level seed into the named child seeds used by a run."""
    return {name: child_seed(seed, name) for name in _STREAMS}
