"""Turn a stored dataset split into batched training tensors.

Each series is min-max scaled with parameters fit on its own clean values;
the intervened twin reuses those parameters so the two stay comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..dataio import apply_scaler, fit_scaler
from ..errors import DataError
from ..synthgen.dataset import DatasetSplit
from ..windows import label_windows, window_count


@dataclass
class TensorSplit:
    """A split as stacked tensors ready for batching.

    series: (S, T, C) scaled values
    graph_targets: (S, n*C, C) flattened adjacency, one copy per series
    twins: (S, T, C) intervened versions, or None when the split has none
    twin_labels: (S, m) per-window intervention labels, or None
    """

    series: torch.Tensor
    graph_targets: torch.Tensor
    series_ids: list[str]
    graph_ids: list[str]
    n_lags: int
    stride: int = 1
    twins: torch.Tensor | None = None
    twin_labels: torch.Tensor | None = None

    @property
    def size(self) -> int:
        return self.series.shape[0]

    @property
    def num_windows(self) -> int:
        return window_count(self.series.shape[1], self.n_lags, self.stride)

    def slice(self, idx: np.ndarray) -> dict[str, torch.Tensor | None]:
        """One batch: tensors indexed by position."""
        t = torch.as_tensor(idx, dtype=torch.long)
        return {
            "series": self.series[t],
            "graph": self.graph_targets[t],
            "twin": None if self.twins is None else self.twins[t],
            "labels": None if self.twin_labels is None else self.twin_labels[t],
        }


def prepare_split(
    split: DatasetSplit,
    n_lags: int,
    stride: int = 1,
    dtype: torch.dtype = torch.float32,
    require_twins: bool = False,
) -> TensorSplit:
    """Scale, label, and stack every series of a loaded split."""
    if split.num_series == 0:
        raise DataError(f"split {split.name!r} holds no series")
    shapes = {s.values.shape for s in split.series}
    if len(shapes) != 1:
        raise DataError(f"split {split.name!r} mixes series shapes {sorted(shapes)}")
    (length, _) = shapes.pop()
    has_twins = bool(split.intervened)
    if require_twins and not has_twins:
        raise DataError(f"split {split.name!r} has no intervened series")

    rows, targets, twin_rows, label_rows = [], [], [], []
    series_ids, graph_ids = [], []
    for s in split.series:
        graph = split.graphs.get(s.graph_id)
        if graph is None:
            raise DataError(f"series {s.series_id} references unknown graph {s.graph_id}")
        params = fit_scaler(s.values)
        rows.append(apply_scaler(s.values, params))
        targets.append(graph.flatten_window())
        series_ids.append(s.series_id)
        graph_ids.append(s.graph_id)
        if has_twins:
            if s.series_id not in split.intervened:
                raise DataError(f"series {s.series_id} has no intervened twin")
            twin_rows.append(apply_scaler(split.intervened[s.series_id], params))
            label_rows.append(
                label_windows(split.records[s.series_id], length, n_lags, stride)
            )

    out = TensorSplit(
        series=torch.as_tensor(np.stack(rows), dtype=dtype),
        graph_targets=torch.as_tensor(np.stack(targets), dtype=dtype),
        series_ids=series_ids,
        graph_ids=graph_ids,
        n_lags=n_lags,
        stride=stride,
    )
    if has_twins:
        out.twins = torch.as_tensor(np.stack(twin_rows), dtype=dtype)
        out.twin_labels = torch.as_tensor(np.stack(label_rows), dtype=dtype)
    return out


def batch_indices(
    size: int, batch_size: int, rng: np.random.Generator | None = None
) -> list[np.ndarray]:
    """Contiguous batches over a (possibly shuffled) permutation of rows."""
    if batch_size < 1:
        raise DataError(f"batch_size must be >= 1, got {batch_size}")
    order = np.arange(size)
    if rng is not None:
        rng.shuffle(order)
    return [order[start : start + batch_size] for start in range(0, size, batch_size)]


def subsample_windows(
    num_windows: int, max_windows: int | None, generator: torch.Generator | None = None
) -> torch.Tensor:
    """Sorted indices of the windows one step encodes; all of them when the
    cap is off or not binding."""
    if max_windows is None or max_windows >= num_windows:
        return torch.arange(num_windows)
    pick = torch.randperm(num_windows, generator=generator)[:max_windows]
    return pick.sort().values
