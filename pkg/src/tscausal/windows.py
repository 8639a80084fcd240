"""Sliding-window geometry.

Window i covers time steps [i*stride, i*stride + n] inclusive: n lag steps
plus the current step. Flattened it is (n+1)*C scalars, time major.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError
from .types import InterventionRecord


def window_count(length: int, n_lags: int, stride: int = 1) -> int:
    """Number of windows m = floor((T - (n+1)) / stride) + 1."""
    size = n_lags + 1
    if length < size:
        raise DataError(f"series of length {length} too short for window size {size}")
    if stride < 1:
        raise DataError(f"stride must be >= 1, got {stride}")
    return (length - size) // stride + 1


def window_starts(length: int, n_lags: int, stride: int = 1) -> np.ndarray:
    m = window_count(length, n_lags, stride)
    return np.arange(m) * stride


def segment_windows(values, n_lags: int, stride: int = 1):
    """Slice a series into flattened overlapping windows.

    Accepts (T, C) or batched (..., T, C) arrays, NumPy or torch, and
    returns (..., m, (n+1)*C) of the same kind. Position k*C+j of a window
    holds channel j at lag offset k; the last C positions are the current
    step.
    """
    length, channels = values.shape[-2], values.shape[-1]
    size = n_lags + 1
    m = window_count(length, n_lags, stride)
    idx = np.arange(m)[:, None] * stride + np.arange(size)[None, :]
    if isinstance(values, np.ndarray):
        out = values[..., idx, :]
        return out.reshape(*values.shape[:-2], m, size * channels)
    import torch

    out = values[..., torch.as_tensor(idx, device=values.device), :]
    return out.reshape(*values.shape[:-2], m, size * channels)


def split_window(windows, num_channels: int):
    """Split flattened windows into (lag part, current step): (..., n*C) and (..., C)."""
    return windows[..., :-num_channels], windows[..., -num_channels:]


def label_windows(record: InterventionRecord, length: int, n_lags: int, stride: int = 1) -> np.ndarray:
    """Binary per-window labels: 1 iff the window's span intersects [t1, t2].

    Window i spans [i*stride, i*stride + n] inclusive.
    """
    if record.t2 >= length:
        raise DataError(f"intervention end t2={record.t2} outside series of length {length}")
    starts = window_starts(length, n_lags, stride)
    ends = starts + n_lags
    labels = (starts <= record.t2) & (ends >= record.t1)
    return labels.astype(np.int8)
