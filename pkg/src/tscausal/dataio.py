"""Loading and preprocessing of real-world series: CSV, scaling, downsampling."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError
from .types import MultivariateSeries


def load_csv(
    path: str | Path,
    timestamp_column: str | None = None,
    channel_columns: list[str] | None = None,
) -> MultivariateSeries:
    """Read a headered CSV into a series.

    If ``timestamp_column`` is given it must parse as ISO-8601; rows are
    sorted by it ascending (stable). Missing or non-numeric channel cells are
    rejected naming the first offending data row (0-based) and column.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    try:
        frame = pd.read_csv(path)
    except Exception as exc:
        raise DataError(f"could not parse {path}: {exc}") from exc
    if frame.empty:
        raise DataError(f"{path} holds no data rows")
    if timestamp_column is not None:
        if timestamp_column not in frame.columns:
            raise DataError(f"timestamp column {timestamp_column!r} not in header")
        try:
            stamps = pd.to_datetime(frame[timestamp_column], format="ISO8601")
        except Exception as exc:
            raise DataError(f"column {timestamp_column!r} is not ISO-8601: {exc}") from exc
        frame = frame.loc[stamps.sort_values(kind="stable").index]
    columns = channel_columns or [c for c in frame.columns if c != timestamp_column]
    if not columns:
        raise DataError(f"{path} has no channel columns")
    missing_cols = [c for c in columns if c not in frame.columns]
    if missing_cols:
        raise DataError(f"channel columns not in header: {missing_cols}")
    values = np.empty((len(frame), len(columns)), dtype=np.float64)
    for ci, col in enumerate(columns):
        cells = frame[col]
        na = cells.isna()
        if na.any():
            row = int(np.argmax(na.to_numpy()))
            raise DataError(f"missing value at data row {row}, column {col!r}")
        try:
            values[:, ci] = pd.to_numeric(cells, errors="raise").to_numpy(dtype=np.float64)
        except Exception as exc:
            raise DataError(f"non-numeric value in column {col!r}: {exc}") from exc
    return MultivariateSeries(values=values, channel_names=tuple(columns))


@dataclass
class ScalingParams:
    """Per-channel min/max fitted on training or known-normal data only."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self) -> None:
        self.mins = np.asarray(self.mins, dtype=np.float64)
        self.maxs = np.asarray(self.maxs, dtype=np.float64)
        if self.mins.shape != self.maxs.shape or self.mins.ndim != 1:
            raise DataError("mins and maxs must be matching 1-D arrays")
        if (self.maxs < self.mins).any():
            raise DataError("max below min in scaling params")

    def to_dict(self) -> dict:
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "ScalingParams":
        return cls(mins=np.asarray(payload["mins"]), maxs=np.asarray(payload["maxs"]))


def fit_scaler(values: np.ndarray) -> ScalingParams:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] < 1:
        raise DataError(f"need a non-empty (T, C) array, got shape {values.shape}")
    if not np.isfinite(values).all():
        raise DataError("cannot fit scaler on non-finite values")
    return ScalingParams(mins=values.min(axis=0), maxs=values.max(axis=0))


def apply_scaler(values: np.ndarray, params: ScalingParams) -> np.ndarray:
    """Map each channel through (x - min) / (max - min); channels that were
    constant during fitting map to all zeros."""
    values = np.asarray(values, dtype=np.float64)
    span = params.maxs - params.mins
    safe = np.where(span > 0, span, 1.0)
    out = (values - params.mins) / safe
    return np.where(span > 0, out, 0.0)


def downsample(values: np.ndarray, stride: int) -> np.ndarray:
    """Keep every stride-th row starting at row 0; output length ceil(T/stride)."""
    if stride < 1:
        raise DataError(f"downsample stride must be >= 1, got {stride}")
    return np.asarray(values)[::stride]
