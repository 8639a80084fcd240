"""Window geometry: counts, layout, labels."""

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from tscausal.errors import DataError
from tscausal.types import InterventionRecord
from tscausal.windows import (
    label_windows,
    segment_windows,
    split_window,
    window_count,
    window_starts,
)


class TestWindowCount:
    def test_stride_one(self):
        assert window_count(10, 2, 1) == 8

    def test_stride_two(self):
        assert window_count(10, 2, 2) == 4

    def test_exact_fit(self):
        assert window_count(4, 3, 1) == 1

    def test_too_short_rejected(self):
        with pytest.raises(DataError, match="too short"):
            window_count(3, 3, 1)

    def test_bad_stride_rejected(self):
        with pytest.raises(DataError, match="stride"):
            window_count(10, 2, 0)

    @given(
        length=st.integers(4, 200),
        n_lags=st.integers(1, 6),
        stride=st.integers(1, 5),
    )
    @settings(max_examples=60, deadline=None)
    def test_formula_matches_span_enumeration(self, length, n_lags, stride):
        if length < n_lags + 1:
            return
        m = window_count(length, n_lags, stride)
        starts = window_starts(length, n_lags, stride)
        assert len(starts) == m
        assert starts[-1] + n_lags <= length - 1
        # one more window would overflow
        assert starts[-1] + stride + n_lags > length - 1


class TestSegmentWindows:
    def test_layout_time_major_oldest_first(self):
        # encode value = 10*t + c so positions are auditable
        T, C, n = 6, 3, 2
        values = np.array([[10 * t + c for c in range(C)] for t in range(T)], dtype=float)
        windows = segment_windows(values, n)
        assert windows.shape == (T - n, (n + 1) * C)
        # window i, position k*C+j must hold channel j at time i+k
        for i in range(T - n):
            for k in range(n + 1):
                for j in range(C):
                    assert windows[i, k * C + j] == 10 * (i + k) + j

    def test_current_step_is_last_block(self):
        values = np.arange(12, dtype=float).reshape(6, 2)
        windows = segment_windows(values, 2)
        lag, current = split_window(windows, 2)
        assert lag.shape == (4, 4) and current.shape == (4, 2)
        np.testing.assert_array_equal(current, values[2:])

    def test_reconstruction_at_stride_one_is_exact(self):
        rng = np.random.default_rng(0)
        values = rng.normal(size=(40, 4))
        n = 3
        windows = segment_windows(values, n)
        rebuilt = np.empty_like(values)
        first = windows[0].reshape(n + 1, 4)
        rebuilt[: n + 1] = first
        for i in range(1, windows.shape[0]):
            rebuilt[i + n] = windows[i].reshape(n + 1, 4)[-1]
        np.testing.assert_array_equal(rebuilt, values)

    def test_batched_input(self):
        rng = np.random.default_rng(1)
        values = rng.normal(size=(5, 20, 3))
        windows = segment_windows(values, 2)
        assert windows.shape == (5, 18, 9)
        np.testing.assert_array_equal(windows[2], segment_windows(values[2], 2))

    def test_torch_matches_numpy(self):
        rng = np.random.default_rng(2)
        values = rng.normal(size=(15, 3))
        got = segment_windows(torch.as_tensor(values), 2, stride=2)
        want = segment_windows(values, 2, stride=2)
        np.testing.assert_array_equal(got.numpy(), want)


class TestLabelWindows:
    def test_point_intervention_at_zero(self):
        record = InterventionRecord(series_id="s", t1=0, t2=0, channels=(0,))
        labels = label_windows(record, length=10, n_lags=2)
        np.testing.assert_array_equal(labels, [1, 0, 0, 0, 0, 0, 0, 0])

    def test_matches_brute_force_for_all_extents(self):
        T, n = 20, 3
        starts = window_starts(T, n)
        for t1 in range(T):
            for t2 in range(t1, T):
                record = InterventionRecord(series_id="s", t1=t1, t2=t2, channels=(0,))
                got = label_windows(record, T, n)
                want = np.array(
                    [
                        1 if set(range(s, s + n + 1)) & set(range(t1, t2 + 1)) else 0
                        for s in starts
                    ],
                    dtype=np.int8,
                )
                np.testing.assert_array_equal(got, want, err_msg=f"t1={t1} t2={t2}")

    def test_stride_respected(self):
        record = InterventionRecord(series_id="s", t1=4, t2=4, channels=(1,))
        labels = label_windows(record, length=12, n_lags=1, stride=3)
        # windows span [0,1], [3,4], [6,7], [9,10]
        np.testing.assert_array_equal(labels, [0, 1, 0, 0])

    def test_extent_outside_series_rejected(self):
        record = InterventionRecord(series_id="s", t1=5, t2=11, channels=(0,))
        with pytest.raises(DataError, match="outside"):
            label_windows(record, length=10, n_lags=2)

    def test_reversed_extent_rejected_at_record(self):
        with pytest.raises(DataError, match="t1"):
            InterventionRecord(series_id="s", t1=5, t2=4, channels=(0,))
