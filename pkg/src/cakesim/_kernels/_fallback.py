"""Pure-NumPy kernels, used when the compiled extension is unavailable.

These mirror the compiled kernels operation for operation.  Column
reductions accumulate row by row and pooling accumulates offset by
offset, in the same order as the C loops, so `column_mean_var` and
`pool1d` return bit-identical results on both backends.  That keeps
eviction keep-sets stable no matter which backend is active.
`row_entropy_sum` only guarantees agreement to ~1e-12 relative; it feeds
smooth scores, not tie-sensitive selections.
"""

from __future__ import annotations

import numpy as np


def row_entropy_sum(values: np.ndarray) -> float:
    """Sum of -x*ln(x) over all entries, with 0*ln(0) taken as 0."""
    values = np.asarray(values, dtype=np.float64)
    logs = np.zeros_like(values)
    np.log(values, where=values > 0.0, out=logs)
    return float(-np.sum(values * logs))


def column_mean_var(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column mean and population variance of a 2-D array.

    Two-pass, accumulating row by row; division is by the row count.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    rows, cols = values.shape
    if rows == 0:
        raise ValueError("column_mean_var requires at least one row")
    acc = np.zeros(cols, dtype=np.float64)
    for i in range(rows):
        acc += values[i]
    mean = acc / rows
    acc2 = np.zeros(cols, dtype=np.float64)
    for i in range(rows):
        diff = values[i] - mean
        acc2 += diff * diff
    return mean, acc2 / rows


def pool1d(scores: np.ndarray, kernel: int, use_max: bool) -> np.ndarray:
    """Sliding-window max or average pooling with truncated edge windows.

    Output length equals input length.  Windows are clipped at the array
    bounds and average windows divide by the true window length.
    """
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    n = scores.shape[0]
    if kernel < 1 or kernel % 2 == 0:
        raise ValueError("pool kernel must be a positive odd integer")
    if kernel == 1 or n == 0:
        return scores.copy()
    half = kernel // 2
    if use_max:
        padded = np.concatenate([np.full(half, -np.inf), scores, np.full(half, -np.inf)])
        windows = np.lib.stride_tricks.sliding_window_view(padded, kernel)
        return windows.max(axis=1)
    # offset-ascending accumulation matches the compiled per-window loop
    padded = np.concatenate([np.zeros(half), scores, np.zeros(half)])
    acc = np.zeros(n, dtype=np.float64)
    for off in range(kernel):
        acc = acc + padded[off : off + n]
    idx = np.arange(n)
    counts = np.minimum(idx + half, n - 1) - np.maximum(idx - half, 0) + 1
    return acc / counts


def topk_finite(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest scores, ties broken toward higher index.

    The selection order is total (score descending, then index
    descending), so the returned set is unique.  Indices come back
    sorted ascending.
    """
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    n = scores.shape[0]
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    if k >= n:
        return np.arange(n, dtype=np.int64)
    order = np.lexsort((np.arange(n), scores))  # score asc, index asc
    keep = order[::-1][:k]  # score desc, index desc on ties
    return np.sort(keep).astype(np.int64)
