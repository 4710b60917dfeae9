"""Attention-window statistics.

A layer's recent attention window is summarized by two numbers: spatial
dispersion (how broadly queries spread attention over past positions)
and temporal shift (how much the attended positions move between
queries).  Their temperature-weighted product is the layer preference
used to split the cache budget across layers.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from . import _kernels


class HeadAggregate(str, Enum):
    """How per-head statistics combine into one per-layer value."""

    MEAN = "mean"
    MAX = "max"


@dataclass(frozen=True)
class PreferenceParams:
    """Temperatures for the preference score P = H**(1/tau1) * V**(1/tau2).

    Both default to 1.0 (plain product).  Useful ranges are roughly
    tau1 in [0.2, 2] and tau2 in [0.4, 3].
    """

    tau1: float = 1.0
    tau2: float = 1.0

    def __post_init__(self) -> None:
        if not (self.tau1 > 0.0 and self.tau2 > 0.0):
            raise ValueError("temperatures must be positive")


@dataclass(frozen=True)
class LayerStats:
    """Aggregated per-layer statistics."""

    dispersion: float
    shift: float
    preference: float


class WindowAttention:
    """The last `window` query rows of one layer/head causal attention map.

    Shape [window, seq_len]; row i holds the distribution of query
    position seq_len - window + i over all key positions.

    Invariants checked at construction: entries are finite and
    non-negative, each row sums to 1 within `row_sum_tol`, and rows put
    zero mass on future positions.
    """

    __slots__ = ("values",)

    def __init__(self, values: np.ndarray, row_sum_tol: float = 1e-3) -> None:
        arr = np.ascontiguousarray(values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("window attention must be a 2-D array")
        window, seq_len = arr.shape
        if window < 1 or window > seq_len:
            raise ValueError(f"need 1 <= window <= seq_len, got [{window}, {seq_len}]")
        if not np.all(np.isfinite(arr)):
            raise ValueError("window attention contains non-finite entries")
        if np.any(arr < 0.0):
            raise ValueError("window attention contains negative entries")
        sums = arr.sum(axis=1)
        worst = float(np.max(np.abs(sums - 1.0)))
        if worst > row_sum_tol:
            raise ValueError(f"row sums deviate from 1 by {worst:.3e} (tol {row_sum_tol:.0e})")
        future = np.triu(np.ones((window, seq_len), dtype=bool), k=seq_len - window + 1)
        if np.any(arr[future] != 0.0):
            raise ValueError("window attention puts mass on future positions")
        self.values = arr

    @property
    def window(self) -> int:
        return self.values.shape[0]

    @property
    def seq_len(self) -> int:
        return self.values.shape[1]


class StatSubmatrix:
    """The window rows restricted to pre-window key positions.

    This is the region statistics are computed on: recent queries
    attending to older positions.  Entries are non-negative but rows do
    not sum to 1 (the in-window mass is cut off).
    """

    __slots__ = ("values",)

    def __init__(self, values: np.ndarray) -> None:
        arr = np.ascontiguousarray(values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("statistics submatrix must be 2-D and non-empty")
        if not np.all(np.isfinite(arr)):
            raise ValueError("statistics submatrix contains non-finite entries")
        if np.any(arr < 0.0):
            raise ValueError("statistics submatrix contains negative entries")
        self.values = arr

    @classmethod
    def from_window(cls, win: WindowAttention) -> "StatSubmatrix":
        keep = win.seq_len - win.window
        if keep < 1:
            raise ValueError("window covers the whole sequence; no pre-window region")
        return cls(win.values[:, :keep])


def spatial_dispersion(sub: StatSubmatrix) -> float:
    """Entropy-style dispersion: sum over all entries of -x*ln(x).

    0*ln(0) counts as 0, so one-hot rows contribute nothing and the
    value is additive over rows.
    """
    return float(_kernels.row_entropy_sum(sub.values))


def temporal_shift(sub: StatSubmatrix) -> float:
    """Sum over key positions of the population variance down each column.

    Zero exactly when every column is constant across the window rows.
    """
    _, var = _kernels.column_mean_var(sub.values)
    return float(np.add.reduce(var))


def layer_preference(dispersion: float, shift: float, params: PreferenceParams) -> float:
    """Preference score H**(1/tau1) * V**(1/tau2)."""
    if dispersion < 0.0 or shift < 0.0:
        raise ValueError("dispersion and shift must be non-negative")
    return float(dispersion ** (1.0 / params.tau1) * shift ** (1.0 / params.tau2))


def aggregate_heads(
    pairs: Sequence[tuple[float, float]], mode: HeadAggregate = HeadAggregate.MEAN
) -> tuple[float, float]:
    """Combine per-head (dispersion, shift) pairs into per-layer values."""
    if not pairs:
        raise ValueError("at least one head is required")
    disp = np.array([p[0] for p in pairs], dtype=np.float64)
    shift = np.array([p[1] for p in pairs], dtype=np.float64)
    if mode is HeadAggregate.MEAN:
        return float(disp.mean()), float(shift.mean())
    if mode is HeadAggregate.MAX:
        return float(disp.max()), float(shift.max())
    raise ValueError(f"unknown aggregation mode: {mode!r}")


def layer_stats(
    windows: Iterable[WindowAttention],
    params: PreferenceParams = PreferenceParams(),
    mode: HeadAggregate = HeadAggregate.MEAN,
) -> LayerStats:
    """Per-layer statistics from that layer's per-head attention windows.

    Heads are aggregated before the preference is formed, so the
    temperatures act on the layer-level dispersion and shift.
    """
    pairs = []
    for win in windows:
        sub = StatSubmatrix.from_window(win)
        pairs.append((spatial_dispersion(sub), temporal_shift(sub)))
    disp, shift = aggregate_heads(pairs, mode)
    return LayerStats(disp, shift, layer_preference(disp, shift, params))
