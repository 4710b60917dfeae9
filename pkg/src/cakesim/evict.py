"""Eviction indicator and the top-k EVICT operation on a layer cache.

Slot scores combine sustained importance (column mean) with attention
variability (column variance); the most recent window positions are
protected outright.  Eviction keeps the best-scoring slots under a
strict total order, so repeated eviction with shrinking budgets always
collapses to a single eviction with the final budget.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np

from . import _kernels
from .stats import WindowAttention

DEFAULT_GAMMA = 200.0
DEFAULT_WINDOW = 32


class PoolKind(str, Enum):
    MAX = "max"
    AVG = "avg"


@dataclass(frozen=True)
class PoolSpec:
    """1-D pooling config: stride 1, truncated same-length windows.

    kernel=1 disables pooling.
    """

    kind: PoolKind = PoolKind.MAX
    kernel: int = 7

    def __post_init__(self) -> None:
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError("pool kernel must be a positive odd integer")


IDENTITY_POOL = PoolSpec(PoolKind.MAX, 1)


@dataclass(frozen=True, eq=False)
class Indicator:
    """Per-slot eviction scores for one layer.

    The trailing `omega_count` slots (the most recent positions, i.e.
    the protected window) rank above every finite score by construction,
    not by float magnitude; their `scores` entries are +inf placeholders
    and are never compared against finite scores.
    """

    scores: np.ndarray
    omega_count: int

    def __post_init__(self) -> None:
        scores = np.ascontiguousarray(self.scores, dtype=np.float64)
        object.__setattr__(self, "scores", scores)
        if scores.ndim != 1:
            raise ValueError("indicator scores must be 1-D")
        n = scores.shape[0]
        if not 0 <= self.omega_count <= n:
            raise ValueError("omega count out of range")
        finite = scores[: n - self.omega_count]
        if finite.size and not np.all(np.isfinite(finite)):
            raise ValueError("non-protected scores must be finite")
        if finite.size and np.any(finite < 0.0):
            raise ValueError("non-protected scores must be non-negative")

    def __len__(self) -> int:
        return int(self.scores.shape[0])

    @property
    def finite_scores(self) -> np.ndarray:
        return self.scores[: len(self) - self.omega_count]


def indicators_equal(a: Indicator, b: Indicator) -> bool:
    return a.omega_count == b.omega_count and np.array_equal(a.scores, b.scores)


@dataclass(frozen=True, eq=False)
class KvCacheLayer:
    """One layer's retained slots: positions, payload rows, indicator.

    The payload matrices stand in for the K/V tensors; their rows travel
    with their positions so tests can prove slot identity through
    eviction.
    """

    positions: np.ndarray
    key_payload: np.ndarray
    value_payload: np.ndarray
    indicator: Indicator
    budget: int

    def __post_init__(self) -> None:
        pos = np.ascontiguousarray(self.positions, dtype=np.int64)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "key_payload", np.ascontiguousarray(self.key_payload, dtype=np.float64))
        object.__setattr__(self, "value_payload", np.ascontiguousarray(self.value_payload, dtype=np.float64))
        n = pos.shape[0]
        if pos.ndim != 1:
            raise ValueError("positions must be 1-D")
        if n > 1 and not np.all(np.diff(pos) > 0):
            raise ValueError("positions must be strictly increasing")
        if self.key_payload.shape[0] != n or self.value_payload.shape[0] != n:
            raise ValueError("payload row count must match the position count")
        if len(self.indicator) != n:
            raise ValueError("indicator length must match the position count")
        if self.budget < 0:
            raise ValueError("budget must be non-negative")

    @property
    def size(self) -> int:
        return int(self.positions.shape[0])


def caches_equal(a: KvCacheLayer, b: KvCacheLayer) -> bool:
    """Structural equality: positions, payload rows, and indicator."""
    return (
        np.array_equal(a.positions, b.positions)
        and np.array_equal(a.key_payload, b.key_payload)
        and np.array_equal(a.value_payload, b.value_payload)
        and indicators_equal(a.indicator, b.indicator)
    )


def pool_1d(scores: Sequence[float] | np.ndarray, spec: PoolSpec) -> np.ndarray:
    """Same-length 1-D pooling with truncated edge windows."""
    arr = np.ascontiguousarray(scores, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("pooling input must be 1-D")
    return np.asarray(_kernels.pool1d(arr, spec.kernel, spec.kind is PoolKind.MAX))


def build_indicator(
    win: WindowAttention,
    gamma: float = DEFAULT_GAMMA,
    pool: PoolSpec = IDENTITY_POOL,
) -> Indicator:
    """Indicator for one head over the full sequence of slots.

    Pre-window slots score Mean + gamma*Var of their attention column
    over the window rows, then pooling smooths those scores.  In-window
    slots are protected.
    """
    if gamma < 0.0:
        raise ValueError("gamma must be non-negative")
    keep = win.seq_len - win.window
    mean, var = _kernels.column_mean_var(win.values[:, :keep])
    finite = pool_1d(mean + gamma * var, pool)
    scores = np.concatenate([finite, np.full(win.window, np.inf)])
    return Indicator(scores, omega_count=win.window)


def combine_head_indicators(indicators: Sequence[Indicator]) -> Indicator:
    """Arithmetic mean of per-head indicators into one layer indicator.

    All heads share the keep-set granularity: one indicator per layer.
    """
    if not indicators:
        raise ValueError("at least one head indicator is required")
    first = indicators[0]
    for ind in indicators[1:]:
        if len(ind) != len(first) or ind.omega_count != first.omega_count:
            raise ValueError("head indicators must agree in length and protection")
    if len(indicators) == 1:
        return Indicator(first.scores.copy(), first.omega_count)
    stacked = np.stack([ind.finite_scores for ind in indicators])
    mean = stacked.mean(axis=0)
    scores = np.concatenate([mean, np.full(first.omega_count, np.inf)])
    return Indicator(scores, first.omega_count)


def top_k_positions(ind: Indicator, k: int) -> np.ndarray:
    """Slot indices of the k best-scoring slots, sorted ascending.

    Protected slots are always included; finite slots compete under
    score descending with ties broken toward the higher (more recent)
    slot index.
    """
    n = len(ind)
    if k < ind.omega_count:
        raise ValueError(f"k={k} cannot cover the {ind.omega_count} protected slots")
    if k > n:
        raise ValueError(f"k={k} exceeds the slot count {n}")
    finite_keep = np.asarray(_kernels.topk_finite(ind.finite_scores, k - ind.omega_count))
    protected = np.arange(n - ind.omega_count, n, dtype=np.int64)
    return np.concatenate([finite_keep, protected])


def evict(cache: KvCacheLayer, budget: int) -> KvCacheLayer:
    """Keep the top-`budget` slots of a layer cache.

    Under-budget caches come back unchanged.  Otherwise positions,
    payload rows, and indicator entries are filtered in lockstep and the
    result has exactly `budget` slots.
    """
    if budget < cache.indicator.omega_count:
        raise ValueError("budget cannot be below the protected window size")
    if cache.size <= budget:
        return replace(cache, budget=budget)
    keep = top_k_positions(cache.indicator, budget)
    ind = Indicator(cache.indicator.scores[keep], cache.indicator.omega_count)
    return KvCacheLayer(
        positions=cache.positions[keep],
        key_payload=cache.key_payload[keep],
        value_payload=cache.value_payload[keep],
        indicator=ind,
        budget=budget,
    )
