"""Prefill cascade, one-shot baseline, decode simulation, and accounting.

The cascade walks layers in order: after computing a layer's statistics
and indicator, it reallocates the total budget over all processed
layers and evicts each of them down to its stage budget.  Because stage
budgets never grow and eviction keeps a nested top-k set, the cascade
lands on exactly the caches one final eviction would produce.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from ._kernels import column_mean_var
from .alloc import BudgetSchedule, BudgetVector, allocate_final, allocate_stage, verify_prop1
from .evict import (
    DEFAULT_GAMMA,
    Indicator,
    KvCacheLayer,
    PoolSpec,
    build_indicator,
    caches_equal,
    combine_head_indicators,
    evict,
    pool_1d,
)
from .stats import HeadAggregate, LayerStats, PreferenceParams, layer_stats
from .traceio import AttentionTrace

PAYLOAD_DIM = 2

# row for (layer, position) is injective so keep-sets prove slot identity
def _payload_rows(layer: int, positions: np.ndarray, dim: int = PAYLOAD_DIM) -> tuple[np.ndarray, np.ndarray]:
    pos = np.asarray(positions, dtype=np.float64)
    cols = np.arange(1, dim + 1, dtype=np.float64)
    key = pos[:, None] * cols[None, :] + 0.5 * layer
    value = -key - 0.25
    return key, value


@dataclass(frozen=True)
class MemoryLedger:
    """Slot accounting: one (layer, head, token) KV pair is one slot."""

    per_stage_slots: tuple[int, ...]
    peak_slots: int
    naive_peak_slots: int


@dataclass(frozen=True, eq=False)
class PrefillResult:
    caches: tuple[KvCacheLayer, ...]
    final_budgets: BudgetVector
    schedule: BudgetSchedule
    stats: tuple[LayerStats, ...]
    ledger: MemoryLedger
    mode: str
    b_total: int
    seq_len: int
    window: int
    heads: int

    def __post_init__(self) -> None:
        for l, cache in enumerate(self.caches):
            want = min(self.seq_len, self.final_budgets[l])
            if cache.size != want:
                raise ValueError(f"layer {l} cache size {cache.size}, expected {want}")


@dataclass(frozen=True, eq=False)
class DecodeResult:
    steps: int
    per_step_sizes: np.ndarray  # [steps, L]
    outputs_positions: tuple[np.ndarray, ...]
    budgets: BudgetVector


# source(step, layer, positions) -> attention row over those slots
DecodeAttentionSource = Callable[[int, int, np.ndarray], np.ndarray]


def _full_layer_cache(
    trace: AttentionTrace, layer: int, gamma: float, pool: PoolSpec
) -> KvCacheLayer:
    wins = trace.layer_windows(layer)
    ind = combine_head_indicators([build_indicator(w, gamma, pool) for w in wins])
    positions = np.arange(trace.header.seq_len, dtype=np.int64)
    key, value = _payload_rows(layer, positions)
    return KvCacheLayer(positions, key, value, ind, budget=trace.header.seq_len)


def _check_prefill_args(trace: AttentionTrace, b_total: int) -> None:
    hdr = trace.header
    if hdr.seq_len <= hdr.window:
        raise ValueError("sequence must extend beyond the observation window")
    floor = hdr.num_layers * (hdr.window + 1)
    if b_total < floor:
        raise ValueError(f"total budget {b_total} is below the floor {floor}")


class Strategy(str, Enum):
    """Budget allocation rule: preference-guided or the uniform baseline."""

    CAKE = "cake"
    UNIFORM = "uniform"


def prefill_cascade(
    trace: AttentionTrace,
    b_total: int,
    params: PreferenceParams = PreferenceParams(),
    pool: PoolSpec = PoolSpec(),
    gamma: float = DEFAULT_GAMMA,
    head_mode: HeadAggregate = HeadAggregate.MEAN,
    strategy: Strategy = Strategy.CAKE,
) -> PrefillResult:
    """Preference-guided cascading cache management over all layers.

    Stage m: compute layer m's statistics and indicator, hold its cache
    in full, reallocate over layers 0..m, and evict each one to its
    stage budget.  Only min(B_total, (m+1)*S) is spendable at stage m;
    when the per-layer cap S binds, every processed layer sits exactly
    at S, so stage budgets still never grow.
    """
    _check_prefill_args(trace, b_total)
    hdr = trace.header
    s, s_w, heads = hdr.seq_len, hdr.window, hdr.num_heads
    min_budget = s_w + 1

    caches: list[KvCacheLayer] = []
    prefs: list[float] = []
    all_stats: list[LayerStats] = []
    stages: list[BudgetVector] = []
    per_stage: list[int] = []
    peak = 0
    prev: BudgetVector | None = None

    for m in range(hdr.num_layers):
        st = layer_stats(trace.layer_windows(m), params, head_mode)
        all_stats.append(st)
        prefs.append(st.preference)
        caches.append(_full_layer_cache(trace, m, gamma, pool))

        held = (sum(c.size for c in caches[:m]) + s) * heads
        peak = max(peak, held)

        spendable = min(b_total, (m + 1) * s)
        if strategy is Strategy.UNIFORM:
            vec = BudgetVector(tuple(_uniform_budgets(spendable, m + 1, min_budget)))
        else:
            vec = allocate_stage(
                prefs, spendable, prev=prev, caps=[s] * (m + 1), min_budget=min_budget
            )
        # order-independent: each eviction touches only its own layer
        for l in range(m + 1):
            caches[l] = evict(caches[l], vec[l])
        per_stage.append(sum(c.size for c in caches) * heads)
        stages.append(vec)
        prev = vec

    ledger = MemoryLedger(tuple(per_stage), peak, s * hdr.num_layers * heads)
    final = stages[-1]
    return PrefillResult(
        caches=tuple(caches),
        final_budgets=final,
        schedule=BudgetSchedule(tuple(stages)),
        stats=tuple(all_stats),
        ledger=ledger,
        mode="cascade",
        b_total=b_total,
        seq_len=s,
        window=s_w,
        heads=heads,
    )


def prefill_oneshot(
    trace: AttentionTrace,
    b_total: int,
    params: PreferenceParams = PreferenceParams(),
    pool: PoolSpec = PoolSpec(),
    gamma: float = DEFAULT_GAMMA,
    head_mode: HeadAggregate = HeadAggregate.MEAN,
    strategy: Strategy = Strategy.CAKE,
) -> PrefillResult:
    """Baseline: compute all preferences first, allocate once, evict once.

    All layers are held in full until the final allocation, so the peak
    is the naive S*L*heads.
    """
    _check_prefill_args(trace, b_total)
    hdr = trace.header
    s, s_w, heads = hdr.seq_len, hdr.window, hdr.num_heads

    all_stats = [
        layer_stats(trace.layer_windows(m), params, head_mode) for m in range(hdr.num_layers)
    ]
    prefs = [st.preference for st in all_stats]
    spendable = min(b_total, hdr.num_layers * s)
    if strategy is Strategy.UNIFORM:
        final = BudgetVector(tuple(_uniform_budgets(spendable, hdr.num_layers, s_w + 1)))
    else:
        final = allocate_final(prefs, spendable, caps=[s] * hdr.num_layers, min_budget=s_w + 1)

    caches = []
    per_stage = []
    for m in range(hdr.num_layers):
        caches.append(evict(_full_layer_cache(trace, m, gamma, pool), final[m]))
        evicted = sum(c.size for c in caches)
        per_stage.append((evicted + (hdr.num_layers - m - 1) * s) * heads)

    naive = s * hdr.num_layers * heads
    ledger = MemoryLedger(tuple(per_stage), naive, naive)
    # a constant schedule: every stage already shows the final budgets
    stages = tuple(BudgetVector(final.budgets[: m + 1]) for m in range(hdr.num_layers))
    return PrefillResult(
        caches=tuple(caches),
        final_budgets=final,
        schedule=BudgetSchedule(stages),
        stats=tuple(all_stats),
        ledger=ledger,
        mode="oneshot",
        b_total=b_total,
        seq_len=s,
        window=s_w,
        heads=heads,
    )


def _uniform_budgets(total: int, layers: int, min_budget: int) -> list[int]:
    if total < layers * min_budget:
        raise ValueError(f"total budget {total} is below the floor {layers} * {min_budget}")
    base, rem = divmod(total, layers)
    return [base + (1 if l < rem else 0) for l in range(layers)]


def ledger_report(result: PrefillResult) -> dict:
    """Peak-slot accounting relative to full prefill.

    Raises if the cascade bound peak <= (B_total + S) * heads is broken.
    """
    ledger = result.ledger
    bound = (result.b_total + result.seq_len) * result.heads
    if result.mode == "cascade" and ledger.peak_slots > bound:
        raise ValueError(f"peak {ledger.peak_slots} exceeds the bound {bound}")
    return {
        "naive_peak_slots": ledger.naive_peak_slots,
        "cascade_peak_slots": ledger.peak_slots,
        "ratio": ledger.peak_slots / ledger.naive_peak_slots,
        "per_stage_slots": list(ledger.per_stage_slots),
    }


def verify_theorem2(ind: Indicator, schedule: Sequence[int], payload_size: int = PAYLOAD_DIM) -> bool:
    """True iff folding evict over the schedule equals one final evict.

    The cache is built around the indicator with injective payload rows
    so any slot mix-up shows up as a payload mismatch.
    """
    if not schedule:
        raise ValueError("schedule must not be empty")
    for a, b in zip(schedule, schedule[1:]):
        if b > a:
            raise ValueError("schedule must be non-increasing")
    if schedule[-1] < ind.omega_count:
        raise ValueError("final budget cannot be below the protected window size")
    n = len(ind)
    positions = np.arange(n, dtype=np.int64)
    key, value = _payload_rows(0, positions, payload_size)
    cache = KvCacheLayer(positions, key, value, ind, budget=n)
    folded = cache
    for b in schedule:
        folded = evict(folded, b)
    return caches_equal(folded, evict(cache, schedule[-1]))


def run_theorem2_campaign(
    trials: int, max_size: int = 256, max_stages: int = 8, seed: int = 0
) -> int:
    """Randomized cascade-collapse trials; returns the failure count.

    Half the indicators draw scores from a coarse grid to force ties,
    which is where a non-total ordering would break the nesting.
    """
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(trials):
        n = int(rng.integers(2, max_size + 1))
        omega = int(rng.integers(0, n + 1))
        finite = n - omega
        if rng.random() < 0.5:
            scores = rng.integers(0, 4, finite) * 0.25
        else:
            scores = rng.random(finite)
        ind = Indicator(np.concatenate([scores, np.full(omega, np.inf)]), omega)
        stages = int(rng.integers(1, max_stages + 1))
        budgets = np.sort(rng.integers(omega, n + 1, stages))[::-1]
        if not verify_theorem2(ind, [int(b) for b in budgets]):
            failures += 1
    return failures


def run_prop1_campaign(trials: int, max_layers: int = 16, b_total: int = 1 << 16, seed: int = 0) -> int:
    """Randomized strict-decrease trials on exact rationals; returns failures."""
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(trials):
        layers = int(rng.integers(2, max_layers + 1))
        if rng.random() < 0.5:
            prefs = rng.random(layers)
        else:
            prefs = rng.integers(0, 8, layers).astype(np.float64)
        if not verify_prop1([float(p) for p in prefs], b_total):
            failures += 1
    return failures


def _validate_source_row(row: np.ndarray, count: int) -> np.ndarray:
    row = np.ascontiguousarray(row, dtype=np.float64)
    if row.ndim != 1 or row.shape[0] != count:
        raise ValueError(f"source row has {row.shape}, expected ({count},)")
    if not np.all(np.isfinite(row)) or np.any(row < 0.0):
        raise ValueError("source row must be finite and non-negative")
    if abs(float(row.sum()) - 1.0) > 1e-9:
        raise ValueError("source row must sum to 1")
    return row


def decode_simulate(
    pre: PrefillResult,
    source: DecodeAttentionSource,
    steps: int,
    gamma: float = DEFAULT_GAMMA,
    pool: PoolSpec = PoolSpec(),
) -> DecodeResult:
    """Decode with fixed per-layer budgets from the prefill result.

    Each step appends one slot per layer, folds the step's attention row
    into a rolling window of up to S_w most recent rows (older rows see
    zero mass on slots that postdate them), rebuilds the indicator from
    that window, and evicts whenever the cache exceeds its budget.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    s, s_w = pre.seq_len, pre.window
    num_layers = len(pre.caches)
    budgets = pre.final_budgets

    caches = list(pre.caches)
    windows: list[np.ndarray] = [np.zeros((0, c.size)) for c in caches]
    sizes = np.zeros((steps, num_layers), dtype=np.int64)

    for t in range(steps):
        for layer in range(num_layers):
            cache = caches[layer]
            new_pos = s + t
            positions = np.concatenate([cache.positions, [new_pos]])
            rows = np.hstack([windows[layer], np.zeros((windows[layer].shape[0], 1))])
            row = _validate_source_row(source(t, layer, positions), positions.shape[0])
            rows = np.vstack([rows, row])[-s_w:]

            n = positions.shape[0]
            omega = min(s_w, n)
            if n - omega > 0:
                mean, var = column_mean_var(rows[:, : n - omega])
                finite = pool_1d(mean + gamma * var, pool)
            else:
                finite = np.zeros(0)
            ind = Indicator(np.concatenate([finite, np.full(omega, np.inf)]), omega)

            new_key, new_value = _payload_rows(layer, np.array([new_pos]))
            cache = KvCacheLayer(
                positions,
                np.vstack([cache.key_payload, new_key]),
                np.vstack([cache.value_payload, new_value]),
                ind,
                budget=budgets[layer],
            )
            if cache.size > budgets[layer]:
                before = cache.positions
                cache = evict(cache, budgets[layer])
                keep = np.searchsorted(before, cache.positions)
                rows = rows[:, keep]
            caches[layer] = cache
            windows[layer] = rows
            sizes[t, layer] = cache.size

    return DecodeResult(
        steps=steps,
        per_step_sizes=sizes,
        outputs_positions=tuple(c.positions.copy() for c in caches),
        budgets=budgets,
    )


def make_decode_source(kind: str, seed: int = 0) -> DecodeAttentionSource:
    """Built-in synthetic decode sources: uniform, sink, shifting."""
    stride = 1 + seed % 97

    def uniform(step: int, layer: int, positions: np.ndarray) -> np.ndarray:
        n = positions.shape[0]
        return np.full(n, 1.0 / n)

    def sink(step: int, layer: int, positions: np.ndarray) -> np.ndarray:
        n = positions.shape[0]
        weights = np.ones(n)
        weights[0] = n * np.exp(4.0)
        band = min(4, n - 1)
        if band > 0:
            weights[n - band :] = n * np.exp(2.0) / band
        return weights / weights.sum()

    def shifting(step: int, layer: int, positions: np.ndarray) -> np.ndarray:
        n = positions.shape[0]
        weights = np.ones(n)
        weights[(step * stride + layer * 17) % n] = n * np.exp(4.0)
        return weights / weights.sum()

    table = {"uniform": uniform, "sink": sink, "shifting": shifting}
    if kind not in table:
        raise ValueError(f"unknown decode source kind: {kind!r}")
    return table[kind]
