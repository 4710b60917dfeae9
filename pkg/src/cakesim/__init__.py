"""Desk-scale simulator for adaptive KV-cache eviction.

Layer preferences come from attention statistics, budgets from exact
largest-remainder allocation, and cache contents from top-k eviction
with a protected recent window, run either as a layer-by-layer cascade
or as a one-shot pass.
"""

from ._kernels import backend_name
from .alloc import (
    BudgetSchedule,
    BudgetVector,
    allocate_final,
    allocate_stage,
    stage_budgets_exact,
    uniform_allocate,
    verify_prop1,
)
from .engine import (
    DecodeResult,
    MemoryLedger,
    PrefillResult,
    Strategy,
    decode_simulate,
    ledger_report,
    make_decode_source,
    prefill_cascade,
    prefill_oneshot,
    run_prop1_campaign,
    run_theorem2_campaign,
    verify_theorem2,
)
from .evict import (
    DEFAULT_GAMMA,
    DEFAULT_WINDOW,
    IDENTITY_POOL,
    Indicator,
    KvCacheLayer,
    PoolKind,
    PoolSpec,
    build_indicator,
    caches_equal,
    combine_head_indicators,
    evict,
    indicators_equal,
    pool_1d,
    top_k_positions,
)
from .stats import (
    HeadAggregate,
    LayerStats,
    PreferenceParams,
    StatSubmatrix,
    WindowAttention,
    aggregate_heads,
    layer_preference,
    layer_stats,
    spatial_dispersion,
    temporal_shift,
)
from .synth import Pattern, SyntheticSpec, layer_pattern, synth_generate
from .traceio import (
    AttentionTrace,
    Finding,
    TraceFormatError,
    TraceHeader,
    ValidationMode,
    load_trace,
    read_trace,
    save_trace,
    traces_equal,
    validate_trace,
    write_trace,
)

__version__ = "0.1.0"
