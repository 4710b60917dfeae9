"""Synthetic causal-attention trace generation.

Patterns cover the regimes that drive budget allocation apart: broadly
dispersed attention, a static hotspot, a hotspot that moves across
queries, and sink-style mass on the first token.  Rows are exact
distributions: probabilities are quantized to multiples of 2**-24 that
sum to exactly one, so every entry survives the float32 payload
round-trip bit-for-bit and file-level strict validation holds.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .traceio import AttentionTrace, TraceHeader

_QUANT = 1 << 24  # probabilities become n/2**24 with n summing to 2**24


class Pattern(str, Enum):
    DISPERSED = "dispersed"
    FOCUSED_STATIC = "focused_static"
    SHIFTING = "shifting"
    SINK = "sink"
    MIXED = "mixed"


# round-robin assignment for the mixed pattern
_MIXED_CYCLE = (Pattern.DISPERSED, Pattern.FOCUSED_STATIC, Pattern.SHIFTING, Pattern.SINK)


@dataclass(frozen=True)
class SyntheticSpec:
    pattern: Pattern
    num_layers: int
    num_heads: int
    seq_len: int
    window: int
    seed: int
    sharpness: float = 4.0

    def __post_init__(self) -> None:
        if min(self.num_layers, self.num_heads, self.seq_len, self.window) < 1:
            raise ValueError("layer, head, sequence, and window counts must be >= 1")
        if self.window > self.seq_len:
            raise ValueError("window must not exceed the sequence length")
        if not self.sharpness > 0.0:
            raise ValueError("sharpness must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def _quantize_row(p: np.ndarray) -> np.ndarray:
    """Round a probability vector onto the 2**-24 grid, conserving mass.

    Floor to grid units, then hand the leftover units to the largest
    remainders (ties toward the lower index).  Every output entry is
    exactly representable in float32 and the float64 sum is exactly 1.
    """
    units = p * _QUANT
    base = np.floor(units).astype(np.int64)
    leftover = _QUANT - int(base.sum())
    if leftover < 0 or leftover > p.size:
        raise AssertionError("row quantization leftover out of range")
    if leftover > 0:
        rem = units - base
        order = np.lexsort((np.arange(p.size), -rem))
        base[order[:leftover]] += 1
    return base.astype(np.float64) / _QUANT


def _hot_column_row(horizon: int, hot: int, sharpness: float) -> np.ndarray:
    """Distribution with one hotspot whose share is horizon-independent.

    The hotspot's log-weight is sharpness + ln(horizon), so its share
    approaches 1/(1 + e**-sharpness) regardless of scale and becomes an
    exact one-hot as sharpness grows.
    """
    other = np.exp(-sharpness) / horizon
    denom = 1.0 + (horizon - 1) * other
    row = np.full(horizon, other / denom)
    row[hot] = 1.0 / denom
    return row


def _block_rows(
    pattern: Pattern, spec: SyntheticSpec, rng: np.random.Generator
) -> np.ndarray:
    s_w, s = spec.window, spec.seq_len
    ctx = s - s_w  # columns before the window region
    out = np.zeros((s_w, s), dtype=np.float64)

    if pattern is Pattern.DISPERSED:
        noise = rng.standard_normal((s_w, max(ctx, 1)))
        window_mass = 0.01
        for i in range(s_w):
            horizon = ctx + i + 1
            if ctx == 0:
                row = np.full(horizon, 1.0 / horizon)
            else:
                logits = 0.05 * spec.sharpness * noise[i]
                ctx_part = np.exp(logits - logits.max())
                ctx_part *= (1.0 - window_mass) / ctx_part.sum()
                row = np.concatenate([ctx_part, np.full(i + 1, window_mass / (i + 1))])
            out[i, :horizon] = _quantize_row(row)
        return out

    if pattern in (Pattern.FOCUSED_STATIC, Pattern.SHIFTING):
        hot0 = int(rng.integers(0, ctx)) if ctx > 0 else 0
        stride = max(1, ctx // s_w) if ctx > 0 else 0
        for i in range(s_w):
            horizon = ctx + i + 1
            if pattern is Pattern.SHIFTING and ctx > 0:
                hot = (hot0 + i * stride) % ctx
            else:
                hot = hot0
            out[i, :horizon] = _quantize_row(_hot_column_row(horizon, hot, spec.sharpness))
        return out

    if pattern is Pattern.SINK:
        strength = min(spec.sharpness, 700.0)  # exp stays finite
        for i in range(s_w):
            horizon = ctx + i + 1
            weights = np.ones(horizon)
            weights[0] = horizon * np.exp(strength)
            band = min(4, horizon - 1)
            if band > 0:
                weights[horizon - band : horizon] = horizon * np.exp(strength / 2.0) / band
            out[i, :horizon] = _quantize_row(weights / weights.sum())
        return out

    raise ValueError(f"unexpected pattern: {pattern!r}")


def layer_pattern(spec: SyntheticSpec, layer: int) -> Pattern:
    """Concrete pattern generated for a layer (resolves mixed)."""
    if spec.pattern is Pattern.MIXED:
        return _MIXED_CYCLE[layer % len(_MIXED_CYCLE)]
    return spec.pattern


def synth_generate(spec: SyntheticSpec) -> AttentionTrace:
    """Deterministic synthetic trace for a spec; same spec, same bytes."""
    data = np.zeros(
        (spec.num_layers, spec.num_heads, spec.window, spec.seq_len), dtype=np.float64
    )
    for layer in range(spec.num_layers):
        pattern = layer_pattern(spec, layer)
        for head in range(spec.num_heads):
            rng = np.random.default_rng([spec.seed, layer, head])
            data[layer, head] = _block_rows(pattern, spec, rng)
    header = TraceHeader(
        num_layers=spec.num_layers,
        num_heads=spec.num_heads,
        seq_len=spec.seq_len,
        window=spec.window,
        source=f"synth:{spec.pattern.value}:seed={spec.seed}:sharpness={spec.sharpness:g}",
    )
    return AttentionTrace(header, data)
