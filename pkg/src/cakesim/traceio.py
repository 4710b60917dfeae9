"""Attention-trace serialization and validation.

A trace stores, per layer and head, the last `window` query rows of the
causal attention map (shape [window, seq_len]).  On disk that is a
4-byte big-endian length prefix, a UTF-8 JSON header, and a raw
little-endian float32 payload, layer-major then head-major, each block
row-major.  Internal computation is float64.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .stats import WindowAttention

TRACE_MAGIC = "CAKE-TRACE"
TRACE_VERSION = 1
PAYLOAD_DTYPE = "f32le"

STRICT_ROW_SUM_TOL = 1e-9
LENIENT_ROW_SUM_TOL = 1e-3


class TraceFormatError(ValueError):
    """Raised when a byte stream is not a well-formed trace."""


@dataclass(frozen=True)
class TraceHeader:
    num_layers: int
    num_heads: int
    seq_len: int
    window: int
    payload_dtype: str = PAYLOAD_DTYPE
    source: str = ""

    def __post_init__(self) -> None:
        if min(self.num_layers, self.num_heads, self.seq_len, self.window) < 1:
            raise ValueError("layer, head, sequence, and window counts must be >= 1")
        if self.window > self.seq_len:
            raise ValueError("window must not exceed the sequence length")
        if self.payload_dtype != PAYLOAD_DTYPE:
            raise ValueError(f"unsupported payload dtype: {self.payload_dtype!r}")

    @property
    def block_shape(self) -> tuple[int, int]:
        return (self.window, self.seq_len)

    @property
    def payload_count(self) -> int:
        return self.num_layers * self.num_heads * self.window * self.seq_len


@dataclass(frozen=True, eq=False)
class AttentionTrace:
    """Parsed trace: header plus raw per-layer/head window blocks.

    `data` has shape [L, H, window, seq_len].  Row-distribution quality
    is the job of `validate_trace`, not the constructor, so imperfect
    traces can be loaded and inspected.
    """

    header: TraceHeader
    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", arr)
        h = self.header
        expect = (h.num_layers, h.num_heads, h.window, h.seq_len)
        if arr.shape != expect:
            raise ValueError(f"data shape {arr.shape} does not match header {expect}")

    def head_window(self, layer: int, head: int, row_sum_tol: float = LENIENT_ROW_SUM_TOL) -> WindowAttention:
        return WindowAttention(self.data[layer, head], row_sum_tol=row_sum_tol)

    def layer_windows(self, layer: int, row_sum_tol: float = LENIENT_ROW_SUM_TOL) -> list[WindowAttention]:
        return [self.head_window(layer, h, row_sum_tol) for h in range(self.header.num_heads)]


def traces_equal(a: AttentionTrace, b: AttentionTrace) -> bool:
    return a.header == b.header and np.array_equal(a.data, b.data)


def write_trace(trace: AttentionTrace) -> bytes:
    """Serialize a trace; entries must be finite and non-negative."""
    if not np.all(np.isfinite(trace.data)):
        raise ValueError("trace contains non-finite entries")
    if np.any(trace.data < 0.0):
        raise ValueError("trace contains negative entries")
    header = dict(magic=TRACE_MAGIC, version=TRACE_VERSION, **asdict(trace.header))
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = np.ascontiguousarray(trace.data, dtype="<f4").tobytes()
    return struct.pack(">I", len(blob)) + blob + payload


def read_trace(data: bytes) -> AttentionTrace:
    """Parse a serialized trace, rejecting malformed streams."""
    if len(data) < 4:
        raise TraceFormatError("truncated header length prefix")
    (header_len,) = struct.unpack(">I", data[:4])
    if len(data) < 4 + header_len:
        raise TraceFormatError("truncated header")
    try:
        fields = json.loads(data[4 : 4 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TraceFormatError(f"malformed header: {exc}") from exc
    if not isinstance(fields, dict):
        raise TraceFormatError("malformed header: not an object")
    if fields.get("magic") != TRACE_MAGIC:
        raise TraceFormatError(f"bad magic: {fields.get('magic')!r}")
    if fields.get("version") != TRACE_VERSION:
        raise TraceFormatError(f"unsupported version: {fields.get('version')!r}")
    try:
        header = TraceHeader(
            num_layers=int(fields["num_layers"]),
            num_heads=int(fields["num_heads"]),
            seq_len=int(fields["seq_len"]),
            window=int(fields["window"]),
            payload_dtype=str(fields.get("payload_dtype", PAYLOAD_DTYPE)),
            source=str(fields.get("source", "")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceFormatError(f"invalid header fields: {exc}") from exc
    payload = data[4 + header_len :]
    expect_bytes = header.payload_count * 4
    if len(payload) < expect_bytes:
        raise TraceFormatError(
            f"truncated payload: {len(payload)} bytes, expected {expect_bytes}"
        )
    if len(payload) > expect_bytes:
        raise TraceFormatError(
            f"trailing bytes after payload: {len(payload) - expect_bytes}"
        )
    flat = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    arr = flat.reshape(header.num_layers, header.num_heads, header.window, header.seq_len)
    if not np.all(np.isfinite(arr)):
        raise TraceFormatError("payload contains non-finite entries")
    if np.any(arr < 0.0):
        raise TraceFormatError("payload contains negative entries")
    return AttentionTrace(header, arr)


def save_trace(trace: AttentionTrace, path: str | Path) -> None:
    Path(path).write_bytes(write_trace(trace))


def load_trace(path: str | Path) -> AttentionTrace:
    return read_trace(Path(path).read_bytes())


class ValidationMode(str, Enum):
    # strict suits exact synthetic traces; lenient allows the rounding
    # of reduced-precision real-model exports
    STRICT = "strict"
    LENIENT = "lenient"

    @property
    def row_sum_tol(self) -> float:
        return STRICT_ROW_SUM_TOL if self is ValidationMode.STRICT else LENIENT_ROW_SUM_TOL


@dataclass(frozen=True)
class Finding:
    kind: str
    layer: int
    head: int
    deviation: float
    message: str


def validate_trace(trace: AttentionTrace, mode: ValidationMode = ValidationMode.STRICT) -> list[Finding]:
    """Check distribution quality; returns findings, empty when clean.

    Each block reports at most one row-sum finding carrying its worst
    deviation.  Negative entries and mass on future positions are hard
    findings in both modes.
    """
    tol = mode.row_sum_tol
    hdr = trace.header
    future = np.triu(
        np.ones((hdr.window, hdr.seq_len), dtype=bool), k=hdr.seq_len - hdr.window + 1
    )
    findings: list[Finding] = []
    for layer in range(hdr.num_layers):
        for head in range(hdr.num_heads):
            block = trace.data[layer, head]
            neg = float(block.min())
            if neg < 0.0:
                findings.append(
                    Finding("negative_entry", layer, head, -neg,
                            f"negative entry {neg:.6g} in layer {layer} head {head}")
                )
            fut = block[future]
            if fut.size and np.any(fut != 0.0):
                worst = float(np.max(np.abs(fut)))
                findings.append(
                    Finding("future_mass", layer, head, worst,
                            f"mass {worst:.6g} on future positions in layer {layer} head {head}")
                )
            worst_dev = float(np.max(np.abs(block.sum(axis=1) - 1.0)))
            if worst_dev > tol:
                findings.append(
                    Finding("row_sum", layer, head, worst_dev,
                            f"row sum deviates by {worst_dev:.6g} in layer {layer} head {head} "
                            f"(tolerance {tol:.0e})")
                )
    return findings
