"""CAKE-TRACE v1 writer.

On disk: a 4-byte big-endian header length, a UTF-8 JSON header, then a
raw little-endian float32 payload of shape [layers, heads, window,
seq_len], layer-major then head-major, each block row-major.  This file
layout is the interface consumed by the simulation engine; nothing else
is shared with it.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

TRACE_MAGIC = "CAKE-TRACE"
TRACE_VERSION = 1
PAYLOAD_DTYPE = "f32le"


def trace_bytes(data: np.ndarray, source: str = "") -> bytes:
    """Serialize one [layers, heads, window, seq_len] attention stack."""
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if arr.ndim != 4:
        raise ValueError(f"trace data must be 4-D, got shape {arr.shape}")
    num_layers, num_heads, window, seq_len = arr.shape
    if min(arr.shape) < 1:
        raise ValueError("every trace dimension must be >= 1")
    if window > seq_len:
        raise ValueError("window must not exceed the sequence length")
    if not np.all(np.isfinite(arr)):
        raise ValueError("trace contains non-finite entries")
    if np.any(arr < 0.0):
        raise ValueError("trace contains negative entries")
    header = {
        "magic": TRACE_MAGIC,
        "version": TRACE_VERSION,
        "num_layers": num_layers,
        "num_heads": num_heads,
        "seq_len": seq_len,
        "window": window,
        "payload_dtype": PAYLOAD_DTYPE,
        "source": source,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    return struct.pack(">I", len(blob)) + blob + arr.astype("<f4").tobytes()


def write_trace_file(path: str | Path, data: np.ndarray, source: str = "") -> None:
    Path(path).write_bytes(trace_bytes(data, source))
