"""Kernel backend selection.

Prefers the compiled extension and falls back to the pure-NumPy
implementations when it is missing (or when CAKESIM_KERNELS=fallback is
set, which is handy for benchmarking and debugging).
"""

from __future__ import annotations

import os

from . import _fallback

if os.environ.get("CAKESIM_KERNELS", "").lower() == "fallback":
    _impl = _fallback
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _fallback

row_entropy_sum = _impl.row_entropy_sum
column_mean_var = _impl.column_mean_var
pool1d = _impl.pool1d
topk_finite = _impl.topk_finite


def backend_name() -> str:
    """Name of the active kernel backend ('compiled' or 'fallback')."""
    return "fallback" if _impl is _fallback else "compiled"
