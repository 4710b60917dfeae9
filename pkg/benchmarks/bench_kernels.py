"""Benchmark the compiled kernels against the pure-NumPy fallback.

Times the four hot kernels on realistic shapes and one end-to-end
prefill on the active backend.  Run twice (with and without
CAKESIM_KERNELS=fallback) to compare full-pipeline numbers.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import statistics
import time

import numpy as np

from cakesim import Pattern, SyntheticSpec, backend_name, prefill_cascade, synth_generate
from cakesim._kernels import _fallback

try:
    from cakesim._kernels import _core
except ImportError:
    _core = None


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return statistics.median(times)


def _row(name, fell, core):
    if core is None:
        print(f"{name:<28} {fell * 1e3:>10.3f} ms {'-':>12} {'-':>8}")
    else:
        print(f"{name:<28} {fell * 1e3:>10.3f} ms {core * 1e3:>9.3f} ms {fell / core:>7.2f}x")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=7)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    matrix = rng.random((256, 4064))
    scores = rng.random(65536)
    tie_scores = rng.integers(0, 8, 65536).astype(np.float64) * 0.125

    cases = [
        ("row_entropy_sum 256x4064", lambda mod: mod.row_entropy_sum(matrix)),
        ("column_mean_var 256x4064", lambda mod: mod.column_mean_var(matrix)),
        ("pool1d max k=7 n=65536", lambda mod: mod.pool1d(scores, 7, True)),
        ("pool1d avg k=7 n=65536", lambda mod: mod.pool1d(scores, 7, False)),
        ("topk_finite n=65536 k=4096", lambda mod: mod.topk_finite(scores, 4096)),
        ("topk_finite ties n=65536", lambda mod: mod.topk_finite(tie_scores, 4096)),
    ]

    print(f"{'kernel':<28} {'fallback':>13} {'compiled':>12} {'speedup':>8}")
    for name, call in cases:
        fell = _best(lambda: call(_fallback), args.repeat)
        core = _best(lambda: call(_core), args.repeat) if _core is not None else None
        _row(name, fell, core)

    trace = synth_generate(SyntheticSpec(Pattern.MIXED, 16, 2, 1024, 32, seed=0))
    elapsed = _best(lambda: prefill_cascade(trace, 8192), max(3, args.repeat // 2))
    print(f"\nprefill_cascade L=16 H=2 S=1024 on '{backend_name()}': {elapsed * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
