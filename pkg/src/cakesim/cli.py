"""Command-line surface: synth, stats, prefill, decode, verify.

Every command reads CAKE-TRACE files and/or emits a JSON report with a
schema_version field.  Exit code 0 means no findings and no errors; 1
means the run completed but produced findings or oracle failures; 2
means a usage, config, or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .engine import (
    Strategy,
    decode_simulate,
    ledger_report,
    make_decode_source,
    prefill_cascade,
    prefill_oneshot,
    run_prop1_campaign,
    run_theorem2_campaign,
)
from .evict import PoolKind, PoolSpec
from .stats import PreferenceParams, layer_stats
from .synth import Pattern, SyntheticSpec, synth_generate
from .traceio import TraceFormatError, ValidationMode, load_trace, save_trace, validate_trace

SCHEMA_VERSION = 1


class CliError(ValueError):
    """Config or input problem surfaced as exit code 2."""


@dataclass(frozen=True)
class RunConfig:
    """Engine knobs shared by the commands.

    tau1/tau2 default to 1.0 (useful ranges are about [0.2, 2] and
    [0.4, 3]); gamma defaults to 200; window applies where a trace does
    not already fix it (synth).  Precedence: flags > config file >
    defaults.
    """

    b_total: int | None = None
    tau1: float = 1.0
    tau2: float = 1.0
    gamma: float = 200.0
    window: int = 32
    pool_kind: str = "max"
    pool_kernel: int = 7
    strategy: str = "cake"
    seed: int = 0
    validation: str = "lenient"

    @property
    def params(self) -> PreferenceParams:
        return PreferenceParams(self.tau1, self.tau2)

    @property
    def pool(self) -> PoolSpec:
        return PoolSpec(PoolKind(self.pool_kind), self.pool_kernel)

    @property
    def validation_mode(self) -> ValidationMode:
        return ValidationMode(self.validation)

    @property
    def strategy_enum(self) -> Strategy:
        return Strategy(self.strategy)


_CONFIG_KEYS = {f.name for f in fields(RunConfig)}


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, the optional --config JSON file, and flags."""
    merged: dict[str, Any] = {}
    path = getattr(args, "config", None)
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config file {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise CliError("config file must hold a JSON object")
        unknown = sorted(set(loaded) - _CONFIG_KEYS)
        if unknown:
            raise CliError(f"unknown config keys: {', '.join(unknown)}")
        merged.update(loaded)
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    try:
        return RunConfig(**merged)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid config: {exc}") from exc


def _round_floats(obj: Any) -> Any:
    """Clamp every float to 12 significant digits for stable reports."""
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, (np.floating, float)):
        return float(f"{float(obj):.12g}")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(_round_floats(report), indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _config_echo(cfg: RunConfig) -> dict:
    return asdict(cfg)


def _cmd_synth(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    spec = SyntheticSpec(
        pattern=Pattern(args.pattern),
        num_layers=args.layers,
        num_heads=args.heads,
        seq_len=args.seq_len,
        window=cfg.window,
        seed=cfg.seed,
        sharpness=args.sharpness,
    )
    trace = synth_generate(spec)
    save_trace(trace, args.out)
    _emit(
        {
            "schema_version": SCHEMA_VERSION,
            "out": str(args.out),
            "header": asdict(trace.header),
            "payload_values": trace.header.payload_count,
        },
        args.report_out,
    )
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    trace = load_trace(args.trace)
    findings = validate_trace(trace, cfg.validation_mode)
    hdr = trace.header
    per_layer = [
        layer_stats(trace.layer_windows(l), cfg.params) for l in range(hdr.num_layers)
    ]
    prefs = [st.preference for st in per_layer]
    total = sum(prefs)
    if total > 0.0:
        fractions = [p / total for p in prefs]
    else:
        fractions = [1.0 / hdr.num_layers] * hdr.num_layers
    report = {
        "schema_version": SCHEMA_VERSION,
        "trace": asdict(hdr),
        "params": {"tau1": cfg.tau1, "tau2": cfg.tau2},
        "validation_mode": cfg.validation,
        "findings": [asdict(f) for f in findings],
        "layers": [
            {
                "layer": l,
                "dispersion": st.dispersion,
                "shift": st.shift,
                "preference": st.preference,
                "fraction": fractions[l],
            }
            for l, st in enumerate(per_layer)
        ],
    }
    _emit(report, args.out)
    return 1 if findings else 0


def _run_prefill(trace_path: str, cfg: RunConfig, mode: str):
    trace = load_trace(trace_path)
    if cfg.b_total is None:
        raise CliError("b_total is required (flag --b-total or config)")
    run = prefill_cascade if mode == "cascade" else prefill_oneshot
    return trace, run(
        trace,
        cfg.b_total,
        params=cfg.params,
        pool=cfg.pool,
        gamma=cfg.gamma,
        strategy=cfg.strategy_enum,
    )


def _prefill_report(result, cfg: RunConfig) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "mode": result.mode,
        "strategy": cfg.strategy,
        "config": _config_echo(cfg),
        "trace": {
            "seq_len": result.seq_len,
            "window": result.window,
            "heads": result.heads,
            "num_layers": len(result.caches),
        },
        "final_budgets": list(result.final_budgets.budgets),
        "schedule": [list(vec.budgets) for vec in result.schedule.stages],
        "stats": [asdict(st) for st in result.stats],
        "keep_positions": [c.positions.tolist() for c in result.caches],
        "cache_sizes": [c.size for c in result.caches],
        "ledger": ledger_report(result),
    }


def _cmd_prefill(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    _, result = _run_prefill(args.trace, cfg, args.mode)
    _emit(_prefill_report(result, cfg), args.out)
    return 0


def _cmd_decode(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    _, pre = _run_prefill(args.trace, cfg, "cascade")
    source = make_decode_source(args.source, cfg.seed)
    result = decode_simulate(pre, source, args.steps, gamma=cfg.gamma, pool=cfg.pool)
    sizes = result.per_step_sizes
    report = {
        "schema_version": SCHEMA_VERSION,
        "source": args.source,
        "config": _config_echo(cfg),
        "steps": result.steps,
        "budgets": list(result.budgets.budgets),
        "per_step_sizes": sizes.tolist(),
        "max_size_per_layer": sizes.max(axis=0).tolist() if result.steps else [],
        "final_positions": [p.tolist() for p in result.outputs_positions],
    }
    _emit(report, args.out)
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    t2_failures = run_theorem2_campaign(
        args.trials, max_size=args.max_size, max_stages=args.max_stages, seed=cfg.seed
    )
    p1_failures = run_prop1_campaign(
        args.trials, max_layers=args.max_layers, seed=cfg.seed
    )
    ok = t2_failures == 0 and p1_failures == 0
    report = {
        "schema_version": SCHEMA_VERSION,
        "theorem2": {
            "trials": args.trials,
            "failures": t2_failures,
            "max_size": args.max_size,
            "max_stages": args.max_stages,
            "seed": cfg.seed,
        },
        "prop1": {
            "trials": args.trials,
            "failures": p1_failures,
            "max_layers": args.max_layers,
            "seed": cfg.seed,
        },
        "pass": ok,
    }
    _emit(report, args.out)
    return 0 if ok else 1


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--b-total", dest="b_total", type=int)
    p.add_argument("--tau1", type=float)
    p.add_argument("--tau2", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--window", type=int)
    p.add_argument("--pool-kind", dest="pool_kind", choices=[k.value for k in PoolKind])
    p.add_argument("--pool-kernel", dest="pool_kernel", type=int)
    p.add_argument("--strategy", choices=[s.value for s in Strategy])
    p.add_argument("--seed", type=int)
    p.add_argument(
        "--validation", choices=[m.value for m in ValidationMode], dest="validation"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cakesim",
        description="KV-cache eviction simulator: trace synthesis, statistics, "
        "prefill/decode simulation, and oracle verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic attention trace")
    p.add_argument("--pattern", required=True, choices=[v.value for v in Pattern])
    p.add_argument("--layers", type=int, required=True)
    p.add_argument("--heads", type=int, default=1)
    p.add_argument("--seq-len", dest="seq_len", type=int, required=True)
    p.add_argument("--sharpness", type=float, default=4.0)
    p.add_argument("--out", required=True, help="trace file to write")
    p.add_argument("--report-out", dest="report_out", help="write the JSON report here")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("stats", help="per-layer dispersion/shift/preference report")
    p.add_argument("trace")
    p.add_argument("--out")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("prefill", help="run prefill cache management on a trace")
    p.add_argument("trace")
    p.add_argument("--mode", choices=["cascade", "oneshot"], default="cascade")
    p.add_argument("--out")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_prefill)

    p = sub.add_parser("decode", help="prefill then simulate decode steps")
    p.add_argument("trace")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument(
        "--source", choices=["uniform", "sink", "shifting"], default="uniform"
    )
    p.add_argument("--out")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("verify", help="run the eviction/allocation oracle campaigns")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--max-size", dest="max_size", type=int, default=256)
    p.add_argument("--max-stages", dest="max_stages", type=int, default=8)
    p.add_argument("--max-layers", dest="max_layers", type=int, default=16)
    p.add_argument("--out")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
