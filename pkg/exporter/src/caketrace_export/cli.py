"""Command line entry point: run a model, write an attention trace."""

from __future__ import annotations

import argparse
import json
import sys

from .export import ExportError, ExportSpec, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="caketrace-export",
        description="Export a causal LM's last-window attention to a trace file.",
    )
    parser.add_argument("model", help="model name or local checkpoint directory")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--prompt", help="prompt text, tokenized with the model's tokenizer")
    source.add_argument("--token-file", help="file of whitespace-separated token ids")
    parser.add_argument("--window", type=int, default=32, help="query rows to keep (default 32)")
    parser.add_argument("--out", required=True, help="destination trace file")
    parser.add_argument("--device", default="cpu", help="torch device (default cpu)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = ExportSpec(
            model_id=args.model,
            out_path=args.out,
            window=args.window,
            prompt=args.prompt,
            token_file=args.token_file,
            device=args.device,
        )
        summary = export(spec)
    except (ExportError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
