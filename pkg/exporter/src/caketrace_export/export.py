"""Run a causal language model and export its attention window.

The model runs one forward pass with attention outputs enabled on the
eager (non-fused) path, so the softmaxed weights are materialized.  The
last `window` query rows of every layer/head map are written out.
Grouped-query models export per-query-head maps, so the head count in
the header is the number of query heads.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .writer import write_trace_file

# softmax under a causal mask leaves exact zeros above the horizon; any
# real mass there means the attention output is not what we asked for
FUTURE_MASS_TOL = 1e-6


class ExportError(RuntimeError):
    """Model, prompt, or attention-extraction problem."""


@dataclass(frozen=True)
class ExportSpec:
    """What to export: model, prompt source, window size, destination.

    Exactly one of `prompt` (tokenized with the model's tokenizer) or
    `token_file` (whitespace-separated integer ids) must be given.
    """

    model_id: str
    out_path: str
    window: int = 32
    prompt: str | None = None
    token_file: str | None = None
    device: str = "cpu"

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if (self.prompt is None) == (self.token_file is None):
            raise ValueError("exactly one of prompt or token_file is required")


def _read_token_file(path: str) -> list[int]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ExportError(f"cannot read token file {path}: {exc}") from exc
    try:
        tokens = [int(part) for part in text.split()]
    except ValueError as exc:
        raise ExportError(f"token file {path} must hold whitespace-separated integers") from exc
    if not tokens:
        raise ExportError(f"token file {path} is empty")
    if any(t < 0 for t in tokens):
        raise ExportError("token ids must be non-negative")
    return tokens


def _tokenize_prompt(model_id: str, prompt: str) -> list[int]:
    from transformers import AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
    except Exception as exc:
        raise ExportError(f"cannot load tokenizer for {model_id}: {exc}") from exc
    tokens = tokenizer(prompt)["input_ids"]
    if not tokens:
        raise ExportError("prompt tokenized to zero tokens")
    return [int(t) for t in tokens]


def load_tokens(spec: ExportSpec) -> list[int]:
    if spec.token_file is not None:
        return _read_token_file(spec.token_file)
    return _tokenize_prompt(spec.model_id, spec.prompt)


def export(spec: ExportSpec) -> dict:
    """Export one trace file; returns a summary of what was written."""
    import torch
    from transformers import AutoModelForCausalLM

    tokens = load_tokens(spec)
    seq_len = len(tokens)
    if seq_len < spec.window + 1:
        raise ExportError(
            f"prompt is {seq_len} tokens; need at least window + 1 = {spec.window + 1}"
        )

    try:
        model = AutoModelForCausalLM.from_pretrained(
            spec.model_id, attn_implementation="eager"
        )
    except Exception as exc:
        raise ExportError(f"cannot load model {spec.model_id}: {exc}") from exc
    model.eval()
    model.to(spec.device)

    vocab_size = int(getattr(model.config, "vocab_size", 0))
    if vocab_size and max(tokens) >= vocab_size:
        raise ExportError(
            f"token id {max(tokens)} is out of range for vocab size {vocab_size}"
        )

    ids = torch.tensor([tokens], dtype=torch.long, device=spec.device)
    with torch.no_grad():
        outputs = model(ids, output_attentions=True)
    attentions = getattr(outputs, "attentions", None)
    if not attentions:
        raise ExportError("model returned no attention outputs on the eager path")

    # [L, H, S, S], f64 for exact window slicing and checks
    stack = np.stack([layer[0].to(torch.float64).cpu().numpy() for layer in attentions])
    data = np.ascontiguousarray(stack[:, :, seq_len - spec.window :, :])

    # window row i belongs to query position seq_len - window + i
    future = np.triu(
        np.ones((spec.window, seq_len), dtype=bool), k=seq_len - spec.window + 1
    )
    worst_future = float(np.abs(data[:, :, future]).max()) if future.any() else 0.0
    if worst_future > FUTURE_MASS_TOL:
        raise ExportError(
            f"attention mass {worst_future:.3g} beyond the causal horizon; "
            "the runtime path did not produce causal weights"
        )
    data[:, :, future] = 0.0
    np.clip(data, 0.0, None, out=data)  # defend against -0.0 and rounding dust

    dtype_note = str(next(model.parameters()).dtype).removeprefix("torch.")
    source = f"export:{Path(spec.model_id).name}:window={spec.window}:dtype={dtype_note}"
    write_trace_file(spec.out_path, data, source=source)
    return {
        "out": str(spec.out_path),
        "num_layers": int(data.shape[0]),
        "num_heads": int(data.shape[1]),
        "seq_len": seq_len,
        "window": spec.window,
        "source": source,
    }
