"""Tiny local checkpoints so the exporter tests run without a network."""

from __future__ import annotations

import pytest
import torch
from tokenizers import Tokenizer, decoders, models, pre_tokenizers
from transformers import GPT2Config, GPT2LMHeadModel, LlamaConfig, LlamaForCausalLM
from transformers import PreTrainedTokenizerFast


def _byte_level_tokenizer() -> PreTrainedTokenizerFast:
    # Byte-level BPE with no merges: every byte is its own token, so any
    # prompt tokenizes and the vocab stays tiny.
    alphabet = sorted(pre_tokenizers.ByteLevel.alphabet())
    tokenizer = Tokenizer(models.BPE(vocab={ch: i for i, ch in enumerate(alphabet)}, merges=[]))
    tokenizer.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    tokenizer.decoder = decoders.ByteLevel()
    return PreTrainedTokenizerFast(tokenizer_object=tokenizer, eos_token="<|endoftext|>")


@pytest.fixture(scope="session")
def gpt2_dir(tmp_path_factory) -> str:
    path = tmp_path_factory.mktemp("tiny-gpt2")
    torch.manual_seed(0)
    config = GPT2Config(
        vocab_size=512,
        n_positions=128,
        n_embd=32,
        n_layer=2,
        n_head=2,
        bos_token_id=0,
        eos_token_id=0,
    )
    GPT2LMHeadModel(config).save_pretrained(path)
    _byte_level_tokenizer().save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def gqa_llama_dir(tmp_path_factory) -> str:
    path = tmp_path_factory.mktemp("tiny-gqa")
    torch.manual_seed(0)
    config = LlamaConfig(
        vocab_size=128,
        hidden_size=32,
        intermediate_size=64,
        num_hidden_layers=2,
        num_attention_heads=4,
        num_key_value_heads=2,
        max_position_embeddings=128,
        bos_token_id=0,
        eos_token_id=1,
    )
    LlamaForCausalLM(config).save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def token_file(tmp_path_factory) -> str:
    path = tmp_path_factory.mktemp("tokens") / "prompt.txt"
    # 48 ids, all inside the smallest test vocab (128)
    tokens = [(7 * i + 3) % 120 for i in range(48)]
    path.write_text(" ".join(str(t) for t in tokens) + "\n")
    return str(path)
