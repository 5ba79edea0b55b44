"""Construction of a small randomly initialized encoder for offline tests.

The smoke model has the production output dimension (384) but only two
layers and a corpus-derived whole-word vocabulary, so the embed/adapt
pipeline can run end-to-end without downloading pretrained weights.
"""

from __future__ import annotations

import tempfile
from pathlib import Path
from typing import Iterable

import torch
from transformers import BertConfig, BertModel, BertTokenizerFast

from .encoder import st_modules
from sentence_transformers import SentenceTransformer

_SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]


def build_smoke_model(
    out_dir: str | Path,
    texts: Iterable[str],
    seed: int = 0,
    dim: int = 384,
    layers: int = 2,
    heads: int = 4,
    max_seq_length: int = 128,
) -> Path:
    """Write a loadable sentence-transformer directory with random weights."""
    words = sorted({w.lower() for text in texts for w in text.split()})[:4000]
    out_dir = Path(out_dir)
    with tempfile.TemporaryDirectory() as tmp:
        vocab_path = Path(tmp) / "vocab.txt"
        vocab_path.write_text("\n".join(_SPECIALS + words), encoding="utf-8")
        tokenizer = BertTokenizerFast(vocab_file=str(vocab_path), do_lower_case=True)
        config = BertConfig(
            vocab_size=len(_SPECIALS) + len(words),
            hidden_size=dim,
            num_hidden_layers=layers,
            num_attention_heads=heads,
            intermediate_size=4 * dim,
            max_position_embeddings=512,
        )
        torch.manual_seed(seed)
        BertModel(config).save_pretrained(tmp)
        tokenizer.save_pretrained(tmp)
        word = st_modules.Transformer(tmp, max_seq_length=max_seq_length)
        pooling = st_modules.Pooling(dim, pooling_mode="mean")
        model = SentenceTransformer(modules=[word, pooling])
        model.save(str(out_dir))
    return out_dir
