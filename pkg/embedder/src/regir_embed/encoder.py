"""Model loading and corpus embedding with paragraph pooling."""

from __future__ import annotations

import re
from dataclasses import replace
from pathlib import Path

import numpy as np
import torch

from .corpus_io import read_corpus_texts, write_emb1
from .job import EmbedderError, EmbedJob

try:  # import path renamed in sentence-transformers 5.x
    from sentence_transformers.sentence_transformer import modules as st_modules
except ImportError:  # pragma: no cover - older releases
    from sentence_transformers import models as st_modules

from sentence_transformers import SentenceTransformer

_PARAGRAPH_RE = re.compile(r"\n\s*\n")


def load_model(name_or_path: str, device: str = "cpu") -> SentenceTransformer:
    """Load a sentence-transformer by name/path.

    Plain transformer checkpoints (BERT-style models without a
    sentence-transformers config) are wrapped with mean pooling, so
    word-level models export through the same path.
    """
    try:
        return SentenceTransformer(name_or_path, device=device)
    except Exception as st_error:
        try:
            word = st_modules.Transformer(name_or_path)
            get_dim = getattr(
                word, "get_embedding_dimension", None
            ) or word.get_word_embedding_dimension
            pooling = st_modules.Pooling(get_dim(), pooling_mode="mean")
            return SentenceTransformer(modules=[word, pooling], device=device)
        except Exception:
            raise EmbedderError(
                f"cannot load embedding model {name_or_path!r}: {st_error}"
            ) from None


def split_paragraphs(text: str) -> list[str]:
    parts = [p.strip() for p in _PARAGRAPH_RE.split(text)]
    return [p for p in parts if p] or [text.strip()]


def _token_count(model: SentenceTransformer, text: str) -> int:
    return len(model.tokenizer(text, add_special_tokens=True, truncation=False)["input_ids"])


def _encode(model: SentenceTransformer, texts: list[str], batch_size: int) -> np.ndarray:
    return np.asarray(
        model.encode(
            texts,
            batch_size=batch_size,
            convert_to_numpy=True,
            normalize_embeddings=False,
            show_progress_bar=False,
        ),
        dtype=np.float64,
    )


def embed_texts(model: SentenceTransformer, texts: list[str], batch_size: int) -> np.ndarray:
    """One vector per text; texts over the model's token limit are split on
    paragraphs and their segment vectors mean-pooled."""
    limit = model.max_seq_length or 512
    segments: list[str] = []
    spans: list[tuple[int, int]] = []
    for text in texts:
        if _token_count(model, text) > limit:
            parts = split_paragraphs(text)
        else:
            parts = [text]
        spans.append((len(segments), len(segments) + len(parts)))
        segments.extend(parts)
    encoded = _encode(model, segments, batch_size)
    return np.vstack([encoded[start:stop].mean(axis=0) for start, stop in spans])


def embed_corpus(job: EmbedJob, model: SentenceTransformer | None = None) -> Path:
    """Embed every finding in the job's corpus and write an EMB1 file."""
    pairs = read_corpus_texts(job.corpus)
    torch.manual_seed(job.seed)
    if model is None:
        model = load_model(job.model)
    model.eval()
    ids = [fid for fid, _ in pairs]
    with torch.no_grad():
        matrix = embed_texts(model, [text for _, text in pairs], job.batch_size)
    write_emb1(ids, matrix, job.out)
    return Path(job.out)


def embed_with_adapted(job: EmbedJob, adapted_dir: Path) -> Path:
    """Embed the job's corpus with a previously adapted model directory."""
    return embed_corpus(replace(job, model=str(adapted_dir)))
