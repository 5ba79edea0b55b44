"""Embedding-job configuration."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

DEFAULT_MODEL = "sentence-transformers/all-MiniLM-L6-v2"


class EmbedderError(RuntimeError):
    """Raised for unusable jobs, corpora, or models."""


@dataclass(frozen=True)
class EmbedJob:
    """One embedding-export run, with optional TSDAE adaptation first.

    ``epochs`` defaults to the smoke scale; production-scale adaptation
    (125 epochs, batch size 64 on findings plus the regulation articles)
    is configuration, not a different code path.
    """

    corpus: Path
    out: Path
    model: str = DEFAULT_MODEL
    tsdae: bool = False
    epochs: int = 2
    batch_size: int = 64
    noise_ratio: float = 0.5
    extra_corpus: Path | None = None
    seed: int = 0
    learning_rate: float = 3e-5

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise EmbedderError(f"epochs must be >= 1, got {self.epochs}")
        if not 0.0 < self.noise_ratio < 1.0:
            raise EmbedderError(f"noise_ratio must be in (0, 1), got {self.noise_ratio}")
        if self.batch_size < 1:
            raise EmbedderError(f"batch_size must be >= 1, got {self.batch_size}")
