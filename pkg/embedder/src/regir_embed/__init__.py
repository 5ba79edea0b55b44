"""Offline embedding producer for the regir retrieval engine."""

from .corpus_io import read_corpus_texts, write_emb1
from .encoder import embed_corpus, embed_texts, load_model, split_paragraphs
from .job import DEFAULT_MODEL, EmbedderError, EmbedJob
from .noise import corrupt_text, delete_tokens
from .smoke import build_smoke_model
from .tsdae import TsdaeResult, tsdae_finetune

__version__ = "0.1.0"
