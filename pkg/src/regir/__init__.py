"""Hybrid lexical/semantic retrieval engine for regulatory findings."""

from .corpus import Corpus, CorpusError, Finding, Measure, generate_synthetic_corpus, load_corpus, write_corpus
from .crr import CrrRef, CrrTree, PrefilterConfig, hierarchical_sim, jaccard, parse_crr_ref, prefilter
from .dense import EmbeddingSet, SimilarityMatrix, cosine_matrix, load_embeddings, normalize, write_embeddings
from .evaluation import (
    EvalReport,
    LabeledQuery,
    McConfig,
    SimSpec,
    average_precision_at_k,
    mc_validate,
    reciprocal_rank_at_k,
    simulate_bounds,
)
from .lexical import Bm25Params, LexicalIndex, Variant, build_lexical_index, score_query, similarity_matrix_lexical
from .retriever import Engine, RankedResult, RetrieverConfig, Scheme, build_engine, random_ranker, retrieve, retrieve_batch
from .tokenizer import TokenizedCorpus, TokenizerConfig, build_tokenized_corpus, extract_crr_tokens, tokenize_base

__version__ = "0.1.0"
