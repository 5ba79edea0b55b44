"""End-to-end retrieval: prefilter, score, fuse, rank, attach measures.

A retrieval scheme is one of the lexical scorers, pure dense cosine, the
hybrid fusion of both, or a seeded random baseline.  The hybrid score over a
candidate set is the weighted mean of the min-max normalized lexical row and
the min-max normalized cosine row, both normalized over the candidate set
(scores outside the searched set must not leak into the scale).

Ranking is deterministic: descending score with ties broken by ascending
finding id.  The random baseline draws per-candidate uniform scores from a
generator seeded by (seed, query id), so batch and single-query paths agree.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .corpus import Corpus, Finding
from .crr import CrrTree, PrefilterConfig, prefilter
from .dense import EmbeddingSet, normalize
from .lexical import (
    Bm25Params,
    LexicalIndex,
    Variant,
    build_lexical_index,
    minmax_normalize,
    score_query,
)
from .tokenizer import TokenizedCorpus, TokenizerConfig, build_tokenized_corpus


class EngineStateError(RuntimeError):
    """A scheme was asked to run without the state it needs."""


class Scheme(str, Enum):
    TFIDF = "tfidf"
    BM25 = "bm25"
    BM25PLUS = "bm25plus"
    BM25L = "bm25l"
    BM25LPLUS = "bm25lplus"
    DENSE = "dense"
    HYBRID = "hybrid"
    RANDOM = "random"


_LEXICAL_VARIANTS: dict[Scheme, Variant] = {
    Scheme.TFIDF: Variant.TFIDF,
    Scheme.BM25: Variant.BM25,
    Scheme.BM25PLUS: Variant.BM25PLUS,
    Scheme.BM25L: Variant.BM25L,
    Scheme.BM25LPLUS: Variant.BM25L,
    Scheme.HYBRID: Variant.BM25L,
}


def scheme_variant(scheme: Scheme) -> Variant | None:
    """Lexical index variant backing a scheme (None for DENSE/RANDOM).

    BM25LPLUS and the hybrid's lexical leg are BM25L runs over the fully
    configured tokenizer; the variant formula itself is BM25L.
    """
    return _LEXICAL_VARIANTS.get(scheme)


def scheme_tokenizer_config(scheme: Scheme) -> TokenizerConfig:
    """Tokenizer profile per scheme: n-grams only for the "+" configurations."""
    if scheme in (Scheme.BM25LPLUS, Scheme.HYBRID):
        return TokenizerConfig()
    return TokenizerConfig(ngram_max=1)


def uses_lexical(scheme: Scheme) -> bool:
    return scheme in _LEXICAL_VARIANTS


def uses_dense(scheme: Scheme) -> bool:
    return scheme in (Scheme.DENSE, Scheme.HYBRID)


@dataclass(frozen=True)
class RetrieverConfig:
    scheme: Scheme
    k: int = 10
    prefilter: PrefilterConfig | None = None
    hybrid_weights: tuple[float, float] = (0.5, 0.5)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        w1, w2 = self.hybrid_weights
        if w1 < 0 or w2 < 0 or abs(w1 + w2 - 1.0) > 1e-12:
            raise ValueError(f"hybrid weights must be non-negative and sum to 1, got {self.hybrid_weights}")


@dataclass(frozen=True)
class Hit:
    finding_id: str
    score: float
    lexical_score: float | None
    dense_score: float | None
    measure_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "id": self.finding_id,
            "score": self.score,
            "lexical_score": self.lexical_score,
            "dense_score": self.dense_score,
            "measure_ids": list(self.measure_ids),
        }


@dataclass(frozen=True)
class RankedResult:
    query_id: str
    scheme: Scheme
    k: int
    hits: tuple[Hit, ...]

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "scheme": self.scheme.value,
            "k": self.k,
            "hits": [hit.to_dict() for hit in self.hits],
        }

    def hit_ids(self) -> list[str]:
        return [hit.finding_id for hit in self.hits]


@dataclass
class Engine:
    """Immutable retrieval state: corpus artifacts built once, queried many times."""

    corpus: Corpus
    tokenized: TokenizedCorpus | None = None
    index: LexicalIndex | None = None
    embeddings: EmbeddingSet | None = None  # normalized, in corpus order
    query_embeddings: EmbeddingSet | None = None  # normalized, for out-of-corpus queries
    tree: CrrTree | None = None


def build_engine(
    corpus: Corpus,
    scheme: Scheme,
    tokenizer_config: TokenizerConfig | None = None,
    params: Bm25Params | None = None,
    embeddings: EmbeddingSet | None = None,
    query_embeddings: EmbeddingSet | None = None,
    extra_refs: Sequence | None = None,
) -> Engine:
    """Build whatever state the scheme needs from a corpus.

    Raw embedding sets are normalized here and reordered to corpus order;
    the CRR tree is grown from the union of references seen in the corpus
    plus any extra references (e.g. from an article list file).
    """
    tokenized = None
    index = None
    variant = scheme_variant(scheme)
    if variant is not None:
        if tokenizer_config is None:
            tokenizer_config = scheme_tokenizer_config(scheme)
        tokenized = build_tokenized_corpus(corpus, tokenizer_config)
        index = build_lexical_index(tokenized, variant, params)
    corpus_emb = None
    if embeddings is not None:
        corpus_emb = embeddings if embeddings.normalized else normalize(embeddings)
        corpus_emb = corpus_emb.reindex(corpus.ids())
    query_emb = None
    if query_embeddings is not None:
        query_emb = query_embeddings if query_embeddings.normalized else normalize(query_embeddings)
    tree = CrrTree.from_refs(corpus.all_crr_refs())
    for ref in extra_refs or ():
        tree.add(ref)
    return Engine(
        corpus=corpus,
        tokenized=tokenized,
        index=index,
        embeddings=corpus_emb,
        query_embeddings=query_emb,
        tree=tree,
    )


def _query_seed(seed: int, query_id: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, zlib.crc32(query_id.encode("utf-8"))])


@dataclass(frozen=True)
class ScoreRows:
    """Full-corpus raw score rows for one query, computed once per query."""

    lexical: np.ndarray | None
    dense: np.ndarray | None


def compute_score_rows(engine: Engine, cfg: RetrieverConfig, query: Finding) -> ScoreRows:
    """Raw lexical/dense score rows over the whole corpus for this query.

    Raises EngineStateError when the scheme needs state the engine lacks:
    the matching lexical index, corpus embeddings, or a query vector (looked
    up by id in the engine's query embeddings, then its corpus embeddings).
    """
    lexical = None
    dense = None
    if uses_lexical(cfg.scheme):
        variant = scheme_variant(cfg.scheme)
        if engine.index is None or engine.tokenized is None:
            raise EngineStateError(f"scheme {cfg.scheme.value} requires a lexical index")
        if engine.index.variant is not variant:
            raise EngineStateError(
                f"scheme {cfg.scheme.value} needs a {variant.value} index, "
                f"engine has {engine.index.variant.value}"
            )
        tokens = engine.tokenized.tokenize_query(query.text)
        lexical = score_query(engine.index, tokens)
    if uses_dense(cfg.scheme):
        if engine.embeddings is None:
            raise EngineStateError(f"scheme {cfg.scheme.value} requires corpus embeddings")
        vec = None
        if engine.query_embeddings is not None and query.id in engine.query_embeddings:
            vec = engine.query_embeddings.row(query.id)
        elif query.id in engine.embeddings:
            vec = engine.embeddings.row(query.id)
        if vec is None:
            raise EngineStateError(f"no embedding available for query {query.id!r}")
        dense = engine.embeddings.matrix @ vec
    return ScoreRows(lexical=lexical, dense=dense)


def candidate_scores(
    cfg: RetrieverConfig,
    rows: ScoreRows,
    candidates: np.ndarray,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Scheme scores restricted to a candidate position array."""
    if cfg.scheme is Scheme.RANDOM:
        if rng is None:
            raise ValueError("RANDOM scheme requires a generator")
        return rng.random(len(candidates))
    if cfg.scheme is Scheme.DENSE:
        assert rows.dense is not None
        return rows.dense[candidates]
    if cfg.scheme is Scheme.HYBRID:
        assert rows.lexical is not None and rows.dense is not None
        w_lex, w_dense = cfg.hybrid_weights
        return w_lex * minmax_normalize(rows.lexical[candidates]) + w_dense * minmax_normalize(
            rows.dense[candidates]
        )
    assert rows.lexical is not None
    return rows.lexical[candidates]


def candidate_positions(
    engine: Engine,
    cfg: RetrieverConfig,
    query: Finding,
    restrict_to: Sequence[int] | None = None,
) -> np.ndarray:
    """Candidate positions after the optional prefilter, ascending (= id order)."""
    if cfg.prefilter is None:
        if restrict_to is None:
            return np.arange(len(engine.corpus), dtype=np.int64)
        return np.asarray(sorted(restrict_to), dtype=np.int64)
    if engine.tree is None:
        raise EngineStateError("prefilter requires a CRR tree")
    base = prefilter(query, engine.corpus, engine.tree, cfg.prefilter)
    if restrict_to is None:
        return np.asarray(base, dtype=np.int64)
    allowed = np.asarray(sorted(restrict_to), dtype=np.int64)
    base_set = set(base)
    kept = allowed[[int(p) in base_set for p in allowed]]
    if kept.size == 0 and cfg.prefilter.fallback_on_empty:
        return allowed
    return kept


def _rank(
    engine: Engine,
    cfg: RetrieverConfig,
    query: Finding,
    rows: ScoreRows,
    candidates: np.ndarray,
) -> RankedResult:
    rng = None
    if cfg.scheme is Scheme.RANDOM:
        rng = np.random.default_rng(_query_seed(cfg.seed, query.id))
    scores = candidate_scores(cfg, rows, candidates, rng)
    # candidates are ascending by position, i.e. ascending by finding id, so a
    # stable sort on descending score breaks ties by ascending id.
    order = np.argsort(-scores, kind="stable")[: cfg.k]
    hits = []
    for local in order:
        pos = int(candidates[local])
        finding = engine.corpus.findings[pos]
        hits.append(
            Hit(
                finding_id=finding.id,
                score=float(scores[local]),
                lexical_score=float(rows.lexical[pos]) if rows.lexical is not None else None,
                dense_score=float(rows.dense[pos]) if rows.dense is not None else None,
                measure_ids=tuple(sorted(finding.measure_ids)),
            )
        )
    return RankedResult(query_id=query.id, scheme=cfg.scheme, k=cfg.k, hits=tuple(hits))


def retrieve(
    query: Finding,
    engine: Engine,
    cfg: RetrieverConfig,
    restrict_to: Sequence[int] | None = None,
) -> RankedResult:
    """Rank the corpus against one query finding and return the top k.

    ``restrict_to`` optionally limits the searched corpus positions (used by
    the down-sampling evaluation harness); the prefilter applies on top.
    """
    candidates = candidate_positions(engine, cfg, query, restrict_to)
    rows = compute_score_rows(engine, cfg, query)
    return _rank(engine, cfg, query, rows, candidates)


def retrieve_batch(
    queries: Sequence[Finding],
    engine: Engine,
    cfg: RetrieverConfig,
    threads: int = 1,
) -> list[RankedResult]:
    """Per-query retrieval over a batch; identical to sequential calls."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda q: retrieve(q, engine, cfg), queries))
    return [retrieve(q, engine, cfg) for q in queries]


def random_ranker(
    query: Finding,
    corpus: Corpus,
    k: int,
    seed: int,
    restrict_to: Sequence[int] | None = None,
) -> RankedResult:
    """Seeded uniform-random baseline ranking (no engine state needed)."""
    engine = Engine(corpus=corpus)
    cfg = RetrieverConfig(scheme=Scheme.RANDOM, k=k, seed=seed)
    if restrict_to is None:
        candidates = np.arange(len(corpus), dtype=np.int64)
    else:
        candidates = np.asarray(sorted(restrict_to), dtype=np.int64)
    return _rank(engine, cfg, query, ScoreRows(None, None), candidates)
