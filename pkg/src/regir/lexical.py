"""TF-IDF and the BM25 family of lexical scorers over a tokenized corpus.

All scorers run off one inverted index.  Per query term t and document d:

* BM25:   idf(t) * tf*(k1+1) / (tf + k1*(1 - b + b*|d|/avgdl))
* BM25+:  the BM25 term plus idf(t)*delta, applied only when tf > 0
* BM25L:  idf(t) * (k1+1)*(c+delta) / (k1 + c + delta),
          with c = tf/(1 - b + b*|d|/avgdl), applied only when tf > 0
* TFIDF:  cosine between tf*idf weighted vectors (rows land in [0, 1])

IDF is the smoothed non-negative form ln((n - df + 0.5)/(df + 0.5) + 1) for
the BM25 family and ln(n/df) + 1 for TFIDF.  Restricting the delta terms to
tf > 0 keeps absent terms at zero contribution; an unconditional delta would
add the same constant to every document and carry no ranking information.

Binary index layout (version 1, all little-endian), see save_lexical_index:
magic "LXIX", u32 version, u8 variant code, f64 k1/b/delta, u32 n_docs,
f64 avgdl, n_docs doc records (u16 id length + UTF-8 id bytes), n_docs u32
doc lengths, u32 vocab size, then per token in id order: u16 token length +
UTF-8 bytes, f64 idf, u32 df, u32 postings count, and per posting a u32 doc
position and u32 term frequency.
"""

from __future__ import annotations

import math
import struct
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .dense import SimilarityMatrix
from .tokenizer import TokenizedCorpus

LXIX_MAGIC = b"LXIX"
LXIX_VERSION = 1


class LexicalError(ValueError):
    """Raised for unbuildable or corrupt lexical indexes."""


class Variant(str, Enum):
    TFIDF = "tfidf"
    BM25 = "bm25"
    BM25PLUS = "bm25plus"
    BM25L = "bm25l"


@dataclass(frozen=True)
class Bm25Params:
    """Free parameters: k1 (saturation), b (length normalization), delta (shift)."""

    k1: float = 1.6
    b: float = 0.75
    delta: float = 0.0

    def __post_init__(self) -> None:
        if self.k1 <= 0:
            raise ValueError(f"k1 must be positive, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")
        if self.delta < 0:
            raise ValueError(f"delta must be non-negative, got {self.delta}")


def default_params(variant: Variant) -> Bm25Params:
    """Per-variant defaults: k1=1.6, b=0.75; delta 1 for BM25+, 0.5 for BM25L."""
    if variant is Variant.BM25PLUS:
        return Bm25Params(delta=1.0)
    if variant is Variant.BM25L:
        return Bm25Params(delta=0.5)
    return Bm25Params()


def term_score(
    variant: Variant, tf: float, doc_len: float, avgdl: float, idf: float, params: Bm25Params
) -> float:
    """Score contribution of one query term with frequency tf in one document."""
    if tf <= 0:
        return 0.0
    norm = 1.0 - params.b + params.b * (doc_len / avgdl)
    if variant is Variant.BM25:
        return idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
    if variant is Variant.BM25PLUS:
        return idf * (tf * (params.k1 + 1.0) / (tf + params.k1 * norm) + params.delta)
    if variant is Variant.BM25L:
        c = tf / norm
        return idf * (params.k1 + 1.0) * (c + params.delta) / (params.k1 + c + params.delta)
    raise ValueError(f"term_score is BM25-family only, got {variant}")


@dataclass(frozen=True)
class LexicalIndex:
    """Inverted index with precomputed IDF and per-document lengths."""

    variant: Variant
    params: Bm25Params
    doc_ids: tuple[str, ...]
    vocab: dict[str, int]
    postings: tuple[tuple[np.ndarray, np.ndarray], ...]  # token id -> (doc positions, tfs)
    idf: np.ndarray
    df: np.ndarray
    doc_len: np.ndarray
    avgdl: float
    doc_norm: np.ndarray | None = field(default=None)  # TFIDF vector norms

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)


def _bm25_idf(n_docs: int, df: np.ndarray) -> np.ndarray:
    return np.log((n_docs - df + 0.5) / (df + 0.5) + 1.0)


def _tfidf_idf(n_docs: int, df: np.ndarray) -> np.ndarray:
    return np.log(n_docs / df) + 1.0


def build_lexical_index(
    tc: TokenizedCorpus, variant: Variant, params: Bm25Params | None = None
) -> LexicalIndex:
    """Build an inverted index for the chosen variant; errors on empty vocab."""
    if not tc.vocab:
        raise LexicalError("cannot build a lexical index over an empty vocabulary")
    if params is None:
        params = default_params(variant)
    n_vocab = len(tc.vocab)
    posting_docs: list[list[int]] = [[] for _ in range(n_vocab)]
    posting_tfs: list[list[int]] = [[] for _ in range(n_vocab)]
    for pos, doc in enumerate(tc.docs):
        for token, tf in sorted(Counter(doc).items()):
            tid = tc.vocab[token]
            posting_docs[tid].append(pos)
            posting_tfs[tid].append(tf)
    postings = tuple(
        (np.asarray(d, dtype=np.int64), np.asarray(t, dtype=np.int64))
        for d, t in zip(posting_docs, posting_tfs)
    )
    df = np.zeros(n_vocab, dtype=np.int64)
    for token, count in tc.df.items():
        df[tc.vocab[token]] = count
    idf = _tfidf_idf(tc.n_docs, df) if variant is Variant.TFIDF else _bm25_idf(tc.n_docs, df)
    doc_len = np.asarray([len(doc) for doc in tc.docs], dtype=np.int64)
    doc_norm = None
    if variant is Variant.TFIDF:
        sq = np.zeros(tc.n_docs)
        for tid in range(n_vocab):
            docs, tfs = postings[tid]
            sq[docs] += (tfs * idf[tid]) ** 2
        doc_norm = np.sqrt(sq)
    return LexicalIndex(
        variant=variant,
        params=params,
        doc_ids=tc.doc_ids,
        vocab=dict(tc.vocab),
        postings=postings,
        idf=idf,
        df=df,
        doc_len=doc_len,
        avgdl=tc.avgdl,
        doc_norm=doc_norm,
    )


def score_query(index: LexicalIndex, query_tokens: Sequence[str]) -> np.ndarray:
    """Score every document against a tokenized query.

    Each query token occurrence contributes one term-score summand (TFIDF
    folds multiplicity into the query vector); out-of-vocabulary tokens
    contribute zero.  BM25-family rows are raw non-negative sums, TFIDF rows
    are cosines in [0, 1].
    """
    scores = np.zeros(index.n_docs)
    counts = Counter(t for t in query_tokens if t in index.vocab)
    if not counts:
        return scores
    if index.variant is Variant.TFIDF:
        assert index.doc_norm is not None
        q_sq = 0.0
        for token, qtf in counts.items():
            tid = index.vocab[token]
            w_q = qtf * index.idf[tid]
            q_sq += w_q * w_q
            docs, tfs = index.postings[tid]
            scores[docs] += w_q * tfs * index.idf[tid]
        denom = math.sqrt(q_sq) * index.doc_norm
        np.divide(scores, denom, out=scores, where=denom > 0)
        return scores
    k1, b, delta = index.params.k1, index.params.b, index.params.delta
    for token, qtf in counts.items():
        tid = index.vocab[token]
        idf = index.idf[tid]
        docs, tfs = index.postings[tid]
        norm = 1.0 - b + b * (index.doc_len[docs] / index.avgdl)
        if index.variant is Variant.BM25:
            contrib = idf * tfs * (k1 + 1.0) / (tfs + k1 * norm)
        elif index.variant is Variant.BM25PLUS:
            contrib = idf * (tfs * (k1 + 1.0) / (tfs + k1 * norm) + delta)
        else:  # BM25L
            c = tfs / norm
            contrib = idf * (k1 + 1.0) * (c + delta) / (k1 + c + delta)
        scores[docs] += qtf * contrib
    return scores


def minmax_normalize(row: np.ndarray) -> np.ndarray:
    """Scale a score row to [0, 1]; a constant row maps to all zeros."""
    lo = float(row.min())
    hi = float(row.max())
    if hi <= lo:
        return np.zeros_like(row)
    return (row - lo) / (hi - lo)


def similarity_matrix_lexical(
    index: LexicalIndex,
    queries: Sequence[Sequence[str]],
    query_ids: Sequence[str] | None = None,
) -> SimilarityMatrix:
    """Queries-by-corpus score matrix, min-max normalized per row.

    The raw rows are retained alongside (``raw``) so fusion code can
    renormalize over candidate subsets.
    """
    raw = np.vstack([score_query(index, q) for q in queries]) if queries else np.zeros((0, index.n_docs))
    values = np.vstack([minmax_normalize(r) for r in raw]) if len(raw) else raw
    if query_ids is None:
        query_ids = [f"Q{i}" for i in range(len(queries))]
    return SimilarityMatrix(
        values=values, row_ids=tuple(query_ids), col_ids=index.doc_ids, raw=raw
    )


_VARIANT_CODES = {Variant.TFIDF: 0, Variant.BM25: 1, Variant.BM25PLUS: 2, Variant.BM25L: 3}
_CODE_VARIANTS = {v: k for k, v in _VARIANT_CODES.items()}


def save_lexical_index(index: LexicalIndex, path: str | Path) -> None:
    """Write the index in the LXIX binary format (layout in module docstring)."""
    with open(path, "wb") as fh:
        fh.write(LXIX_MAGIC)
        fh.write(struct.pack("<IB", LXIX_VERSION, _VARIANT_CODES[index.variant]))
        fh.write(struct.pack("<ddd", index.params.k1, index.params.b, index.params.delta))
        fh.write(struct.pack("<Id", index.n_docs, index.avgdl))
        for doc_id in index.doc_ids:
            raw = doc_id.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
        fh.write(np.asarray(index.doc_len, dtype="<u4").tobytes())
        tokens = sorted(index.vocab, key=index.vocab.__getitem__)
        fh.write(struct.pack("<I", len(tokens)))
        for tid, token in enumerate(tokens):
            raw = token.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            docs, tfs = index.postings[tid]
            fh.write(struct.pack("<dII", float(index.idf[tid]), int(index.df[tid]), len(docs)))
            interleaved = np.empty(2 * len(docs), dtype="<u4")
            interleaved[0::2] = docs
            interleaved[1::2] = tfs
            fh.write(interleaved.tobytes())


def load_lexical_index(path: str | Path) -> LexicalIndex:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != LXIX_MAGIC:
        raise LexicalError(f"{path}: not a LXIX index file")
    offset = 4
    version, variant_code = struct.unpack_from("<IB", data, offset)
    offset += 5
    if version != LXIX_VERSION:
        raise LexicalError(f"{path}: unsupported index version {version}")
    k1, b, delta = struct.unpack_from("<ddd", data, offset)
    offset += 24
    n_docs, avgdl = struct.unpack_from("<Id", data, offset)
    offset += 12
    doc_ids: list[str] = []
    for _ in range(n_docs):
        (id_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        doc_ids.append(data[offset : offset + id_len].decode("utf-8"))
        offset += id_len
    doc_len = np.frombuffer(data, dtype="<u4", count=n_docs, offset=offset).astype(np.int64)
    offset += 4 * n_docs
    (n_vocab,) = struct.unpack_from("<I", data, offset)
    offset += 4
    vocab: dict[str, int] = {}
    postings: list[tuple[np.ndarray, np.ndarray]] = []
    idf = np.empty(n_vocab)
    df = np.empty(n_vocab, dtype=np.int64)
    for tid in range(n_vocab):
        (tok_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        vocab[data[offset : offset + tok_len].decode("utf-8")] = tid
        offset += tok_len
        idf[tid], df[tid], n_post = struct.unpack_from("<dII", data, offset)
        offset += 16
        interleaved = np.frombuffer(data, dtype="<u4", count=2 * n_post, offset=offset)
        offset += 8 * n_post
        postings.append(
            (interleaved[0::2].astype(np.int64), interleaved[1::2].astype(np.int64))
        )
    variant = _CODE_VARIANTS[variant_code]
    doc_norm = None
    if variant is Variant.TFIDF:
        sq = np.zeros(n_docs)
        for tid in range(n_vocab):
            docs, tfs = postings[tid]
            sq[docs] += (tfs * idf[tid]) ** 2
        doc_norm = np.sqrt(sq)
    return LexicalIndex(
        variant=variant,
        params=Bm25Params(k1=k1, b=b, delta=delta),
        doc_ids=tuple(doc_ids),
        vocab=vocab,
        postings=tuple(postings),
        idf=idf,
        df=df,
        doc_len=doc_len,
        avgdl=avgdl,
        doc_norm=doc_norm,
    )
