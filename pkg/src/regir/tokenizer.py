"""Six-stage lexical tokenization pipeline.

Stages, applied in order over a whole corpus:

1. CRR reference extraction: textual article references become atomic
   ``CRR_*`` tokens (``extract_crr_tokens``).
2. lowercasing + punctuation stripping,
3. stopword removal,
4. dictionary lemmatization with identity fallback  (2-4 in ``tokenize_base``),
5. collocation detection merging adjacent tokens into bi-/trigrams
   (``detect_collocations``),
6. document-frequency pruning of too-common and too-rare tokens
   (``prune_by_df``).

``CRR_*`` tokens are exempt from stopword removal, lemmatization and
collocation merging, but can still be df-pruned.  Purely numeric tokens are
dropped.  The pipeline is deterministic: the same corpus and config always
produce the same TokenizedCorpus.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib.resources import files
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import Corpus
from .crr import CrrRef

CRR_TOKEN_PREFIX = "CRR_"

# "article 182(1)(f) of Regulation (EU) No 575/2013"; the regulation suffix
# is optional and consumed with the reference when present.
_CRR_TEXT_RE = re.compile(
    r"\b[Aa]rticles?\s+(\d+)((?:\s*\(\s*[0-9a-zA-Z]+\s*\))*)"
    r"(?:(?:\s+of)?\s+Regulation\s*\(\s*EU\s*\)\s*No\.?\s*\d+/\d+)?"
)
_PARENT_PART_RE = re.compile(r"\(\s*([0-9a-zA-Z]+)\s*\)")
_WORD_RE = re.compile(r"[a-z0-9_]+")
_STRIP_CHARS = "()[]{}.,;:!?\"'"


def _load_lines(name: str) -> list[str]:
    text = files("regir").joinpath(f"data/{name}").read_text(encoding="utf-8")
    return [line for line in text.splitlines() if line.strip()]


def default_stopwords() -> frozenset[str]:
    """The bundled English stopword list."""
    return frozenset(_load_lines("stopwords.txt"))


def default_lemmas() -> dict[str, str]:
    """The bundled surface-form -> lemma lookup table."""
    table: dict[str, str] = {}
    for line in _load_lines("lemmas.tsv"):
        surface, lemma = line.split("\t")
        table[surface] = lemma
    return table


def load_stopwords(path: str | Path) -> frozenset[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return frozenset(line.strip() for line in fh if line.strip())


def load_lemmas(path: str | Path) -> dict[str, str]:
    table: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                surface, lemma = line.rstrip("\n").split("\t")
                table[surface] = lemma
    return table


@dataclass(frozen=True)
class TokenizerConfig:
    """Pipeline parameters; df bounds are fractions of the corpus size."""

    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    lemmas: Mapping[str, str] = field(default_factory=default_lemmas)
    min_df: float = 0.0005
    max_df: float = 0.9
    ngram_max: int = 3
    collocation_min_count: int = 5

    def __post_init__(self) -> None:
        if not 0.0 < self.min_df < self.max_df < 1.0:
            raise ValueError(
                f"require 0 < min_df < max_df < 1, got ({self.min_df}, {self.max_df})"
            )
        if self.ngram_max not in (1, 2, 3):
            raise ValueError(f"ngram_max must be 1, 2 or 3, got {self.ngram_max}")
        if self.collocation_min_count < 1:
            raise ValueError("collocation_min_count must be >= 1")


def extract_crr_tokens(text: str) -> tuple[str, list[CrrRef]]:
    """Replace textual CRR article references with atomic CRR_* tokens.

    "pursuant article 182(1)(f) of Regulation (EU) No 575/2013" becomes
    "pursuant CRR_182_1_f"; the parsed references are also returned for
    corpus-metadata cross-checks.  Near-matches without an article number
    are left untouched.
    """
    refs: list[CrrRef] = []

    def _sub(m: re.Match) -> str:
        parts = [p.lower() for p in _PARENT_PART_RE.findall(m.group(2))]
        ref = CrrRef((m.group(1), *parts))
        refs.append(ref)
        return CRR_TOKEN_PREFIX + "_".join(ref.path)

    return _CRR_TEXT_RE.sub(_sub, text), refs


def crr_token(ref: CrrRef) -> str:
    """The atomic token form of a reference ("182(1)(f)" -> "CRR_182_1_f")."""
    return CRR_TOKEN_PREFIX + "_".join(ref.path)


def tokenize_base(
    text: str,
    stopwords: frozenset[str] | None = None,
    lemmas: Mapping[str, str] | None = None,
) -> list[str]:
    """Lowercase, strip punctuation, drop stopwords and numerics, lemmatize.

    Expects CRR references to have been replaced by atomic tokens already;
    those pass through untouched.  Hyphenated words are split.
    """
    if stopwords is None:
        stopwords = default_stopwords()
    if lemmas is None:
        lemmas = default_lemmas()
    out: list[str] = []
    for raw in text.split():
        core = raw.strip(_STRIP_CHARS)
        if core.startswith(CRR_TOKEN_PREFIX):
            out.append(core)
            continue
        for piece in _WORD_RE.findall(core.lower().replace("-", " ")):
            if piece.isdigit() or piece in stopwords:
                continue
            out.append(lemmas.get(piece, piece))
    return out


def _gram_size(token: str) -> int:
    return token.count("_") + 1


def _mergeable(token: str) -> bool:
    return not token.startswith(CRR_TOKEN_PREFIX)


def _collocation_pass(
    docs: Sequence[Sequence[str]], target_size: int, min_count: int
) -> frozenset[tuple[str, str]]:
    """One merge pass: pairs whose combined gram size is target_size.

    A pair (a, b) is merged when it occurs at least min_count times and both
    conditional probabilities exceed both unconditional ones, all estimated
    over the whole corpus.
    """
    total = sum(len(doc) for doc in docs)
    if total == 0:
        return frozenset()
    uni: Counter[str] = Counter()
    pair: Counter[tuple[str, str]] = Counter()
    for doc in docs:
        uni.update(doc)
        for a, b in zip(doc, doc[1:]):
            if _mergeable(a) and _mergeable(b) and _gram_size(a) + _gram_size(b) == target_size:
                pair[(a, b)] += 1
    merges: set[tuple[str, str]] = set()
    for (a, b), count in pair.items():
        if count < min_count:
            continue
        p_a = uni[a] / total
        p_b = uni[b] / total
        p_b_given_a = count / uni[a]
        p_a_given_b = count / uni[b]
        ceiling = max(p_a, p_b)
        if p_b_given_a > ceiling and p_a_given_b > ceiling:
            merges.add((a, b))
    return frozenset(merges)


def apply_merges(tokens: Sequence[str], merges: frozenset[tuple[str, str]]) -> list[str]:
    """Greedy left-to-right, non-overlapping merge of adjacent token pairs."""
    out: list[str] = []
    i = 0
    while i < len(tokens):
        if i + 1 < len(tokens) and (tokens[i], tokens[i + 1]) in merges:
            out.append(tokens[i] + "_" + tokens[i + 1])
            i += 2
        else:
            out.append(tokens[i])
            i += 1
    return out


def detect_collocations(
    docs: Sequence[Sequence[str]], ngram_max: int, min_count: int
) -> tuple[list[list[str]], tuple[frozenset[tuple[str, str]], ...]]:
    """Merge statistically associated adjacent tokens into n-gram tokens.

    Returns the rewritten documents and the per-pass merge tables (needed to
    replay the same merges on query text).  Bigrams are found first; a second
    pass over the merged corpus, with re-estimated statistics, joins a bigram
    with an adjacent unigram into a trigram.
    """
    if not docs:
        raise ValueError("detect_collocations requires a non-empty corpus")
    current = [list(doc) for doc in docs]
    passes: list[frozenset[tuple[str, str]]] = []
    for target_size in range(2, ngram_max + 1):
        merges = _collocation_pass(current, target_size, min_count)
        passes.append(merges)
        if merges:
            current = [apply_merges(doc, merges) for doc in current]
    return current, tuple(passes)


def prune_by_df(
    docs: Sequence[Sequence[str]], min_df: float, max_df: float
) -> tuple[list[list[str]], dict[str, int], dict[str, int]]:
    """Drop tokens whose document frequency falls outside (min_df, max_df).

    df counts presence (documents containing the token), not term frequency.
    Tokens with df/n_docs strictly below min_df or strictly above max_df are
    removed from every document.  Returns (docs, vocab, df) where vocab maps
    surviving tokens to dense integer ids in sorted token order.
    """
    if not 0.0 < min_df < max_df < 1.0:
        raise ValueError(f"require 0 < min_df < max_df < 1, got ({min_df}, {max_df})")
    n_docs = len(docs)
    df_all: Counter[str] = Counter()
    for doc in docs:
        df_all.update(set(doc))
    kept = {
        token: count
        for token, count in df_all.items()
        if min_df <= count / n_docs <= max_df
    }
    pruned = [[t for t in doc if t in kept] for doc in docs]
    vocab = {token: i for i, token in enumerate(sorted(kept))}
    df = {token: kept[token] for token in sorted(kept)}
    return pruned, vocab, df


@dataclass(frozen=True)
class TokenizedCorpus:
    """Post-pipeline token lists plus the corpus statistics scorers need."""

    doc_ids: tuple[str, ...]
    docs: tuple[tuple[str, ...], ...]
    vocab: dict[str, int]
    df: dict[str, int]
    avgdl: float
    n_docs: int
    merges: tuple[frozenset[tuple[str, str]], ...]
    config: TokenizerConfig

    def tokenize_query(self, text: str) -> list[str]:
        """Run query text through the frozen corpus-time pipeline.

        Uses the corpus-time merge tables rather than re-deriving statistics;
        out-of-vocabulary tokens are kept (scorers treat them as zeros).
        """
        rewritten, _ = extract_crr_tokens(text)
        tokens = tokenize_base(rewritten, self.config.stopwords, self.config.lemmas)
        for merges in self.merges:
            if merges:
                tokens = apply_merges(tokens, merges)
        return tokens


def build_tokenized_corpus(corpus: Corpus, config: TokenizerConfig) -> TokenizedCorpus:
    """Apply the full pipeline to a corpus and compute vocab/df/avgdl."""
    base_docs: list[list[str]] = []
    for finding in corpus.findings:
        rewritten, _ = extract_crr_tokens(finding.text)
        base_docs.append(tokenize_base(rewritten, config.stopwords, config.lemmas))
    if config.ngram_max > 1:
        merged_docs, passes = detect_collocations(
            base_docs, config.ngram_max, config.collocation_min_count
        )
    else:
        merged_docs, passes = base_docs, ()
    pruned, vocab, df = prune_by_df(merged_docs, config.min_df, config.max_df)
    n_docs = len(pruned)
    avgdl = sum(len(doc) for doc in pruned) / n_docs
    return TokenizedCorpus(
        doc_ids=tuple(corpus.ids()),
        docs=tuple(tuple(doc) for doc in pruned),
        vocab=vocab,
        df=df,
        avgdl=avgdl,
        n_docs=n_docs,
        merges=passes,
        config=config,
    )


def save_tokenized(tc: TokenizedCorpus, docs_path: str | Path, stats_path: str | Path) -> None:
    """Persist token lists (JSONL) and corpus statistics (JSON)."""
    with open(docs_path, "w", encoding="utf-8") as fh:
        for doc_id, doc in zip(tc.doc_ids, tc.docs):
            fh.write(json.dumps({"id": doc_id, "tokens": list(doc)}) + "\n")
    stats = {
        "min_df": tc.config.min_df,
        "max_df": tc.config.max_df,
        "ngram_max": tc.config.ngram_max,
        "collocation_min_count": tc.config.collocation_min_count,
        "stopwords": sorted(tc.config.stopwords),
        "lemmas": {k: tc.config.lemmas[k] for k in sorted(tc.config.lemmas)},
        "n_docs": tc.n_docs,
        "avgdl": tc.avgdl,
        "vocab": tc.vocab,
        "df": tc.df,
        "merges": [sorted(list(pair) for pair in merge) for merge in tc.merges],
    }
    with open(stats_path, "w", encoding="utf-8") as fh:
        json.dump(stats, fh, sort_keys=True)
        fh.write("\n")


def load_tokenized(docs_path: str | Path, stats_path: str | Path) -> TokenizedCorpus:
    with open(stats_path, "r", encoding="utf-8") as fh:
        stats = json.load(fh)
    config = TokenizerConfig(
        stopwords=frozenset(stats["stopwords"]),
        lemmas=dict(stats["lemmas"]),
        min_df=stats["min_df"],
        max_df=stats["max_df"],
        ngram_max=stats["ngram_max"],
        collocation_min_count=stats["collocation_min_count"],
    )
    doc_ids: list[str] = []
    docs: list[tuple[str, ...]] = []
    with open(docs_path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                record = json.loads(line)
                doc_ids.append(record["id"])
                docs.append(tuple(record["tokens"]))
    return TokenizedCorpus(
        doc_ids=tuple(doc_ids),
        docs=tuple(docs),
        vocab={k: int(v) for k, v in stats["vocab"].items()},
        df={k: int(v) for k, v in stats["df"].items()},
        avgdl=float(stats["avgdl"]),
        n_docs=int(stats["n_docs"]),
        merges=tuple(frozenset(tuple(p) for p in merge) for merge in stats["merges"]),
        config=config,
    )
