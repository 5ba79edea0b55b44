"""Findings corpus: data model, JSONL ingestion, and synthetic generation.

A corpus is an ordered, validated collection of findings.  Ordering is by
finding id so that matrix rows/columns and score vectors are reproducible
across runs regardless of the order records appear on disk.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .crr import CrrParseError, CrrRef, parse_crr_ref


class CorpusError(ValueError):
    """Raised for malformed corpus files or invalid corpus contents."""


@dataclass(frozen=True)
class Finding:
    """One corpus document: a finding with its regulatory annotations."""

    id: str
    text: str
    crr_refs: frozenset[CrrRef] = frozenset()
    measure_ids: frozenset[str] = frozenset()
    year: int | None = None


@dataclass(frozen=True)
class Measure:
    """A remediation provision linked to findings via their measure_ids."""

    id: str
    text: str


class Corpus:
    """Ordered collection of findings, sorted by id, with stable positions."""

    def __init__(self, findings: Iterable[Finding]) -> None:
        ordered = sorted(findings, key=lambda f: f.id)
        if not ordered:
            raise CorpusError("corpus must contain at least one finding")
        index: dict[str, int] = {}
        for pos, finding in enumerate(ordered):
            if not finding.text:
                raise CorpusError(f"finding {finding.id!r} has empty text")
            if finding.id in index:
                raise CorpusError(f"duplicate finding id {finding.id!r}")
            index[finding.id] = pos
        self.findings: tuple[Finding, ...] = tuple(ordered)
        self.index_by_id: dict[str, int] = index

    @property
    def n(self) -> int:
        return len(self.findings)

    def __len__(self) -> int:
        return len(self.findings)

    def __iter__(self) -> Iterator[Finding]:
        return iter(self.findings)

    def get(self, finding_id: str) -> Finding:
        try:
            return self.findings[self.index_by_id[finding_id]]
        except KeyError:
            raise KeyError(f"unknown finding id {finding_id!r}") from None

    def position(self, finding_id: str) -> int:
        try:
            return self.index_by_id[finding_id]
        except KeyError:
            raise KeyError(f"unknown finding id {finding_id!r}") from None

    def ids(self) -> list[str]:
        return [f.id for f in self.findings]

    def all_crr_refs(self) -> set[CrrRef]:
        refs: set[CrrRef] = set()
        for finding in self.findings:
            refs |= finding.crr_refs
        return refs


def _finding_from_record(record: dict, lineno: int) -> Finding:
    try:
        fid = record["id"]
        text = record["text"]
    except KeyError as exc:
        raise CorpusError(f"line {lineno}: missing key {exc.args[0]!r}") from None
    if not isinstance(fid, str) or not fid:
        raise CorpusError(f"line {lineno}: id must be a non-empty string")
    if not isinstance(text, str) or not text:
        raise CorpusError(f"line {lineno}: finding {fid!r} has empty text")
    try:
        refs = frozenset(parse_crr_ref(r) for r in record.get("crr_refs", []))
    except CrrParseError as exc:
        raise CorpusError(f"line {lineno}: finding {fid!r}: {exc}") from None
    measure_ids = frozenset(str(m) for m in record.get("measure_ids", []))
    year = record.get("year")
    if year is not None and not isinstance(year, int):
        raise CorpusError(f"line {lineno}: finding {fid!r}: year must be an integer")
    return Finding(id=fid, text=text, crr_refs=refs, measure_ids=measure_ids, year=year)


def load_corpus(path: str | Path) -> Corpus:
    """Load a JSONL corpus file (one finding object per line).

    Raises CorpusError naming the offending line for malformed JSON and the
    offending id for duplicates or empty texts.
    """
    findings: list[Finding] = []
    seen: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: malformed JSON ({exc.msg})") from None
            finding = _finding_from_record(record, lineno)
            if finding.id in seen:
                raise CorpusError(
                    f"duplicate finding id {finding.id!r} on lines {seen[finding.id]} and {lineno}"
                )
            seen[finding.id] = lineno
            findings.append(finding)
    return Corpus(findings)


def _finding_to_record(finding: Finding) -> dict:
    record: dict = {
        "id": finding.id,
        "text": finding.text,
        "crr_refs": sorted(r.canonical for r in finding.crr_refs),
        "measure_ids": sorted(finding.measure_ids),
    }
    if finding.year is not None:
        record["year"] = finding.year
    return record


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus as JSONL in id order; load_corpus round-trips it exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        for finding in corpus.findings:
            fh.write(json.dumps(_finding_to_record(finding), sort_keys=True) + "\n")


def load_measures(path: str | Path) -> dict[str, Measure]:
    """Load a measures JSONL file (objects with id and text)."""
    measures: dict[str, Measure] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: malformed JSON ({exc.msg})") from None
            mid = record.get("id")
            text = record.get("text", "")
            if not isinstance(mid, str) or not mid:
                raise CorpusError(f"line {lineno}: measure id must be a non-empty string")
            if mid in measures:
                raise CorpusError(f"duplicate measure id {mid!r} on line {lineno}")
            measures[mid] = Measure(id=mid, text=str(text))
    return measures


def validate_measure_links(corpus: Corpus, measures: Mapping[str, Measure]) -> None:
    """Check that every measure_id referenced by a finding resolves."""
    for finding in corpus.findings:
        for mid in sorted(finding.measure_ids):
            if mid not in measures:
                raise CorpusError(f"finding {finding.id!r} references unknown measure {mid!r}")


# ---------------------------------------------------------------------------
# Synthetic corpus generation
# ---------------------------------------------------------------------------

_BACKGROUND_WORDS = [
    "institution", "internal", "model", "risk", "exposure", "capital",
    "requirement", "estimate", "validation", "rating", "portfolio", "default",
    "approach", "calculation", "parameter", "margin", "conservatism",
    "deficiency", "assessment", "process", "framework", "governance", "data",
    "quality", "documentation", "policy", "review", "control", "methodology",
    "application", "compliance", "threshold", "segment", "pool", "grade",
    "facility", "conversion", "factor", "probability", "loss", "haircut",
    "collateral", "downturn", "period", "observation", "sample", "weighted",
    "average", "outcome", "remediation", "severity", "materiality", "scope",
    "criteria", "definition", "treatment", "adjustment", "floor", "override",
    "calibration", "backtesting", "benchmark", "deviation", "shortfall",
    "provision", "coverage", "migration", "cure", "workout", "recovery",
]

_SYLLABLES = [
    "ba", "co", "du", "fen", "gal", "hi", "jo", "ka", "lu", "mer",
    "nor", "pi", "qua", "rin", "so", "tav", "ul", "vex", "wo", "zen",
]

_REGULATION_SUFFIX = "of Regulation (EU) No 575/2013"
_POINT_LETTERS = "abcdefgh"


def _pseudo_words(count: int) -> list[str]:
    """Deterministic pool of pronounceable nonsense words, no duplicates."""
    words: list[str] = []
    for size in (3, 4):
        for combo in itertools.product(_SYLLABLES, repeat=size):
            words.append("".join(combo))
            if len(words) >= count:
                return words
    raise ValueError(f"cannot build {count} pseudo words")


def _cluster_sizes(n: int, cluster_count: int) -> list[int]:
    base, extra = divmod(n, cluster_count)
    return [base + (1 if c < extra else 0) for c in range(cluster_count)]


def generate_synthetic_corpus(n: int, seed: int, cluster_count: int) -> Corpus:
    """Generate a clustered synthetic findings corpus.

    Findings in the same cluster share a topic vocabulary and a small set of
    CRR references, so ground-truth similarity sets exist by construction
    (see synthetic_relevance).  Clusters come in partner pairs that share a
    third of their topic words and one reference, giving retrieval something
    to confuse; any two same-cluster reference sets still have Jaccard and
    hierarchical similarity of at least 1/3.  Roughly 85% of findings are
    shorter than 512 whitespace tokens.  Pure function of
    (n, seed, cluster_count).
    """
    if cluster_count < 1:
        raise ValueError(f"cluster_count must be >= 1, got {cluster_count}")
    if n < cluster_count:
        raise ValueError(f"n ({n}) must be >= cluster_count ({cluster_count})")
    rng = random.Random(seed)

    vocab_size = max(60, min(250, 12 * cluster_count))
    pool = _pseudo_words(150 + vocab_size)
    rng.shuffle(pool)
    noise_words = pool[:150]
    topic_vocab = pool[150:]

    # every cluster draws topic words from the same vocabulary but with its
    # own Zipf-like preference ranking, so clusters overlap in words and
    # differ in frequency profile
    topic_weights = [1.0 / (rank + 3.0) for rank in range(vocab_size)]
    cum_weights = list(itertools.accumulate(topic_weights))
    topic_words = [rng.sample(topic_vocab, vocab_size) for _ in range(cluster_count)]

    # reference template per cluster: two articles of its own plus one
    # article shared with its partner cluster
    cluster_refs: list[list[CrrRef]] = []
    cluster_measures: list[list[str]] = []
    for c in range(cluster_count):
        article = str(10 + 5 * c)
        own = [CrrRef((article, "1")), CrrRef((article, "2"))]
        if c + 1 < cluster_count or c % 2 == 1:
            shared = CrrRef((str(600 + c // 2), "1"))
        else:  # an unpaired trailing cluster keeps a third article of its own
            shared = CrrRef((article, "3"))
        cluster_refs.append(own + [shared])
        cluster_measures.append([f"M{c:03d}{s}" for s in "ABC"])

    findings: list[Finding] = []
    serial = 0
    for c, size in enumerate(_cluster_sizes(n, cluster_count)):
        for _ in range(size):
            is_long = rng.random() < 0.15
            body_len = rng.randint(540, 900) if is_long else rng.randint(60, 400)
            n_topic = int(0.45 * body_len)
            n_background = int(0.40 * body_len)
            tokens: list[str] = rng.choices(
                topic_words[c], cum_weights=cum_weights, k=n_topic
            )
            tokens += rng.choices(_BACKGROUND_WORDS, k=n_background)
            tokens += rng.choices(noise_words, k=body_len - n_topic - n_background)
            rng.shuffle(tokens)

            refs = list(cluster_refs[c])
            if rng.random() >= 0.6:
                refs = rng.sample(refs, 2)

            sentences: list[str] = []
            i = 0
            while i < len(tokens):
                span = tokens[i : i + rng.randint(8, 14)]
                i += len(span)
                sentences.append(" ".join(span).capitalize() + ".")
            for ref in refs:
                sentences.append(
                    f"This is raised pursuant to Article {ref.canonical} {_REGULATION_SUFFIX}."
                )
            rng.shuffle(sentences)

            findings.append(
                Finding(
                    id=f"SYN-{c:03d}-{serial:05d}",
                    text=" ".join(sentences),
                    crr_refs=frozenset(refs),
                    measure_ids=frozenset(rng.sample(cluster_measures[c], rng.randint(1, 2))),
                    year=rng.randint(2017, 2024),
                )
            )
            serial += 1
    return Corpus(findings)


def synthetic_cluster(finding_id: str) -> int:
    """Cluster index encoded in a synthetic finding id ("SYN-007-00042" -> 7)."""
    parts = finding_id.split("-")
    if len(parts) != 3 or parts[0] != "SYN":
        raise ValueError(f"not a synthetic finding id: {finding_id!r}")
    return int(parts[1])


def synthetic_relevance(corpus: Corpus) -> dict[str, frozenset[str]]:
    """Ground-truth similar sets for a synthetic corpus: cluster co-membership."""
    by_cluster: dict[int, list[str]] = {}
    for finding in corpus.findings:
        by_cluster.setdefault(synthetic_cluster(finding.id), []).append(finding.id)
    relevance: dict[str, frozenset[str]] = {}
    for members in by_cluster.values():
        for fid in members:
            relevance[fid] = frozenset(m for m in members if m != fid)
    return relevance


def generate_synthetic_measures(corpus: Corpus, seed: int = 0) -> dict[str, Measure]:
    """Measure records for every measure id referenced by a synthetic corpus."""
    rng = random.Random(seed)
    measures: dict[str, Measure] = {}
    verbs = ["remediate", "recalibrate", "document", "restrict", "review", "report"]
    for finding in corpus.findings:
        for mid in sorted(finding.measure_ids):
            if mid not in measures:
                measures[mid] = Measure(
                    id=mid,
                    text=f"The institution shall {rng.choice(verbs)} the affected estimates.",
                )
    return measures


def write_measures(measures: Mapping[str, Measure], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for mid in sorted(measures):
            fh.write(json.dumps({"id": mid, "text": measures[mid].text}, sort_keys=True) + "\n")
