"""Retrieval metrics and the Monte-Carlo evaluation for partially labeled data.

When only a subset of a query's truly relevant findings is labeled, ranking
the full corpus punishes a system for surfacing unlabeled-but-relevant
documents.  The down-sampling harness (``mc_validate``) instead draws many
small uniform samples from the non-labeled pool, adds the labeled relevants
back in, evaluates retrieval on each down-sampled corpus, and averages: the
fewer unlabeled relevants a sample is likely to contain, the closer the
average gets to the system's true quality.

``simulate_bounds`` quantifies the residual penalty on an artificial corpus
where the unlabeled relevant set is known by construction: a perfect system
that ranks unlabeled relevants above labeled ones (the worst case for the
harness) plus two label-biased samplers, evaluated across a grid of
unlabeled-set sizes.  The resulting means are the attainable upper bounds
for scores measured through the harness.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import AbstractSet, Callable, Sequence

import numpy as np

from .crr import prefilter
from .retriever import Engine, RetrieverConfig, candidate_scores, compute_score_rows

RankerFn = Callable[[str, Sequence[str], np.random.Generator], Sequence[str]]

SIM_SYSTEMS = ("omega1", "omega2", "omega3")


def average_precision_at_k(ranking: Sequence[str], relevant: AbstractSet[str], k: int) -> float:
    """AP@k: mean precision at the ranks of retrieved relevant items.

    The denominator is min(|relevant|, k), so a ranking that fills its first
    positions with relevant items scores exactly 1.  Zero when nothing
    relevant appears in the top k.
    """
    if not relevant:
        raise ValueError("relevant set must be non-empty")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    hits = 0
    total = 0.0
    for rank, fid in enumerate(ranking[:k], start=1):
        if fid in relevant:
            hits += 1
            total += hits / rank
    return total / min(len(relevant), k)


def reciprocal_rank_at_k(ranking: Sequence[str], relevant: AbstractSet[str], k: int) -> float:
    """RR@k: inverse rank of the first relevant item in the top k, else 0."""
    if not relevant:
        raise ValueError("relevant set must be non-empty")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    for rank, fid in enumerate(ranking[:k], start=1):
        if fid in relevant:
            return 1.0 / rank
    return 0.0


@dataclass(frozen=True)
class LabeledQuery:
    """A test finding and its identified-relevant set (a lower bound on truth)."""

    query_id: str
    identified_relevant: frozenset[str]

    def __post_init__(self) -> None:
        if not self.identified_relevant:
            raise ValueError(f"query {self.query_id!r}: identified_relevant must be non-empty")
        if self.query_id in self.identified_relevant:
            raise ValueError(f"query {self.query_id!r} cannot be its own relevant finding")


def load_labeled_queries(path: str | Path) -> list[LabeledQuery]:
    """Read a labels JSONL file: {"query_id":..., "relevant_ids":[...]}."""
    queries: list[LabeledQuery] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {lineno}: malformed JSON ({exc.msg})") from None
            queries.append(
                LabeledQuery(
                    query_id=str(record["query_id"]),
                    identified_relevant=frozenset(str(r) for r in record["relevant_ids"]),
                )
            )
    return queries


@dataclass(frozen=True)
class McConfig:
    """Down-sampling parameters: sample size m, repetitions M, cutoff k."""

    m: int = 100
    repetitions: int = 1000
    k: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.m < 1 or self.repetitions < 1 or self.k < 1:
            raise ValueError("m, repetitions and k must all be >= 1")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


@dataclass(frozen=True)
class QueryScores:
    """Across-repetition metric aggregates for one labeled query."""

    map_mean: float
    mrr_mean: float
    map_std: float
    mrr_std: float
    repetitions: int


@dataclass(frozen=True)
class EvalReport:
    """Per-query aggregates plus across-query means."""

    per_query: dict[str, QueryScores]
    k: int

    @property
    def map_mean(self) -> float:
        return float(np.mean([qs.map_mean for qs in self.per_query.values()]))

    @property
    def mrr_mean(self) -> float:
        return float(np.mean([qs.mrr_mean for qs in self.per_query.values()]))

    @property
    def avg_score(self) -> float:
        return (self.map_mean + self.mrr_mean) / 2.0


def _rep_seed(seed: int, query_id: str, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, zlib.crc32(query_id.encode("utf-8")), rep])


def mc_validate(
    lq: LabeledQuery,
    engine: Engine,
    retr_cfg: RetrieverConfig,
    mc: McConfig,
    ranker: RankerFn | None = None,
) -> EvalReport:
    """Down-sampled Monte-Carlo evaluation of one labeled query.

    Per repetition: draw m findings uniformly without replacement from the
    corpus minus the identified relevants (and minus the query itself), add
    the relevants back, rank the down-sampled corpus, and score MAP@k/MRR@k
    against the identified set.  Repetition r uses a generator seeded from
    (mc.seed, query id, r), so runs are reproducible and order-independent.

    ``ranker`` overrides the engine-backed ranking with a callable
    (query_id, candidate_ids, rng) -> ranked ids; tests use it to plug in
    oracle systems.
    """
    corpus = engine.corpus
    q_pos = corpus.position(lq.query_id)
    rel_pos = np.asarray(sorted(corpus.position(r) for r in lq.identified_relevant), dtype=np.int64)
    excluded = set(rel_pos.tolist()) | {q_pos}
    pool = np.asarray([p for p in range(len(corpus)) if p not in excluded], dtype=np.int64)
    if mc.m > pool.size:
        raise ValueError(f"sample size m={mc.m} exceeds pool size {pool.size}")

    query = corpus.findings[q_pos]
    ids = corpus.ids()
    rows = None
    pf_mask = None
    if ranker is None:
        rows = compute_score_rows(engine, retr_cfg, query)
        if retr_cfg.prefilter is not None:
            if engine.tree is None:
                raise ValueError("prefilter requires an engine with a CRR tree")
            pf_mask = np.zeros(len(corpus), dtype=bool)
            pf_mask[prefilter(query, corpus, engine.tree, retr_cfg.prefilter)] = True

    ap = np.empty(mc.repetitions)
    rr = np.empty(mc.repetitions)
    for rep in range(mc.repetitions):
        rng = np.random.default_rng(_rep_seed(mc.seed, lq.query_id, rep))
        sampled = pool[rng.choice(pool.size, size=mc.m, replace=False)]
        downsampled = np.sort(np.concatenate([sampled, rel_pos]))
        if ranker is not None:
            ranking = list(ranker(lq.query_id, [ids[p] for p in downsampled], rng))
        else:
            candidates = downsampled
            if pf_mask is not None:
                filtered = downsampled[pf_mask[downsampled]]
                if filtered.size or not retr_cfg.prefilter.fallback_on_empty:
                    candidates = filtered
            scores = candidate_scores(retr_cfg, rows, candidates, rng)
            order = np.argsort(-scores, kind="stable")
            ranking = [ids[candidates[i]] for i in order]
        ap[rep] = average_precision_at_k(ranking, lq.identified_relevant, mc.k)
        rr[rep] = reciprocal_rank_at_k(ranking, lq.identified_relevant, mc.k)

    scores_agg = QueryScores(
        map_mean=float(ap.mean()),
        mrr_mean=float(rr.mean()),
        map_std=float(ap.std()),
        mrr_std=float(rr.std()),
        repetitions=mc.repetitions,
    )
    return EvalReport(per_query={lq.query_id: scores_agg}, k=mc.k)


def evaluate_labeled_queries(
    queries: Sequence[LabeledQuery],
    engine: Engine,
    retr_cfg: RetrieverConfig,
    mc: McConfig,
) -> EvalReport:
    """mc_validate across queries; per-query repetition means, then query means."""
    per_query: dict[str, QueryScores] = {}
    for lq in queries:
        report = mc_validate(lq, engine, retr_cfg, mc)
        per_query[lq.query_id] = report.per_query[lq.query_id]
    return EvalReport(per_query=per_query, k=mc.k)


@dataclass(frozen=True)
class SimSpec:
    """Grid for the upper-bound simulation on an artificial corpus.

    ``bias_weights`` are the relative odds of the two label-biased systems
    picking a truly-relevant finding over a non-relevant one; the first must
    exceed the second, which must exceed 1.
    """

    db_size: int = 7000
    g_hat: int = 3
    g_tilde_values: tuple[int, ...] = (5, 10, 15, 20)
    mc_runs: int = 200
    bias_weights: tuple[float, float] = (10.0, 3.0)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.g_hat < 1:
            raise ValueError("g_hat must be >= 1")
        for g in self.g_tilde_values:
            if g < 0 or self.g_hat + g >= self.db_size:
                raise ValueError(f"need g_hat + g_tilde < db_size, got {self.g_hat}+{g}")
        if self.mc_runs < 1:
            raise ValueError("mc_runs must be >= 1")
        w2, w3 = self.bias_weights
        if not w2 > w3 > 1.0:
            raise ValueError(f"bias weights must satisfy w2 > w3 > 1, got {self.bias_weights}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


@dataclass(frozen=True)
class BoundsCell:
    """Across-run mean scores for one (system, unlabeled-set size) pair."""

    system: str
    g_tilde: int
    map_mean: float
    mrr_mean: float
    map_std: float
    mrr_std: float
    mc_runs: int

    @property
    def map_se(self) -> float:
        return self.map_std / math.sqrt(self.mc_runs)

    @property
    def mrr_se(self) -> float:
        return self.mrr_std / math.sqrt(self.mc_runs)


def _metrics_from_relevance(is_rel: np.ndarray, g_hat: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized AP@k / RR@k for a batch of rankings given relevance masks.

    ``is_rel[r, p]`` marks rank p+1 of repetition r as relevant; each row
    contains exactly g_hat relevant positions.
    """
    positions = np.arange(1, is_rel.shape[1] + 1)
    cum = np.cumsum(is_rel, axis=1)
    contrib = np.where(is_rel & (positions <= k), cum / positions, 0.0)
    ap = contrib.sum(axis=1) / min(g_hat, k)
    first = np.argmax(is_rel, axis=1) + 1
    rr = np.where(first <= k, 1.0 / first, 0.0)
    return ap, rr


def _simulate_run(
    system: str, g_tilde: int, spec: SimSpec, mc: McConfig, rng: np.random.Generator
) -> tuple[float, float]:
    """One harness run (mc.repetitions down-samples) against a simulated system.

    A repetition's down-sampled corpus holds m draws from the pool (of which
    a hypergeometric number X are unlabeled relevants; pool members of one
    class are exchangeable) plus the g_hat labeled relevants.  omega1 ranks
    unlabeled relevants, then labeled ones, then the rest; omega2/omega3
    rank by weighted sampling without replacement (Gumbel keys), weight w
    for every truly-relevant member and 1 otherwise.
    """
    m, reps, k, g_hat = mc.m, mc.repetitions, mc.k, spec.g_hat
    pool_size = spec.db_size - g_hat  # corpus minus labeled relevants
    if m > pool_size:
        raise ValueError(f"sample size m={m} exceeds pool size {pool_size}")
    if g_tilde > 0:
        x = rng.hypergeometric(g_tilde, pool_size - g_tilde, m, size=reps)
    else:
        x = np.zeros(reps, dtype=np.int64)
    total = m + g_hat
    positions = np.arange(1, total + 1)
    if system == "omega1":
        is_rel = (positions > x[:, None]) & (positions <= (x + g_hat)[:, None])
    elif system in ("omega2", "omega3"):
        w = spec.bias_weights[0] if system == "omega2" else spec.bias_weights[1]
        # candidate layout per repetition: columns [0, x) unlabeled relevants,
        # [x, m) non-relevant fill, [m, m+g_hat) labeled relevants
        col = np.arange(total)
        weighted = (col[None, :] < x[:, None]) | (col[None, :] >= m)
        keys = np.where(weighted, math.log(w), 0.0) + rng.gumbel(size=(reps, total))
        order = np.argsort(-keys, axis=1, kind="stable")
        is_rel = order >= m
    else:
        raise ValueError(f"unknown simulated system {system!r}")
    ap, rr = _metrics_from_relevance(is_rel, g_hat, k)
    return float(ap.mean()), float(rr.mean())


def simulate_bounds(spec: SimSpec, mc: McConfig) -> list[BoundsCell]:
    """Upper-bound table over (system, g_tilde) cells, averaged across runs."""
    cells: list[BoundsCell] = []
    for sys_index, system in enumerate(SIM_SYSTEMS):
        for g_tilde in spec.g_tilde_values:
            map_runs = np.empty(spec.mc_runs)
            mrr_runs = np.empty(spec.mc_runs)
            for run in range(spec.mc_runs):
                rng = np.random.default_rng(
                    np.random.SeedSequence([spec.seed, sys_index, g_tilde, run])
                )
                map_runs[run], mrr_runs[run] = _simulate_run(system, g_tilde, spec, mc, rng)
            cells.append(
                BoundsCell(
                    system=system,
                    g_tilde=g_tilde,
                    map_mean=float(map_runs.mean()),
                    mrr_mean=float(mrr_runs.mean()),
                    map_std=float(map_runs.std()),
                    mrr_std=float(mrr_runs.std()),
                    mc_runs=spec.mc_runs,
                )
            )
    return cells
