"""Command-line entry point: indexing, querying, evaluation, simulation.

Exit codes: 0 success, 1 computation error, 2 usage or input/artifact error.
Every subcommand accepts --config FILE, a flat key = value text file whose
keys mirror the long flag names (dashes or underscores); explicit flags win
over config values, which win over built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Sequence

from . import corpus as corpus_mod
from . import evaluation as eval_mod
from . import lexical as lexical_mod
from . import retriever as retr_mod
from . import tokenizer as tok_mod
from . import crr as crr_mod
from .corpus import CorpusError, Finding, load_corpus, write_corpus
from .crr import PrefilterConfig
from .dense import EmbeddingError, load_embeddings, normalize, write_embeddings
from .lexical import Bm25Params, LexicalError, Variant, build_lexical_index
from .retriever import Engine, EngineStateError, RetrieverConfig, Scheme
from .tokenizer import TokenizerConfig, build_tokenized_corpus

_USAGE_ERRORS = (
    OSError,
    CorpusError,
    EmbeddingError,
    LexicalError,
    EngineStateError,
    argparse.ArgumentTypeError,
)


class ConfigError(ValueError):
    """Raised for unreadable --config files."""


def _parse_config(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, value = stripped.partition("=")
        values[key.strip().replace("-", "_")] = value.strip().strip('"')
    return values


def _coerce(value: str):
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value


def _apply_config(args: argparse.Namespace, defaults: dict) -> argparse.Namespace:
    """Fill unset (None) options from the config file, then from defaults."""
    config = _parse_config(args.config) if getattr(args, "config", None) else {}
    for key, value in config.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {key!r}")
    for key, default in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, _coerce(config[key]) if key in config else default)
    return args


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _scheme_list(text: str) -> tuple[Scheme, ...]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if part:
            try:
                out.append(Scheme(part))
            except ValueError:
                raise argparse.ArgumentTypeError(f"unknown scheme {part!r}")
    return tuple(out)


# ---------------------------------------------------------------------------
# gen-corpus
# ---------------------------------------------------------------------------

_GEN_DEFAULTS = {"n": 1000, "seed": 0, "clusters": 50, "labels_out": None, "measures_out": None}


def cmd_gen_corpus(args: argparse.Namespace) -> int:
    corpus = corpus_mod.generate_synthetic_corpus(args.n, args.seed, args.clusters)
    write_corpus(corpus, args.out)
    if args.labels_out:
        relevance = corpus_mod.synthetic_relevance(corpus)
        with open(args.labels_out, "w", encoding="utf-8") as fh:
            for fid in corpus.ids():
                relevant = sorted(relevance[fid])
                if relevant:
                    fh.write(
                        json.dumps({"query_id": fid, "relevant_ids": relevant}, sort_keys=True)
                        + "\n"
                    )
    if args.measures_out:
        measures = corpus_mod.generate_synthetic_measures(corpus, args.seed)
        corpus_mod.write_measures(measures, args.measures_out)
    print(f"wrote {len(corpus)} findings to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# index
# ---------------------------------------------------------------------------

_INDEX_DEFAULTS = {
    "variant": "bm25l",
    "k1": 1.6,
    "b": 0.75,
    "delta": None,
    "min_df": 0.0005,
    "max_df": 0.9,
    "ngram": 3,
    "collocation_min_count": 5,
    "stopwords": None,
    "lemmas": None,
    "embeddings": None,
    "articles": None,
}

MANIFEST_NAME = "manifest.json"


def _tokenizer_config_from_args(args: argparse.Namespace) -> TokenizerConfig:
    kwargs = {}
    if args.stopwords:
        kwargs["stopwords"] = tok_mod.load_stopwords(args.stopwords)
    if args.lemmas:
        kwargs["lemmas"] = tok_mod.load_lemmas(args.lemmas)
    return TokenizerConfig(
        min_df=args.min_df,
        max_df=args.max_df,
        ngram_max=args.ngram,
        collocation_min_count=args.collocation_min_count,
        **kwargs,
    )


def cmd_index(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.corpus)
    variant = Variant(args.variant)
    delta = args.delta
    if delta is None:
        delta = lexical_mod.default_params(variant).delta
    params = Bm25Params(k1=args.k1, b=args.b, delta=delta)
    config = _tokenizer_config_from_args(args)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tokenized = build_tokenized_corpus(corpus, config)
    index = build_lexical_index(tokenized, variant, params)

    write_corpus(corpus, out_dir / "corpus.jsonl")
    tok_mod.save_tokenized(tokenized, out_dir / "tokens.jsonl", out_dir / "stats.json")
    lexical_mod.save_lexical_index(index, out_dir / "index.lxix")
    has_embeddings = False
    if args.embeddings:
        embeddings = normalize(load_embeddings(args.embeddings, set(corpus.ids())))
        write_embeddings(embeddings.reindex(corpus.ids()), out_dir / "embeddings.emb1")
        has_embeddings = True
    has_articles = False
    if args.articles:
        refs = crr_mod.load_article_list(args.articles)
        with open(out_dir / "articles.txt", "w", encoding="utf-8") as fh:
            for ref in sorted(refs):
                fh.write(ref.canonical + "\n")
        has_articles = True
    manifest = {
        "variant": variant.value,
        "k1": params.k1,
        "b": params.b,
        "delta": params.delta,
        "min_df": config.min_df,
        "max_df": config.max_df,
        "ngram_max": config.ngram_max,
        "collocation_min_count": config.collocation_min_count,
        "has_embeddings": has_embeddings,
        "has_articles": has_articles,
        "n_docs": len(corpus),
    }
    with open(out_dir / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True)
        fh.write("\n")
    print(f"indexed {len(corpus)} findings into {out_dir}")
    return 0


def _load_engine(index_dir: str | Path) -> Engine:
    index_dir = Path(index_dir)
    manifest_path = index_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise EngineStateError(f"no index manifest at {manifest_path}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    corpus = load_corpus(index_dir / "corpus.jsonl")
    tokenized = tok_mod.load_tokenized(index_dir / "tokens.jsonl", index_dir / "stats.json")
    index = lexical_mod.load_lexical_index(index_dir / "index.lxix")
    if index.n_docs != len(corpus):
        raise EngineStateError("index artifacts do not match the stored corpus")
    embeddings = None
    if manifest.get("has_embeddings"):
        embeddings = normalize(
            load_embeddings(index_dir / "embeddings.emb1", set(corpus.ids()))
        ).reindex(corpus.ids())
    tree = crr_mod.CrrTree.from_refs(corpus.all_crr_refs())
    if manifest.get("has_articles"):
        for ref in crr_mod.load_article_list(index_dir / "articles.txt"):
            tree.add(ref)
    return Engine(
        corpus=corpus,
        tokenized=tokenized,
        index=index,
        embeddings=embeddings,
        tree=tree,
    )


# ---------------------------------------------------------------------------
# query
# ---------------------------------------------------------------------------

_QUERY_DEFAULTS = {
    "scheme": "bm25l",
    "k": 10,
    "prefilter": False,
    "jaccard_min": 1.0 / 3.0,
    "hier_min": 1.0 / 3.0,
    "seed": 0,
    "query": None,
    "queries": None,
    "query_embeddings": None,
    "measures": None,
    "threads": 1,
}


def _query_findings(args: argparse.Namespace) -> list[Finding]:
    if (args.query is None) == (args.queries is None):
        raise EngineStateError("provide exactly one of --query or --queries")
    if args.query is not None:
        _, refs = tok_mod.extract_crr_tokens(args.query)
        return [Finding(id="Q1", text=args.query, crr_refs=frozenset(refs))]
    return list(load_corpus(args.queries).findings)


def cmd_query(args: argparse.Namespace) -> int:
    engine = _load_engine(args.index_dir)
    if args.query_embeddings is not None:
        qe = load_embeddings(args.query_embeddings, set())
        engine.query_embeddings = normalize(qe)
    queries = _query_findings(args)
    pf = (
        PrefilterConfig(jaccard_min=args.jaccard_min, hier_min=args.hier_min)
        if args.prefilter
        else None
    )
    cfg = RetrieverConfig(scheme=Scheme(args.scheme), k=args.k, prefilter=pf, seed=args.seed)
    measures = corpus_mod.load_measures(args.measures) if args.measures else None
    for result in retr_mod.retrieve_batch(queries, engine, cfg, threads=args.threads):
        payload = result.to_dict()
        if measures is not None:
            referenced = sorted({m for hit in result.hits for m in hit.measure_ids})
            payload["measure_texts"] = {
                mid: measures[mid].text for mid in referenced if mid in measures
            }
        print(json.dumps(payload, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

_EVAL_DEFAULTS = {
    "schemes": None,
    "m": 100,
    "reps": 1000,
    "k": 100,
    "seed": 0,
    "prefilter": False,
    "jaccard_min": 1.0 / 3.0,
    "hier_min": 1.0 / 3.0,
}


def _eval_engines(base: Engine, schemes: Sequence[Scheme]) -> dict[Scheme, Engine]:
    """Per-scheme engines sharing tokenization work across identical profiles."""
    tokenized_cache: dict[int, tok_mod.TokenizedCorpus] = {}
    engines: dict[Scheme, Engine] = {}
    for scheme in schemes:
        variant = retr_mod.scheme_variant(scheme)
        if variant is None:
            engines[scheme] = base
            continue
        config = retr_mod.scheme_tokenizer_config(scheme)
        key = config.ngram_max
        if key not in tokenized_cache:
            tokenized_cache[key] = build_tokenized_corpus(base.corpus, config)
        tokenized = tokenized_cache[key]
        engines[scheme] = Engine(
            corpus=base.corpus,
            tokenized=tokenized,
            index=build_lexical_index(tokenized, variant),
            embeddings=base.embeddings,
            query_embeddings=base.query_embeddings,
            tree=base.tree,
        )
    return engines


def _write_eval_csv(path: Path, rows: list[tuple[str, float, float]], k: int) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", f"map@{k}", f"mrr@{k}", "avg_score"])
        for scheme, map_mean, mrr_mean in rows:
            map_col, mrr_col = f"{map_mean:.6f}", f"{mrr_mean:.6f}"
            # avg_score is the mean of the printed columns, exactly
            avg_col = f"{(float(map_col) + float(mrr_col)) / 2:.7f}"
            writer.writerow([scheme, map_col, mrr_col, avg_col])


def cmd_eval(args: argparse.Namespace) -> int:
    base = _load_engine(args.index_dir)
    labeled = eval_mod.load_labeled_queries(args.labels)
    for lq in labeled:
        if lq.query_id not in base.corpus.index_by_id:
            raise CorpusError(f"label query id {lq.query_id!r} not in corpus")
        for rid in sorted(lq.identified_relevant):
            if rid not in base.corpus.index_by_id:
                raise CorpusError(f"label relevant id {rid!r} not in corpus")
    if args.schemes is None:
        schemes = [Scheme.RANDOM, Scheme.TFIDF, Scheme.BM25, Scheme.BM25PLUS,
                   Scheme.BM25L, Scheme.BM25LPLUS]
        if base.embeddings is not None:
            schemes += [Scheme.DENSE, Scheme.HYBRID]
    else:
        schemes = list(args.schemes)
    engines = _eval_engines(base, schemes)
    mc = eval_mod.McConfig(m=args.m, repetitions=args.reps, k=args.k, seed=args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    variants: list[tuple[str, PrefilterConfig | None]] = [("eval.csv", None)]
    if args.prefilter:
        variants.append(
            ("eval_prefilter.csv", PrefilterConfig(jaccard_min=args.jaccard_min, hier_min=args.hier_min))
        )
    for filename, pf in variants:
        rows = []
        detail: dict = {}
        for scheme in schemes:
            cfg = RetrieverConfig(scheme=scheme, k=args.k, prefilter=pf, seed=args.seed)
            report = eval_mod.evaluate_labeled_queries(labeled, engines[scheme], cfg, mc)
            rows.append((scheme.value, report.map_mean, report.mrr_mean))
            detail[scheme.value] = {
                "map_mean": report.map_mean,
                "mrr_mean": report.mrr_mean,
                "avg_score": report.avg_score,
                "per_query": {
                    qid: {
                        "map_mean": qs.map_mean,
                        "mrr_mean": qs.mrr_mean,
                        "map_std": qs.map_std,
                        "mrr_std": qs.mrr_std,
                        "repetitions": qs.repetitions,
                    }
                    for qid, qs in report.per_query.items()
                },
            }
        _write_eval_csv(out_dir / filename, rows, args.k)
        json_path = (out_dir / filename).with_suffix(".json")
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump({"k": args.k, "m": args.m, "repetitions": args.reps,
                       "prefilter": pf is not None, "schemes": detail}, fh, sort_keys=True)
            fh.write("\n")
        print(f"wrote {out_dir / filename}")
        print(f"wrote {json_path}")
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

_SIM_DEFAULTS = {
    "db_size": 7000,
    "g_hat": 3,
    "g_tilde": (5, 10, 15, 20),
    "m": 100,
    "reps": 1000,
    "k": 100,
    "mc_runs": 200,
    "bias_w2": 10.0,
    "bias_w3": 3.0,
    "seed": 0,
    "plot_data": None,
}


def cmd_simulate(args: argparse.Namespace) -> int:
    g_tilde = args.g_tilde if isinstance(args.g_tilde, tuple) else _int_list(str(args.g_tilde))
    spec = eval_mod.SimSpec(
        db_size=args.db_size,
        g_hat=args.g_hat,
        g_tilde_values=g_tilde,
        mc_runs=args.mc_runs,
        bias_weights=(args.bias_w2, args.bias_w3),
        seed=args.seed,
    )
    mc = eval_mod.McConfig(m=args.m, repetitions=args.reps, k=args.k, seed=args.seed)
    cells = eval_mod.simulate_bounds(spec, mc)
    plot_path = args.plot_data or Path(args.out).with_suffix(".plot.json")
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["system", "g_tilde", "map", "mrr", "map_se", "mrr_se"])
        for cell in cells:
            writer.writerow(
                [
                    cell.system,
                    cell.g_tilde,
                    f"{cell.map_mean:.6f}",
                    f"{cell.mrr_mean:.6f}",
                    f"{cell.map_se:.6f}",
                    f"{cell.mrr_se:.6f}",
                ]
            )
    by_system: dict[str, dict[str, list[float]]] = {}
    for cell in cells:
        entry = by_system.setdefault(cell.system, {"g_tilde": [], "map": [], "mrr": []})
        entry["g_tilde"].append(cell.g_tilde)
        entry["map"].append(cell.map_mean)
        entry["mrr"].append(cell.mrr_mean)
    with open(plot_path, "w", encoding="utf-8") as fh:
        json.dump({"systems": by_system}, fh, sort_keys=True)
        fh.write("\n")
    for cell in cells:
        print(
            f"{cell.system} g_tilde={cell.g_tilde} "
            f"map={cell.map_mean:.4f} mrr={cell.mrr_mean:.4f}"
        )
    return 0


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------


def _add_config_flag(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat key = value config file; flags win on conflict")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regir",
        description="Hybrid lexical/semantic retrieval over regulatory findings",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("gen-corpus", help="generate a clustered synthetic corpus")
    gen.add_argument("--out", required=True, help="output corpus JSONL path")
    gen.add_argument("--n", type=int, default=None, help="number of findings (default 1000)")
    gen.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    gen.add_argument("--clusters", type=int, default=None, help="cluster count (default 50)")
    gen.add_argument("--labels-out", default=None, help="also write ground-truth labels JSONL")
    gen.add_argument("--measures-out", default=None, help="also write a measures JSONL")
    _add_config_flag(gen)
    gen.set_defaults(func=cmd_gen_corpus, defaults=_GEN_DEFAULTS)

    index = subs.add_parser("index", help="build retrieval artifacts from a corpus")
    index.add_argument("--corpus", required=True, help="corpus JSONL path")
    index.add_argument("--out-dir", required=True, help="artifact output directory")
    index.add_argument("--variant", default=None, choices=[v.value for v in Variant],
                       help="lexical scorer (default bm25l)")
    index.add_argument("--k1", type=float, default=None, help="BM25 k1 (default 1.6)")
    index.add_argument("--b", type=float, default=None, help="BM25 b (default 0.75)")
    index.add_argument("--delta", type=float, default=None,
                       help="BM25+/BM25L shift (default per variant: 1.0 / 0.5)")
    index.add_argument("--min-df", type=float, default=None,
                       help="min document-frequency fraction (default 0.0005)")
    index.add_argument("--max-df", type=float, default=None,
                       help="max document-frequency fraction (default 0.9)")
    index.add_argument("--ngram", type=int, default=None, choices=[1, 2, 3],
                       help="max collocation n-gram order (default 3)")
    index.add_argument("--collocation-min-count", type=int, default=None,
                       help="min pair count for a collocation merge (default 5)")
    index.add_argument("--stopwords", default=None, help="custom stopword list file")
    index.add_argument("--lemmas", default=None, help="custom lemma table file (TSV)")
    index.add_argument("--embeddings", default=None,
                       help="embedding file (EMB1 or JSONL) to normalize and persist")
    index.add_argument("--articles", default=None,
                       help="CRR article list file (one canonical reference per line)")
    _add_config_flag(index)
    index.set_defaults(func=cmd_index, defaults=_INDEX_DEFAULTS)

    query = subs.add_parser("query", help="rank the corpus against queries")
    query.add_argument("--index-dir", required=True, help="artifact directory from `regir index`")
    query.add_argument("--query", default=None, help="inline query text")
    query.add_argument("--queries", default=None, help="queries JSONL file (finding records)")
    query.add_argument("--scheme", default=None, choices=[s.value for s in Scheme],
                       help="retrieval scheme (default bm25l)")
    query.add_argument("--k", type=int, default=None, help="results per query (default 10)")
    query.add_argument("--prefilter", action=argparse.BooleanOptionalAction, default=None,
                       help="CRR-overlap prefilter (default off)")
    query.add_argument("--jaccard-min", type=float, default=None,
                       help="prefilter Jaccard threshold (default 1/3)")
    query.add_argument("--hier-min", type=float, default=None,
                       help="prefilter hierarchical threshold (default 1/3)")
    query.add_argument("--query-embeddings", default=None,
                       help="embedding file for query findings (dense/hybrid schemes)")
    query.add_argument("--measures", default=None, help="measures JSONL to attach texts")
    query.add_argument("--seed", type=int, default=None, help="seed for the random scheme")
    query.add_argument("--threads", type=int, default=None, help="worker threads (default 1)")
    _add_config_flag(query)
    query.set_defaults(func=cmd_query, defaults=_QUERY_DEFAULTS)

    ev = subs.add_parser("eval", help="Monte-Carlo evaluation over labeled queries")
    ev.add_argument("--index-dir", required=True, help="artifact directory from `regir index`")
    ev.add_argument("--labels", required=True, help="labels JSONL file")
    ev.add_argument("--out-dir", required=True, help="report output directory")
    ev.add_argument("--schemes", type=_scheme_list, default=None,
                    help="comma-separated schemes (default: all feasible)")
    ev.add_argument("--m", type=int, default=None, help="down-sample size (default 100)")
    ev.add_argument("--reps", type=int, default=None, help="Monte-Carlo repetitions (default 1000)")
    ev.add_argument("--k", type=int, default=None, help="metric cutoff (default 100)")
    ev.add_argument("--seed", type=int, default=None, help="sampling seed (default 0)")
    ev.add_argument("--prefilter", action=argparse.BooleanOptionalAction, default=None,
                    help="also evaluate with the CRR prefilter (second CSV)")
    ev.add_argument("--jaccard-min", type=float, default=None,
                    help="prefilter Jaccard threshold (default 1/3)")
    ev.add_argument("--hier-min", type=float, default=None,
                    help="prefilter hierarchical threshold (default 1/3)")
    _add_config_flag(ev)
    ev.set_defaults(func=cmd_eval, defaults=_EVAL_DEFAULTS)

    sim = subs.add_parser("simulate", help="upper-bound simulation for partial labels")
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.add_argument("--plot-data", default=None,
                     help="plot data JSON path (default: <out>.plot.json)")
    sim.add_argument("--db-size", type=int, default=None, help="artificial corpus size (default 7000)")
    sim.add_argument("--g-hat", type=int, default=None, help="identified relevant count (default 3)")
    sim.add_argument("--g-tilde", type=_int_list, default=None,
                     help="comma-separated unidentified counts (default 5,10,15,20)")
    sim.add_argument("--m", type=int, default=None, help="down-sample size (default 100)")
    sim.add_argument("--reps", type=int, default=None, help="repetitions per run (default 1000)")
    sim.add_argument("--k", type=int, default=None, help="metric cutoff (default 100)")
    sim.add_argument("--mc-runs", type=int, default=None, help="simulation runs (default 200)")
    sim.add_argument("--bias-w2", type=float, default=None, help="omega2 relevance weight (default 10)")
    sim.add_argument("--bias-w3", type=float, default=None, help="omega3 relevance weight (default 3)")
    sim.add_argument("--seed", type=int, default=None, help="simulation seed (default 0)")
    _add_config_flag(sim)
    sim.set_defaults(func=cmd_simulate, defaults=_SIM_DEFAULTS)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config(args, args.defaults)
        return args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # computation errors
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
