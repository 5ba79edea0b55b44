"""CLI subcommands: artifacts, exit codes, determinism, config files."""

import csv
import io
import json
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

import numpy as np
import pytest

from regir.cli import main
from regir.corpus import load_corpus
from regir.dense import EmbeddingSet, write_embeddings


def run_cli(*args):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main([str(a) for a in args])
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A generated corpus plus a default index, shared across CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    corpus_path = root / "corpus.jsonl"
    labels_path = root / "labels.jsonl"
    measures_path = root / "measures.jsonl"
    code, _, _ = run_cli(
        "gen-corpus", "--out", corpus_path, "--n", 120, "--seed", 5, "--clusters", 12,
        "--labels-out", labels_path, "--measures-out", measures_path,
    )
    assert code == 0
    corpus = load_corpus(corpus_path)
    emb_path = root / "embeddings.emb1"
    rng = np.random.default_rng(0)
    write_embeddings(EmbeddingSet(tuple(corpus.ids()), rng.normal(size=(len(corpus), 8))), emb_path)
    index_dir = root / "index"
    code, _, _ = run_cli(
        "index", "--corpus", corpus_path, "--out-dir", index_dir, "--embeddings", emb_path
    )
    assert code == 0
    return root


class TestGenCorpus:
    def test_deterministic_outputs(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert run_cli("gen-corpus", "--out", a, "--n", 40, "--seed", 3, "--clusters", 4)[0] == 0
        assert run_cli("gen-corpus", "--out", b, "--n", 40, "--seed", 3, "--clusters", 4)[0] == 0
        assert a.read_bytes() == b.read_bytes()

    def test_labels_reference_corpus_ids(self, workspace):
        corpus = load_corpus(workspace / "corpus.jsonl")
        with open(workspace / "labels.jsonl", encoding="utf-8") as fh:
            for line in fh:
                record = json.loads(line)
                assert record["query_id"] in corpus.index_by_id
                assert all(r in corpus.index_by_id for r in record["relevant_ids"])


class TestIndex:
    def test_artifacts_written(self, workspace):
        index_dir = workspace / "index"
        for name in ["manifest.json", "corpus.jsonl", "tokens.jsonl", "stats.json",
                     "index.lxix", "embeddings.emb1"]:
            assert (index_dir / name).exists()

    def test_missing_corpus_exits_two_with_path(self, tmp_path):
        code, _, err = run_cli("index", "--corpus", tmp_path / "nope.jsonl", "--out-dir", tmp_path / "i")
        assert code == 2
        assert "nope.jsonl" in err

    def test_articles_file_copied_and_merged(self, workspace, tmp_path):
        articles = tmp_path / "articles.txt"
        articles.write_text("480(1)(a)\n481\n", encoding="utf-8")
        out = tmp_path / "index_art"
        code, _, _ = run_cli(
            "index", "--corpus", workspace / "corpus.jsonl", "--out-dir", out,
            "--articles", articles,
        )
        assert code == 0
        assert (out / "articles.txt").read_text(encoding="utf-8") == "480(1)(a)\n481\n"
        from regir.cli import _load_engine
        from regir.crr import parse_crr_ref
        engine = _load_engine(out)
        assert parse_crr_ref("480(1)(a)") in engine.tree
        assert parse_crr_ref("480(1)") in engine.tree

    def test_reindex_is_byte_identical(self, workspace, tmp_path):
        other = tmp_path / "index2"
        code, _, _ = run_cli(
            "index", "--corpus", workspace / "corpus.jsonl", "--out-dir", other,
            "--embeddings", workspace / "embeddings.emb1",
        )
        assert code == 0
        for name in ["manifest.json", "corpus.jsonl", "tokens.jsonl", "stats.json",
                     "index.lxix", "embeddings.emb1"]:
            assert (other / name).read_bytes() == (workspace / "index" / name).read_bytes()


class TestQuery:
    def test_inline_query_finds_identical_doc(self, workspace):
        corpus = load_corpus(workspace / "corpus.jsonl")
        target = corpus.findings[7]
        code, out, _ = run_cli(
            "query", "--index-dir", workspace / "index", "--query", target.text,
            "--scheme", "bm25l", "--k", 5,
        )
        assert code == 0
        payload = json.loads(out.splitlines()[0])
        assert payload["hits"][0]["id"] == target.id
        assert payload["scheme"] == "bm25l"

    def test_k10_is_prefix_of_k100(self, workspace):
        corpus = load_corpus(workspace / "corpus.jsonl")
        text = corpus.findings[3].text
        _, out10, _ = run_cli("query", "--index-dir", workspace / "index", "--query", text, "--k", 10)
        _, out100, _ = run_cli("query", "--index-dir", workspace / "index", "--query", text, "--k", 100)
        ids10 = [h["id"] for h in json.loads(out10)["hits"]]
        ids100 = [h["id"] for h in json.loads(out100)["hits"]]
        assert ids100[:10] == ids10

    def test_hybrid_without_embeddings_names_artifact(self, workspace, tmp_path):
        bare = tmp_path / "bare_index"
        code, _, _ = run_cli("index", "--corpus", workspace / "corpus.jsonl", "--out-dir", bare)
        assert code == 0
        code, _, err = run_cli(
            "query", "--index-dir", bare, "--query", "capital requirement", "--scheme", "hybrid"
        )
        assert code == 2
        assert "embedding" in err.lower()

    def test_output_deterministic(self, workspace):
        args = ("query", "--index-dir", workspace / "index", "--query",
                "internal model deficiency", "--scheme", "random", "--seed", 9, "--k", 20)
        assert run_cli(*args)[1] == run_cli(*args)[1]

    def test_queries_file_and_measures(self, workspace, tmp_path):
        corpus = load_corpus(workspace / "corpus.jsonl")
        qfile = tmp_path / "queries.jsonl"
        with open(qfile, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"id": "Q1", "text": corpus.findings[0].text}) + "\n")
            fh.write(json.dumps({"id": "Q2", "text": corpus.findings[50].text}) + "\n")
        code, out, _ = run_cli(
            "query", "--index-dir", workspace / "index", "--queries", qfile,
            "--measures", workspace / "measures.jsonl", "--k", 3,
        )
        assert code == 0
        lines = [json.loads(line) for line in out.splitlines()]
        assert [p["query_id"] for p in lines] == ["Q1", "Q2"]
        for payload in lines:
            for hit in payload["hits"]:
                for mid in hit["measure_ids"]:
                    assert mid in payload["measure_texts"]

    def test_prefilter_flag(self, workspace):
        corpus = load_corpus(workspace / "corpus.jsonl")
        text = corpus.findings[4].text
        code, out, _ = run_cli(
            "query", "--index-dir", workspace / "index", "--query", text,
            "--prefilter", "--k", 5,
        )
        assert code == 0
        assert json.loads(out)["hits"]

    def test_exactly_one_query_source_required(self, workspace):
        code, _, err = run_cli("query", "--index-dir", workspace / "index")
        assert code == 2


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def eval_out(workspace, tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("eval_out")
    labels_small = out_dir / "labels5.jsonl"
    lines = (workspace / "labels.jsonl").read_text(encoding="utf-8").splitlines()
    labels_small.write_text("\n".join(lines[:5]) + "\n", encoding="utf-8")
    code, _, _ = run_cli(
        "eval", "--index-dir", workspace / "index", "--labels", labels_small,
        "--out-dir", out_dir, "--schemes", "random,bm25,bm25lplus",
        "--m", 30, "--reps", 25, "--k", 20, "--prefilter",
    )
    assert code == 0
    return out_dir


class TestEval:
    def test_csv_layout_and_avg_score(self, eval_out):
        rows = read_csv(eval_out / "eval.csv")
        assert [row["model"] for row in rows] == ["random", "bm25", "bm25lplus"]
        for row in rows:
            avg = (float(row["map@20"]) + float(row["mrr@20"])) / 2
            assert float(row["avg_score"]) == pytest.approx(avg, abs=1e-12)

    def test_random_scores_below_lexical(self, eval_out):
        rows = {row["model"]: row for row in read_csv(eval_out / "eval.csv")}
        assert float(rows["random"]["map@20"]) < float(rows["bm25"]["map@20"])

    def test_prefilter_adds_second_csv(self, eval_out):
        assert (eval_out / "eval_prefilter.csv").exists()
        rows = read_csv(eval_out / "eval_prefilter.csv")
        assert len(rows) == 3

    def test_json_reports_mirror_csv(self, eval_out):
        for name in ("eval", "eval_prefilter"):
            payload = json.loads((eval_out / f"{name}.json").read_text(encoding="utf-8"))
            rows = {row["model"]: row for row in read_csv(eval_out / f"{name}.csv")}
            assert set(payload["schemes"]) == set(rows)
            for scheme, entry in payload["schemes"].items():
                assert float(rows[scheme]["map@20"]) == pytest.approx(entry["map_mean"], abs=5e-7)
                assert entry["per_query"]
                for stats in entry["per_query"].values():
                    assert stats["repetitions"] == 25

    def test_unresolved_label_id_errors(self, workspace, tmp_path):
        bad = tmp_path / "bad_labels.jsonl"
        bad.write_text(json.dumps({"query_id": "GHOST", "relevant_ids": ["SYN-000-00000"]}) + "\n")
        code, _, err = run_cli(
            "eval", "--index-dir", workspace / "index", "--labels", bad, "--out-dir", tmp_path
        )
        assert code == 2
        assert "GHOST" in err


class TestSimulate:
    def test_shape_and_determinism(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        common = ("simulate", "--db-size", 400, "--m", 40, "--reps", 60, "--k", 40,
                  "--mc-runs", 3, "--seed", 2)
        code, _, _ = run_cli(*common, "--out", a, "--plot-data", tmp_path / "plot.json")
        assert code == 0
        rows = read_csv(a)
        assert len(rows) == 12  # 3 systems x 4 default g_tilde values
        assert {row["system"] for row in rows} == {"omega1", "omega2", "omega3"}
        code, _, _ = run_cli(*common, "--out", b)
        assert code == 0
        assert a.read_bytes() == b.read_bytes()
        plot = json.loads((tmp_path / "plot.json").read_text())
        assert set(plot["systems"]) == {"omega1", "omega2", "omega3"}

    def test_invalid_spec_errors(self, tmp_path):
        code, _, err = run_cli(
            "simulate", "--out", tmp_path / "x.csv", "--db-size", 5, "--g-tilde", "10"
        )
        assert code == 1


class TestConfigFile:
    def test_config_supplies_defaults_and_flags_win(self, workspace, tmp_path):
        corpus = load_corpus(workspace / "corpus.jsonl")
        config = tmp_path / "run.cfg"
        # the workspace index holds a bm25l-variant index, so the config
        # scheme must map onto it
        config.write_text("k = 7\nscheme = bm25lplus\n", encoding="utf-8")
        _, out, _ = run_cli(
            "query", "--index-dir", workspace / "index", "--query", corpus.findings[0].text,
            "--config", config,
        )
        payload = json.loads(out)
        assert payload["k"] == 7 and payload["scheme"] == "bm25lplus"
        _, out, _ = run_cli(
            "query", "--index-dir", workspace / "index", "--query", corpus.findings[0].text,
            "--config", config, "--k", 3,
        )
        payload = json.loads(out)
        assert payload["k"] == 3 and payload["scheme"] == "bm25lplus"

    def test_unknown_config_key_exits_two(self, workspace, tmp_path):
        config = tmp_path / "bad.cfg"
        config.write_text("zzz = 1\n", encoding="utf-8")
        code, _, err = run_cli(
            "query", "--index-dir", workspace / "index", "--query", "x", "--config", config
        )
        assert code == 2
        assert "zzz" in err

    def test_usage_error_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["query", "--scheme", "nonsense"])
        assert exc.value.code == 2
