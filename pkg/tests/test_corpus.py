"""Corpus model, JSONL round-trips, and the synthetic generator."""

import json

import pytest

from regir.corpus import (
    Corpus,
    CorpusError,
    Finding,
    generate_synthetic_corpus,
    generate_synthetic_measures,
    load_corpus,
    load_measures,
    synthetic_cluster,
    synthetic_relevance,
    validate_measure_links,
    write_corpus,
    write_measures,
)
from regir.crr import parse_crr_ref


def _write_lines(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


class TestLoad:
    def test_three_valid_lines(self, tmp_path):
        path = tmp_path / "c.jsonl"
        _write_lines(path, [
            {"id": "F003", "text": "gamma", "crr_refs": ["92"], "measure_ids": []},
            {"id": "F001", "text": "alpha", "crr_refs": [], "measure_ids": ["M1"]},
            {"id": "F002", "text": "beta", "crr_refs": ["182(1)(f)"], "measure_ids": [], "year": 2019},
        ])
        corpus = load_corpus(path)
        assert corpus.n == 3
        assert corpus.ids() == ["F001", "F002", "F003"]  # sorted by id
        assert corpus.get("F002").year == 2019
        assert parse_crr_ref("182(1)(f)") in corpus.get("F002").crr_refs

    def test_duplicate_id_names_id_and_lines(self, tmp_path):
        path = tmp_path / "c.jsonl"
        _write_lines(path, [
            {"id": "F000", "text": "x"},
            {"id": "F001", "text": "a"},
            {"id": "F002", "text": "b"},
            {"id": "F003", "text": "c"},
            {"id": "F001", "text": "d"},
        ])
        with pytest.raises(CorpusError, match=r"F001.*lines 2 and 5"):
            load_corpus(path)

    def test_malformed_json_reports_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"id": "F001", "text": "a"}\n{nope}\n', encoding="utf-8")
        with pytest.raises(CorpusError, match="line 2"):
            load_corpus(path)

    def test_empty_text_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        _write_lines(path, [{"id": "F001", "text": ""}])
        with pytest.raises(CorpusError, match="F001"):
            load_corpus(path)

    def test_empty_corpus_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text("", encoding="utf-8")
        with pytest.raises(CorpusError):
            load_corpus(path)

    def test_bad_crr_ref_reports_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        _write_lines(path, [{"id": "F001", "text": "a", "crr_refs": ["nope"]}])
        with pytest.raises(CorpusError, match="line 1"):
            load_corpus(path)


class TestRoundTrip:
    def test_write_then_load_is_identical(self, tmp_path):
        corpus = generate_synthetic_corpus(60, 11, 6)
        path = tmp_path / "c.jsonl"
        write_corpus(corpus, path)
        reloaded = load_corpus(path)
        assert reloaded.ids() == corpus.ids()
        for original, copy in zip(corpus.findings, reloaded.findings):
            assert original == copy

    def test_rewrite_is_byte_identical(self, tmp_path):
        corpus = generate_synthetic_corpus(30, 2, 3)
        first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_corpus(corpus, first)
        write_corpus(load_corpus(first), second)
        assert first.read_bytes() == second.read_bytes()


class TestSynthetic:
    def test_deterministic_for_fixed_seed(self):
        a = generate_synthetic_corpus(100, 7, 10)
        b = generate_synthetic_corpus(100, 7, 10)
        assert a.findings == b.findings

    def test_cluster_shape_100_by_10(self):
        corpus = generate_synthetic_corpus(100, 7, 10)
        assert corpus.n == 100
        sizes = {}
        for finding in corpus:
            sizes[synthetic_cluster(finding.id)] = sizes.get(synthetic_cluster(finding.id), 0) + 1
        assert sizes == {c: 10 for c in range(10)}

    def test_singleton_clusters_have_empty_relevance(self):
        corpus = generate_synthetic_corpus(10, 3, 10)
        relevance = synthetic_relevance(corpus)
        assert len(relevance) == 10
        assert all(not rel for rel in relevance.values())

    def test_short_finding_fraction_near_085(self):
        corpus = generate_synthetic_corpus(1000, 1, 50)
        frac = sum(1 for f in corpus if len(f.text.split()) < 512) / corpus.n
        assert 0.80 <= frac <= 0.90

    def test_cluster_members_share_refs_and_vocabulary(self):
        corpus = generate_synthetic_corpus(40, 5, 4)
        by_cluster = {}
        for finding in corpus:
            by_cluster.setdefault(synthetic_cluster(finding.id), []).append(finding)
        for members in by_cluster.values():
            first, second = members[0], members[1]
            assert first.crr_refs & second.crr_refs
        # own article families (below the shared 600 series) are disjoint
        # across clusters; partner clusters share a 600-series article
        own_articles = {
            c: {r.path[0] for f in members for r in f.crr_refs if int(r.path[0]) < 600}
            for c, members in by_cluster.items()
        }
        for i in own_articles:
            for j in own_articles:
                if i != j:
                    assert not (own_articles[i] & own_articles[j])
        shared = {
            c: {r.path[0] for f in members for r in f.crr_refs if int(r.path[0]) >= 600}
            for c, members in by_cluster.items()
        }
        assert shared[0] == shared[1] and shared[2] == shared[3]
        assert shared[0] != shared[2]

    def test_requires_n_at_least_cluster_count(self):
        with pytest.raises(ValueError):
            generate_synthetic_corpus(5, 0, 10)

    def test_load_seven_thousand_findings(self, tmp_path):
        corpus = generate_synthetic_corpus(7000, 0, 350)
        path = tmp_path / "c.jsonl"
        write_corpus(corpus, path)
        assert load_corpus(path).n == 7000


class TestMeasures:
    def test_links_resolve_against_generated_measures(self, tmp_path):
        corpus = generate_synthetic_corpus(50, 9, 5)
        measures = generate_synthetic_measures(corpus)
        validate_measure_links(corpus, measures)
        path = tmp_path / "m.jsonl"
        write_measures(measures, path)
        assert load_measures(path).keys() == measures.keys()

    def test_unresolved_link_raises(self):
        corpus = Corpus([Finding(id="F1", text="t", measure_ids=frozenset({"MX"}))])
        with pytest.raises(CorpusError, match="MX"):
            validate_measure_links(corpus, {})
