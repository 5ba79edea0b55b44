"""Denoising-autoencoder adaptation: smoke training and model reuse."""

import numpy as np
import pytest

from regir.dense import load_embeddings
from regir_embed import EmbedderError, EmbedJob, embed_corpus, tsdae_finetune

from tests.conftest import synth_texts, write_corpus


@pytest.fixture(scope="module")
def adaptation(smoke_model, tmp_path_factory):
    root = tmp_path_factory.mktemp("tsdae")
    corpus = root / "c.jsonl"
    ids = write_corpus(corpus, synth_texts(50, seed=21))
    job = EmbedJob(
        corpus=corpus, out=root / "before.emb1", model=str(smoke_model),
        tsdae=True, epochs=2, batch_size=16, noise_ratio=0.5, seed=7,
        learning_rate=3e-4,
    )
    embed_corpus(job)  # pre-adaptation vectors at before.emb1
    result = tsdae_finetune(job, root / "adapted")
    after_job = EmbedJob(corpus=corpus, out=root / "after.emb1", model=str(result.model_dir), seed=7)
    embed_corpus(after_job)
    return root, ids, job, result


def test_two_epoch_smoke_run_decreases_loss(adaptation):
    _, _, _, result = adaptation
    (phase,) = result.phases
    assert phase.name == "findings"
    assert len(phase.epoch_losses) == 2
    assert phase.epoch_losses[-1] < phase.epoch_losses[0]


def test_adapted_model_produces_loadable_embeddings(adaptation):
    root, ids, _, _ = adaptation
    emb = load_embeddings(root / "after.emb1", set(ids))
    assert emb.dim == 384


def test_adaptation_changes_embeddings(adaptation):
    root, ids, _, _ = adaptation
    before = load_embeddings(root / "before.emb1", set(ids)).matrix
    after = load_embeddings(root / "after.emb1", set(ids)).matrix
    cosines = [
        float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
        for a, b in zip(before, after)
    ]
    assert float(np.mean(cosines)) < 1.0 - 1e-3


def test_two_phase_training_with_extra_corpus(smoke_model, tmp_path):
    corpus = tmp_path / "c.jsonl"
    extra = tmp_path / "articles.jsonl"
    write_corpus(corpus, synth_texts(12, seed=2))
    write_corpus(extra, synth_texts(8, seed=4))
    job = EmbedJob(
        corpus=corpus, out=tmp_path / "v.emb1", model=str(smoke_model),
        tsdae=True, epochs=1, batch_size=8, extra_corpus=extra, seed=1,
        learning_rate=3e-4,
    )
    result = tsdae_finetune(job, tmp_path / "adapted")
    assert [phase.name for phase in result.phases] == ["extra", "findings"]
    assert all(len(phase.epoch_losses) == 1 for phase in result.phases)


def test_requires_tsdae_flag(smoke_model, tmp_path):
    corpus = tmp_path / "c.jsonl"
    write_corpus(corpus, synth_texts(5, seed=1))
    job = EmbedJob(corpus=corpus, out=tmp_path / "v.emb1", model=str(smoke_model), tsdae=False)
    with pytest.raises(EmbedderError):
        tsdae_finetune(job)


def test_job_validation():
    with pytest.raises(EmbedderError):
        EmbedJob(corpus="c", out="o", epochs=0)
    with pytest.raises(EmbedderError):
        EmbedJob(corpus="c", out="o", noise_ratio=1.5)
