"""Denoising-autoencoder adaptation of a sentence transformer.

The model reconstructs each training text from a corruption that deletes a
fixed fraction of its tokens; the encoder's pooled sentence vector is the
bottleneck and the decoder is weight-tied to the encoder.  When a second
corpus of regulation articles is supplied, training runs in two sequential
phases: articles first, then the findings.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

import torch

from .corpus_io import read_corpus_texts
from .encoder import load_model
from .job import EmbedderError, EmbedJob

try:
    from sentence_transformers.sentence_transformer import losses as st_losses
except ImportError:  # pragma: no cover - older releases
    from sentence_transformers import losses as st_losses

from .noise import corrupt_text


@dataclass(frozen=True)
class PhaseLog:
    name: str
    epoch_losses: tuple[float, ...]


@dataclass(frozen=True)
class TsdaeResult:
    model_dir: Path
    phases: tuple[PhaseLog, ...]


def _batch_features(model, texts: list[str]):
    tokenize = getattr(model, "preprocess", None) or model.tokenize
    features = tokenize(texts)
    return {k: v.to(model.device) if hasattr(v, "to") else v for k, v in features.items()}


def tsdae_finetune(job: EmbedJob, out_dir: str | Path | None = None) -> TsdaeResult:
    """Adapt the job's model on its corpus (plus optional extra corpus).

    Returns the saved model directory (usable as a model path by
    embed_corpus) and the mean training loss per epoch per phase.
    """
    if not job.tsdae:
        raise EmbedderError("tsdae_finetune requires a job with tsdae=True")
    phases: list[tuple[str, list[str]]] = []
    if job.extra_corpus is not None:
        phases.append(("extra", [text for _, text in read_corpus_texts(job.extra_corpus)]))
    phases.append(("findings", [text for _, text in read_corpus_texts(job.corpus)]))

    torch.manual_seed(job.seed)
    rng = random.Random(job.seed)
    model = load_model(job.model)
    try:
        loss_module = st_losses.DenoisingAutoEncoderLoss(
            model, decoder_name_or_path=job.model, tie_encoder_decoder=True
        )
    except Exception as exc:
        raise EmbedderError(f"cannot build denoising decoder for {job.model!r}: {exc}") from None
    optimizer = torch.optim.AdamW(loss_module.parameters(), lr=job.learning_rate)

    model.train()
    logs: list[PhaseLog] = []
    for phase_name, texts in phases:
        epoch_losses: list[float] = []
        for _ in range(job.epochs):
            order = list(range(len(texts)))
            rng.shuffle(order)
            total = 0.0
            batches = 0
            for start in range(0, len(order), job.batch_size):
                originals = [texts[i] for i in order[start : start + job.batch_size]]
                noisy = [corrupt_text(t, job.noise_ratio, rng) or t for t in originals]
                features = [_batch_features(model, noisy), _batch_features(model, originals)]
                loss = loss_module(features, None)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                total += float(loss.detach())
                batches += 1
            epoch_losses.append(total / batches)
        logs.append(PhaseLog(phase_name, tuple(epoch_losses)))

    if out_dir is None:
        out_dir = Path(job.out).parent / "adapted_model"
    out_dir = Path(out_dir)
    model.eval()
    model.save(str(out_dir))
    return TsdaeResult(model_dir=out_dir, phases=tuple(logs))
