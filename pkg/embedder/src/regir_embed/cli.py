"""CLI: embed a findings corpus, optionally adapting the model first.

Exit codes: 0 success, 1 computation error, 2 usage/IO error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .encoder import embed_corpus
from .job import DEFAULT_MODEL, EmbedderError, EmbedJob
from .tsdae import tsdae_finetune


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regir-embed",
        description="Produce per-finding embedding vectors in the engine's EMB1 format",
    )
    parser.add_argument("--corpus", required=True, help="corpus JSONL path")
    parser.add_argument("--out", required=True, help="output EMB1 path")
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help=f"model name or path (default {DEFAULT_MODEL})")
    parser.add_argument("--tsdae", action="store_true",
                        help="adapt the model with denoising-autoencoder training first")
    parser.add_argument("--epochs", type=int, default=2,
                        help="adaptation epochs (default smoke-scale 2; production 125)")
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--noise", type=float, default=0.5,
                        help="token-deletion ratio for adaptation (default 0.5)")
    parser.add_argument("--extra-corpus", default=None,
                        help="extra training corpus (e.g. regulation articles), trained first")
    parser.add_argument("--adapted-dir", default=None,
                        help="where to save the adapted model (default <out dir>/adapted_model)")
    parser.add_argument("--lr", type=float, default=3e-5, help="adaptation learning rate")
    parser.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        import transformers

        transformers.logging.set_verbosity_error()
    except Exception:
        pass
    job = EmbedJob(
        corpus=Path(args.corpus),
        out=Path(args.out),
        model=args.model,
        tsdae=args.tsdae,
        epochs=args.epochs,
        batch_size=args.batch_size,
        noise_ratio=args.noise,
        extra_corpus=Path(args.extra_corpus) if args.extra_corpus else None,
        seed=args.seed,
        learning_rate=args.lr,
    )
    try:
        if job.tsdae:
            result = tsdae_finetune(job, args.adapted_dir)
            for phase in result.phases:
                for epoch, loss in enumerate(phase.epoch_losses, start=1):
                    print(f"tsdae {phase.name} epoch {epoch} loss {loss:.6f}")
            job = replace(job, model=str(result.model_dir))
            print(f"adapted model saved to {result.model_dir}")
        out = embed_corpus(job)
        print(f"wrote embeddings to {out}")
        return 0
    except (OSError, EmbedderError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
