import json
import os
import random
from pathlib import Path

import pytest

os.environ.setdefault("HF_HUB_OFFLINE", "1")

WORDS = [
    "institution", "model", "risk", "exposure", "estimate", "conversion",
    "factor", "validation", "rating", "portfolio", "default", "capital",
    "margin", "review", "policy", "threshold", "collateral", "downturn",
    "segment", "grade", "facility", "haircut", "observation", "backtesting",
]


def synth_texts(count: int, seed: int, lo: int = 12, hi: int = 40) -> list[str]:
    rng = random.Random(seed)
    return [" ".join(rng.choices(WORDS, k=rng.randint(lo, hi))) for _ in range(count)]


def write_corpus(path: Path, texts: list[str]) -> list[str]:
    ids = [f"F{i:03d}" for i in range(len(texts))]
    with open(path, "w", encoding="utf-8") as fh:
        for fid, text in zip(ids, texts):
            fh.write(json.dumps({"id": fid, "text": text}) + "\n")
    return ids


@pytest.fixture(scope="session")
def smoke_model(tmp_path_factory) -> Path:
    from regir_embed import build_smoke_model

    out = tmp_path_factory.mktemp("model") / "smoke"
    return build_smoke_model(out, synth_texts(60, seed=11), seed=1)
