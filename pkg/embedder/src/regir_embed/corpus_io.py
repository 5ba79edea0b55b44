"""Reader for the engine's corpus JSONL interchange format.

Only the id and text fields matter to the embedding producer; the rest of
the record (references, measures, year) is engine-side metadata.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .job import EmbedderError

EMB1_MAGIC = b"EMB1"


def read_corpus_texts(path: str | Path) -> list[tuple[str, str]]:
    """(id, text) pairs sorted by id; rejects duplicates and empty texts."""
    records: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EmbedderError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            fid = record.get("id")
            text = record.get("text")
            if not isinstance(fid, str) or not fid:
                raise EmbedderError(f"{path}:{lineno}: missing finding id")
            if fid in records:
                raise EmbedderError(f"{path}:{lineno}: duplicate finding id {fid!r}")
            if not isinstance(text, str) or not text.strip():
                raise EmbedderError(f"{path}:{lineno}: finding {fid!r} has empty text")
            records[fid] = text
    if not records:
        raise EmbedderError(f"{path}: corpus contains no findings")
    return sorted(records.items())


def write_emb1(ids: list[str], matrix: np.ndarray, path: str | Path) -> None:
    """Write vectors in the engine's EMB1 binary format.

    Layout: magic "EMB1", u32-LE dim, u32-LE count, then per record a
    u16-LE id byte length, UTF-8 id bytes, and dim float32-LE values.
    """
    matrix32 = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix32.ndim != 2 or matrix32.shape[0] != len(ids):
        raise EmbedderError("vector matrix shape does not match id count")
    with open(path, "wb") as fh:
        fh.write(EMB1_MAGIC)
        fh.write(struct.pack("<II", matrix32.shape[1], len(ids)))
        for i, fid in enumerate(ids):
            raw = fid.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(matrix32[i].tobytes())
