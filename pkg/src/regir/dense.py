"""Embedding storage, normalization, and cosine similarity matrices.

Vectors arrive from an offline embedding producer in the EMB1 binary format
(see load_embeddings) or as a JSONL fallback.  They are held in float64
internally; cosine similarity between unit vectors reduces to a dot product,
so the matrix of all query-vs-corpus similarities is one matmul.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import AbstractSet, Sequence

import numpy as np

EMB1_MAGIC = b"EMB1"


class EmbeddingError(ValueError):
    """Raised for malformed embedding files or invalid vector sets."""


@dataclass(frozen=True)
class EmbeddingSet:
    """Per-finding vectors with a fixed dimension and stable id order."""

    ids: tuple[str, ...]
    matrix: np.ndarray  # shape (len(ids), dim), float64
    normalized: bool = False

    def __post_init__(self) -> None:
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.ids):
            raise EmbeddingError("matrix shape does not match id count")

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def row(self, finding_id: str) -> np.ndarray:
        return self.matrix[self.ids.index(finding_id)]

    def __contains__(self, finding_id: str) -> bool:
        return finding_id in self.ids

    def reindex(self, ids: Sequence[str]) -> "EmbeddingSet":
        """Subset/reorder to the given ids (e.g. corpus order)."""
        index = {fid: i for i, fid in enumerate(self.ids)}
        try:
            rows = [index[fid] for fid in ids]
        except KeyError as exc:
            raise EmbeddingError(f"missing embedding for id {exc.args[0]!r}") from None
        return EmbeddingSet(tuple(ids), self.matrix[rows], self.normalized)


def load_embeddings(path: str | Path, expected_ids: AbstractSet[str]) -> EmbeddingSet:
    """Load an embedding file and validate it against the expected ids.

    Binary layout: magic "EMB1", u32-LE dim, u32-LE count, then per record a
    u16-LE id byte length, the UTF-8 id bytes, and dim float32-LE values.
    Files starting with "{" are read as JSONL {"id":..., "vector":[...]}.
    Raises EmbeddingError for missing ids, dimension mismatches, and
    non-finite values.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
        if head == EMB1_MAGIC:
            ids, matrix = _read_emb1(fh)
        elif head[:1] == b"{":
            fh.seek(0)
            ids, matrix = _read_jsonl(fh)
        else:
            raise EmbeddingError(f"{path}: unrecognized embedding file format")
    seen = set(ids)
    if len(seen) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise EmbeddingError(f"{path}: duplicate embedding id {dup!r}")
    missing = sorted(expected_ids - seen)
    if missing:
        raise EmbeddingError(f"{path}: missing embedding for id {missing[0]!r}")
    if not np.isfinite(matrix).all():
        bad = ids[int(np.argwhere(~np.isfinite(matrix))[0][0])]
        raise EmbeddingError(f"{path}: non-finite value in vector for id {bad!r}")
    return EmbeddingSet(tuple(ids), matrix, normalized=False)


def _read_emb1(fh) -> tuple[list[str], np.ndarray]:
    header = fh.read(8)
    if len(header) != 8:
        raise EmbeddingError("truncated EMB1 header")
    dim, count = struct.unpack("<II", header)
    ids: list[str] = []
    rows = np.empty((count, dim), dtype=np.float64)
    for i in range(count):
        len_bytes = fh.read(2)
        if len(len_bytes) != 2:
            raise EmbeddingError(f"truncated EMB1 record {i}")
        (id_len,) = struct.unpack("<H", len_bytes)
        id_bytes = fh.read(id_len)
        vec_bytes = fh.read(4 * dim)
        if len(id_bytes) != id_len or len(vec_bytes) != 4 * dim:
            raise EmbeddingError(f"truncated EMB1 record {i}")
        ids.append(id_bytes.decode("utf-8"))
        rows[i] = np.frombuffer(vec_bytes, dtype="<f4").astype(np.float64)
    return ids, rows


def _read_jsonl(fh) -> tuple[list[str], np.ndarray]:
    ids: list[str] = []
    vectors: list[list[float]] = []
    for lineno, line in enumerate(fh.read().decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise EmbeddingError(f"line {lineno}: malformed JSON ({exc.msg})") from None
        ids.append(str(record["id"]))
        vectors.append([float(v) for v in record["vector"]])
    if not ids:
        raise EmbeddingError("embedding file contains no vectors")
    dims = {len(v) for v in vectors}
    if len(dims) != 1:
        raise EmbeddingError(f"inconsistent vector dimensions: {sorted(dims)}")
    return ids, np.asarray(vectors, dtype=np.float64)


def write_embeddings(embeddings: EmbeddingSet, path: str | Path) -> None:
    """Write an EmbeddingSet in the EMB1 binary format (float32 on disk)."""
    with open(path, "wb") as fh:
        fh.write(EMB1_MAGIC)
        fh.write(struct.pack("<II", embeddings.dim, len(embeddings.ids)))
        matrix32 = embeddings.matrix.astype("<f4")
        for i, fid in enumerate(embeddings.ids):
            id_bytes = fid.encode("utf-8")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(matrix32[i].tobytes())


def normalize(embeddings: EmbeddingSet) -> EmbeddingSet:
    """Scale every vector to unit L2 norm; rejects zero vectors by id."""
    norms = np.linalg.norm(embeddings.matrix, axis=1)
    zero = np.nonzero(norms == 0.0)[0]
    if zero.size:
        raise EmbeddingError(
            f"cannot normalize zero vector for id {embeddings.ids[int(zero[0])]!r}"
        )
    return EmbeddingSet(embeddings.ids, embeddings.matrix / norms[:, None], normalized=True)


@dataclass(frozen=True)
class SimilarityMatrix:
    """A queries-by-corpus score matrix with row/column id labels.

    For lexical sources ``values`` holds per-row min-max normalized scores
    and ``raw`` the unnormalized ones; cosine sources set ``raw`` to None.
    """

    values: np.ndarray  # shape (len(row_ids), len(col_ids))
    row_ids: tuple[str, ...]
    col_ids: tuple[str, ...]
    raw: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.row_ids), len(self.col_ids)):
            raise ValueError("similarity matrix shape does not match id labels")


def cosine_matrix(queries: EmbeddingSet, corpus: EmbeddingSet) -> SimilarityMatrix:
    """All pairwise cosine similarities as one matrix product.

    Both sets must be normalized and share a dimension; entry [j, i] is the
    dot product of query j with corpus vector i, which equals their cosine.
    """
    if not (queries.normalized and corpus.normalized):
        raise EmbeddingError("cosine_matrix requires normalized embedding sets")
    if queries.dim != corpus.dim:
        raise EmbeddingError(f"dimension mismatch: {queries.dim} vs {corpus.dim}")
    values = queries.matrix @ corpus.matrix.T
    return SimilarityMatrix(values=values, row_ids=queries.ids, col_ids=corpus.ids)
