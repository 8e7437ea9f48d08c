"""Pluggable embedding providers.

Three sources are supported:

* SyntheticProvider -- a hashed character-3-gram embedder. Deterministic
  per (seed, dim, text) across processes, so every end-to-end path can run
  without a neural model.
* PrecomputedProvider -- embeddings loaded from a TSV file keyed by id.
* RemoteProvider -- a thin HTTP client for an external embedding service.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from .core import DenseEmbedding, MultiVectorEmbedding
from .errors import (
    DimMismatch,
    DuplicateId,
    EmptyText,
    ParseError,
    RemoteUnavailable,
)


@dataclass(frozen=True)
class EmbeddingRecord:
    id: str
    kind: str  # "dense" | "mv"
    payload: Union[DenseEmbedding, MultiVectorEmbedding]


def _char_ngrams(text: str, n: int = 3) -> List[str]:
    if len(text) < n:
        return [text]
    return [text[i : i + n] for i in range(len(text) - n + 1)]


class SyntheticProvider:
    """Deterministic text embedder built from hashed character 3-grams.

    Each 3-gram is hashed with a seeded 64-bit hash to a bucket in
    [0, dim) with a +/-1 sign; the bucket histogram is L2-normalized.
    Texts sharing more 3-grams land closer in cosine space, which is
    enough signal to drive retrieval tests end to end.
    """

    def __init__(self, seed: int, dim: int):
        if dim < 8:
            raise DimMismatch(f"synthetic dim must be >= 8, got {dim}")
        self.seed = int(seed)
        self.dim = int(dim)
        self._key = self.seed.to_bytes(8, "little", signed=False)

    def _hash(self, gram: str) -> int:
        h = hashlib.blake2b(gram.encode("utf-8"), key=self._key, digest_size=8)
        return int.from_bytes(h.digest(), "little")

    def embed_text(self, text: str) -> DenseEmbedding:
        text = text.strip()
        if not text:
            raise EmptyText("cannot embed empty text")
        acc = np.zeros(self.dim, dtype=np.float64)
        for gram in _char_ngrams(text):
            h = self._hash(gram)
            sign = 1.0 if (h >> 63) & 1 else -1.0
            acc[h % self.dim] += sign
        n = np.linalg.norm(acc)
        if n == 0.0:
            # signs cancelled exactly; nudge with a text-level hash bucket
            h = self._hash("\x00" + text)
            acc[h % self.dim] = 1.0
            n = 1.0
        return DenseEmbedding((acc / n).astype(np.float32))

    def embed_text_multivector(self, text: str, max_tokens: int) -> MultiVectorEmbedding:
        text = text.strip()
        if not text:
            raise EmptyText("cannot embed empty text")
        words = text.split()
        n_groups = min(len(words), max_tokens)
        groups = np.array_split(np.array(words, dtype=object), n_groups)
        rows = [self.embed_text(" ".join(g)).values for g in groups]
        return MultiVectorEmbedding(np.stack(rows))

    def embed_query(self, query_id: str, text: str) -> DenseEmbedding:
        return self.embed_text(text)


class PrecomputedProvider:
    """Embeddings read from a file; lookup is by record id."""

    def __init__(self, path):
        self.records = load_precomputed(path)

    def embed_query(self, query_id: str, text: str) -> DenseEmbedding:
        rec = self.records.get(query_id)
        if rec is None or rec.kind != "dense":
            raise ParseError(f"no precomputed dense embedding for query {query_id!r}")
        return rec.payload


class RemoteProvider:
    """POSTs to `{base_url}/embed`; bounds in-flight requests."""

    def __init__(self, base_url: str, timeout_ms: int = 10_000, max_inflight: int = 8):
        if timeout_ms < 1:
            raise DimMismatch(f"timeout must be >= 1 ms, got {timeout_ms}")
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_ms / 1000.0
        self._sem = threading.Semaphore(max_inflight)

    def _post(self, texts: List[str], mode: str):
        import httpx

        with self._sem:
            try:
                resp = httpx.post(
                    f"{self.base_url}/embed",
                    json={"inputs": texts, "mode": mode},
                    timeout=self.timeout_s,
                )
            except Exception as exc:  # connection errors, timeouts
                raise RemoteUnavailable(str(exc)) from exc
        if resp.status_code != 200:
            raise RemoteUnavailable(f"embedding service returned {resp.status_code}")
        return resp.json()["embeddings"]

    def embed_text(self, text: str) -> DenseEmbedding:
        text = text.strip()
        if not text:
            raise EmptyText("cannot embed empty text")
        out = self._post([text], "dense")
        return DenseEmbedding(np.asarray(out[0], dtype=np.float32))

    def embed_text_multivector(self, text: str, max_tokens: int) -> MultiVectorEmbedding:
        text = text.strip()
        if not text:
            raise EmptyText("cannot embed empty text")
        out = self._post([text], "multivector")
        return MultiVectorEmbedding(np.asarray(out[0], dtype=np.float32))

    def embed_query(self, query_id: str, text: str) -> DenseEmbedding:
        return self.embed_text(text)


def _parse_dense(payload: str) -> DenseEmbedding:
    return DenseEmbedding(np.asarray([float(x) for x in payload.split(",")], dtype=np.float32))


def _parse_mv(payload: str) -> MultiVectorEmbedding:
    rows = [[float(x) for x in row.split(",")] for row in payload.split(";")]
    return MultiVectorEmbedding(np.asarray(rows, dtype=np.float32))


def load_precomputed(path) -> Dict[str, EmbeddingRecord]:
    """Parse a precomputed-embedding TSV.

    Lines are `id <TAB> dense <TAB> v1,v2,...` or
    `id <TAB> mv <TAB> r1v1,r1v2,...;r2v1,...`. All records in one file
    must share kind and dim.
    """
    path = Path(path)
    records: Dict[str, EmbeddingRecord] = {}
    file_kind = None
    file_dim = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError("expected 3 tab-separated fields", path=str(path), line=lineno)
            rid, kind, payload = parts
            if rid in records:
                raise DuplicateId(f"duplicate id {rid!r} at {path}:{lineno}")
            try:
                if kind == "dense":
                    emb: Union[DenseEmbedding, MultiVectorEmbedding] = _parse_dense(payload)
                elif kind == "mv":
                    emb = _parse_mv(payload)
                else:
                    raise ValueError(f"unknown kind {kind!r}")
            except (ValueError, IndexError) as exc:
                raise ParseError(str(exc), path=str(path), line=lineno) from exc
            if file_kind is None:
                file_kind, file_dim = kind, emb.dim
            elif kind != file_kind or emb.dim != file_dim:
                raise DimMismatch(
                    f"record {rid!r} has kind={kind} dim={emb.dim}, "
                    f"file is kind={file_kind} dim={file_dim}"
                )
            records[rid] = EmbeddingRecord(id=rid, kind=kind, payload=emb)
    return records


def save_precomputed(path, records: Dict[str, EmbeddingRecord]) -> None:
    """Inverse of load_precomputed; records written sorted by id."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rid in sorted(records):
            rec = records[rid]
            if rec.kind == "dense":
                payload = ",".join(repr(float(x)) for x in rec.payload.values)
            else:
                payload = ";".join(
                    ",".join(repr(float(x)) for x in row) for row in rec.payload.tokens
                )
            fh.write(f"{rid}\t{rec.kind}\t{payload}\n")
