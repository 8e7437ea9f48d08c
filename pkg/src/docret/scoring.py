"""Similarity functions and retrieval indexes.

Dense search is exact by default with an optional HNSW graph; the graph
only proposes candidates, which are always re-scored with exact cosine
before ranking. Multi-vector search computes MaxSim exactly.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    DenseEmbedding,
    MultiVectorEmbedding,
    ScoredDoc,
    rank_scored,
)
from .errors import AnnUnavailable, DimMismatch, DuplicateId, ParseError, ZeroVector
from .hnsw import HnswGraph, HnswParams

INDEX_FORMAT_VERSION = 1


def cosine(q: DenseEmbedding, d: DenseEmbedding) -> float:
    if q.dim != d.dim:
        raise DimMismatch(f"dims {q.dim} vs {d.dim}")
    a = q.values.astype(np.float64)
    b = d.values.astype(np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine undefined for zero vectors")
    return float(np.dot(a, b) / (na * nb))


def _cosine_matrix(q: MultiVectorEmbedding, d: MultiVectorEmbedding) -> np.ndarray:
    """All-pairs token cosine matrix (n_q x n_d) in float64."""
    if q.dim != d.dim:
        raise DimMismatch(f"dims {q.dim} vs {d.dim}")
    qt = q.tokens.astype(np.float64)
    dt = d.tokens.astype(np.float64)
    qn = np.linalg.norm(qt, axis=1)
    dn = np.linalg.norm(dt, axis=1)
    if np.any(qn == 0.0) or np.any(dn == 0.0):
        raise ZeroVector("zero-norm token row")
    return (qt / qn[:, None]) @ (dt / dn[:, None]).T


def maxsim(q: MultiVectorEmbedding, d: MultiVectorEmbedding) -> float:
    """Late-interaction score: per query token, best doc-token cosine, summed."""
    return float(_cosine_matrix(q, d).max(axis=1).sum())


def maxsim_normalized(q: MultiVectorEmbedding, d: MultiVectorEmbedding) -> float:
    """MaxSim divided by the number of query tokens; bounded by [-1, 1]."""
    return maxsim(q, d) / q.n_tokens


class DenseIndex:
    """Immutable exact-cosine index with an optional ANN graph."""

    def __init__(self, ids: List[str], matrix: np.ndarray, ann: Optional[HnswGraph] = None):
        self.ids = list(ids)
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        self.ann = ann

    @property
    def n_docs(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])


def build_dense_index(
    records: Sequence[Tuple[str, DenseEmbedding]],
    ann_params: Optional[HnswParams] = None,
) -> DenseIndex:
    if not records:
        raise DimMismatch("cannot build an index from zero records")
    ids = [rid for rid, _ in records]
    if len(set(ids)) != len(ids):
        seen, dups = set(), set()
        for rid in ids:
            (dups if rid in seen else seen).add(rid)
        raise DuplicateId(f"duplicate ids: {sorted(dups)}")
    dims = {e.dim for _, e in records}
    if len(dims) > 1:
        raise DimMismatch(f"mixed dims {sorted(dims)}")
    rows = np.stack([e.values for _, e in records]).astype(np.float64)
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0.0):
        raise ZeroVector("zero vector in index input")
    matrix = (rows / norms[:, None]).astype(np.float32)
    ann = HnswGraph(matrix, ann_params) if ann_params is not None else None
    return DenseIndex(ids, matrix, ann)


def search_dense(index: DenseIndex, q: DenseEmbedding, k: int, mode: str = "exact") -> List[ScoredDoc]:
    if q.dim != index.dim:
        raise DimMismatch(f"query dim {q.dim} vs index dim {index.dim}")
    qv = q.values.astype(np.float64)
    qn = np.linalg.norm(qv)
    if qn == 0.0:
        raise ZeroVector("zero query vector")
    qv /= qn
    if mode == "exact":
        scores = index.matrix.astype(np.float64) @ qv
        ranked = rank_scored(zip(index.ids, scores))
    elif mode == "ann":
        if index.ann is None:
            raise AnnUnavailable("index was built without an ANN graph")
        cand = index.ann.search(qv.astype(np.float32), k)
        scores = index.matrix[cand].astype(np.float64) @ qv
        ranked = rank_scored((index.ids[c], s) for c, s in zip(cand, scores))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return ranked[:k]


class MultiVectorIndex:
    """Exact MaxSim index: just ids plus their token matrices."""

    def __init__(self, ids: List[str], docs: List[MultiVectorEmbedding]):
        if len(set(ids)) != len(ids):
            raise DuplicateId("duplicate ids in multivector index")
        dims = {d.dim for d in docs}
        if len(dims) > 1:
            raise DimMismatch(f"mixed dims {sorted(dims)}")
        self.ids = list(ids)
        self.docs = [d.normalize_rows() for d in docs]

    @property
    def n_docs(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.docs[0].dim


def search_multivector(
    index: MultiVectorIndex,
    q: MultiVectorEmbedding,
    k: int,
    normalized: bool = False,
) -> List[ScoredDoc]:
    score = maxsim_normalized if normalized else maxsim
    ranked = rank_scored((rid, score(q, d)) for rid, d in zip(index.ids, index.docs))
    return ranked[:k]


# -- persistence -----------------------------------------------------------


def save_dense_index(index: DenseIndex, dirpath) -> None:
    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    meta = {
        "format_version": INDEX_FORMAT_VERSION,
        "dim": index.dim,
        "count": index.n_docs,
        "ann": None,
    }
    if index.ann is not None:
        p = index.ann.params
        meta["ann"] = {
            "M": p.M,
            "ef_construction": p.ef_construction,
            "ef_search": p.ef_search,
            "seed": p.seed,
        }
        (d / "hnsw.bin").write_bytes(index.ann.to_bytes())
    (d / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    (d / "ids.txt").write_text("".join(f"{i}\n" for i in index.ids), encoding="utf-8")
    (d / "vectors.bin").write_bytes(
        np.ascontiguousarray(index.matrix, dtype="<f4").tobytes()
    )


def load_dense_index(dirpath) -> DenseIndex:
    d = Path(dirpath)
    try:
        meta = json.loads((d / "meta.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read index metadata: {exc}", path=str(d / "meta.json"))
    ids = (d / "ids.txt").read_text(encoding="utf-8").splitlines()
    raw = np.frombuffer((d / "vectors.bin").read_bytes(), dtype="<f4")
    count, dim = meta["count"], meta["dim"]
    if raw.size != count * dim or len(ids) != count:
        raise ParseError(
            f"index size mismatch: meta says {count}x{dim}, "
            f"got {len(ids)} ids and {raw.size} floats",
            path=str(d),
        )
    matrix = raw.reshape(count, dim).copy()
    ann = None
    if meta.get("ann"):
        params = HnswParams(**meta["ann"])
        ann = HnswGraph.from_bytes((d / "hnsw.bin").read_bytes(), matrix, params)
    return DenseIndex(ids, matrix, ann)
