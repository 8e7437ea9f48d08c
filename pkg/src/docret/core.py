"""Core value types and vector math shared by every other module.

Vectors are stored as float32; dot products and norms accumulate in
float64 and are rounded back at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Sequence

import numpy as np

from .errors import DimError, ZeroVector


@dataclass(frozen=True)
class DenseEmbedding:
    """A single embedding vector, optionally L2-normalized."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.ndim != 1 or arr.size < 1:
            raise DimError(f"expected a 1-D vector with at least one entry, got shape {arr.shape}")
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return int(self.values.size)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values.astype(np.float64)))


@dataclass(frozen=True)
class MultiVectorEmbedding:
    """Per-token embedding matrix (n_tokens x dim) for late interaction."""

    tokens: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.tokens, dtype=np.float32)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimError(f"expected a 2-D token matrix, got shape {arr.shape}")
        object.__setattr__(self, "tokens", arr)

    @property
    def n_tokens(self) -> int:
        return int(self.tokens.shape[0])

    @property
    def dim(self) -> int:
        return int(self.tokens.shape[1])

    def normalize_rows(self) -> "MultiVectorEmbedding":
        t = self.tokens.astype(np.float64)
        norms = np.linalg.norm(t, axis=1)
        if np.any(norms == 0.0):
            raise ZeroVector("zero-norm token row cannot be normalized")
        return MultiVectorEmbedding((t / norms[:, None]).astype(np.float32))


@dataclass(frozen=True, order=True)
class ScoredDoc:
    """One entry of a ranked list."""

    doc: str = field(compare=True)
    score: float = field(compare=False)


def normalize(v: DenseEmbedding) -> DenseEmbedding:
    """Scale `v` to unit L2 norm. Raises ZeroVector on an all-zero input."""
    x = v.values.astype(np.float64)
    n = np.linalg.norm(x)
    if n == 0.0:
        raise ZeroVector("cannot normalize an all-zero vector")
    return DenseEmbedding((x / n).astype(np.float32))


def truncate_and_normalize(v: DenseEmbedding, d: int) -> DenseEmbedding:
    """Keep the first `d` components and re-normalize to unit length."""
    if d < 1 or d > v.dim:
        raise DimError(f"truncation dim {d} outside [1, {v.dim}]")
    x = v.values[:d].astype(np.float64)
    n = np.linalg.norm(x)
    if n == 0.0:
        raise ZeroVector(f"first {d} components are all zero")
    return DenseEmbedding((x / n).astype(np.float32))


def rank_scored(pairs: Iterable[tuple]) -> List[ScoredDoc]:
    """Sort (doc_id, score) pairs descending by score, ties by ascending id.

    This tie-break is applied everywhere a ranked list is produced so that
    every ranking in the system is total and deterministic.
    """
    return [
        ScoredDoc(doc=doc, score=float(score))
        for doc, score in sorted(pairs, key=lambda p: (-float(p[1]), p[0]))
    ]


def as_matrix(embeddings: Sequence[DenseEmbedding]) -> np.ndarray:
    """Stack embeddings into an (n, dim) float32 matrix; dims must agree."""
    from .errors import DimMismatch

    dims = {e.dim for e in embeddings}
    if len(dims) > 1:
        raise DimMismatch(f"mixed dims {sorted(dims)}")
    return np.stack([e.values for e in embeddings]).astype(np.float32)
