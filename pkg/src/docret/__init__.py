"""Desk-scale retrieval workbench: dense and late-interaction scoring,
BEIR-style evaluation, hard-negative mining, checkpoint merging, and
analysis exports, with embedding generation behind pluggable providers.
"""

from .core import (
    DenseEmbedding,
    MultiVectorEmbedding,
    ScoredDoc,
    normalize,
    rank_scored,
    truncate_and_normalize,
)
from .scoring import (
    DenseIndex,
    MultiVectorIndex,
    build_dense_index,
    cosine,
    maxsim,
    maxsim_normalized,
    search_dense,
    search_multivector,
)

__version__ = "0.1.0"

__all__ = [
    "DenseEmbedding",
    "MultiVectorEmbedding",
    "ScoredDoc",
    "normalize",
    "truncate_and_normalize",
    "rank_scored",
    "cosine",
    "maxsim",
    "maxsim_normalized",
    "DenseIndex",
    "MultiVectorIndex",
    "build_dense_index",
    "search_dense",
    "search_multivector",
    "__version__",
]
