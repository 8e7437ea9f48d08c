"""Hard-negative candidate generation.

Four sources feed the miner: Okapi BM25 over OCR text sidecars, cosine
ranking over provider embeddings, externally supplied ranking files, and
page-neighbor lookup. Rankings are fused with reciprocal rank fusion and
negatives sampled from the fused top pool, never including the positive.
"""

from __future__ import annotations

import hashlib
import json
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .core import DenseEmbedding, ScoredDoc, rank_scored
from .errors import EmptyQuery, NoNeighbors, ParseError, PoolTooSmall
from .scoring import DenseIndex, search_dense

def _is_word_char(ch: str, in_word: bool) -> bool:
    # letters and digits start or extend a word; combining marks (viramas,
    # vowel signs in Indic scripts) only extend one, never start one
    cat = unicodedata.category(ch)
    if cat[0] in ("L", "N"):
        return True
    return in_word and cat[0] == "M"


def tokenize(text: str) -> List[str]:
    """Lowercased word segmentation on letter/number boundaries, any script."""
    out: List[str] = []
    word: List[str] = []
    for ch in text.lower():
        if _is_word_char(ch, bool(word)):
            word.append(ch)
        elif word:
            out.append("".join(word))
            word = []
    if word:
        out.append("".join(word))
    return out


@dataclass(frozen=True)
class MiningConfig:
    K: int = 3
    pool_size: int = 20
    rrf_k: float = 60.0
    page_window: Tuple[int, ...] = (-1, 1, -2, 2, -3, 3)
    seed: int = 42

    def __post_init__(self):
        if self.K > self.pool_size:
            raise ValueError(f"K={self.K} cannot exceed pool_size={self.pool_size}")
        if self.rrf_k <= 0:
            raise ValueError(f"rrf_k must be positive, got {self.rrf_k}")


@dataclass(frozen=True)
class TextSidecar:
    doc: str
    text: str


@dataclass(frozen=True)
class PageRef:
    doc: str
    source_doc: str
    page_no: int


def bm25_rank(query_text: str, sidecars: Sequence[TextSidecar], top_n: int) -> List[ScoredDoc]:
    """Okapi BM25 (k1=1.2, b=0.75) with the non-negative +1-inside-log IDF."""
    k1, b = 1.2, 0.75
    q_terms = tokenize(query_text)
    if not q_terms:
        raise EmptyQuery("query has no usable terms")
    docs = [(s.doc, tokenize(s.text)) for s in sidecars]
    n = len(docs)
    df: Counter = Counter()
    for _, toks in docs:
        df.update(set(toks))
    avgdl = sum(len(t) for _, t in docs) / n if n else 0.0
    idf = {t: math.log(1.0 + (n - df[t] + 0.5) / (df[t] + 0.5)) for t in set(q_terms) if t in df}

    scores = []
    for doc_id, toks in docs:
        tf = Counter(toks)
        dl = len(toks)
        s = 0.0
        for term in set(q_terms):
            if term not in tf:
                continue
            f = tf[term]
            denom = f + k1 * (1.0 - b + b * dl / (avgdl or 1.0))
            s += idf[term] * f * (k1 + 1.0) / denom
        scores.append((doc_id, s))
    return rank_scored(scores)[:top_n]


def embedding_rank(q: DenseEmbedding, index: DenseIndex, top_n: int) -> List[ScoredDoc]:
    return search_dense(index, q, top_n, mode="exact")


def rrf_fuse(rankings: Sequence[Sequence[ScoredDoc]], rrf_k: float = 60.0) -> List[ScoredDoc]:
    """score(d) = sum over rankings of 1 / (rrf_k + rank(d)), ranks 1-based."""
    fused: Dict[str, float] = {}
    for ranking in rankings:
        for rank, entry in enumerate(ranking, start=1):
            fused[entry.doc] = fused.get(entry.doc, 0.0) + 1.0 / (rrf_k + rank)
    return rank_scored(fused.items())


def _per_query_rng(seed: int, query_id: str) -> np.random.Generator:
    # stable per-(seed, query) stream so parallel mining stays reproducible
    h = hashlib.blake2b(query_id.encode("utf-8"), key=int(seed).to_bytes(8, "little"), digest_size=8)
    return np.random.default_rng(int.from_bytes(h.digest(), "little"))


def mine_negatives(
    query_id: str,
    positive: str,
    fused: Sequence[ScoredDoc],
    config: MiningConfig,
) -> List[str]:
    """Sample K negatives uniformly without replacement from the fused top pool."""
    pool = [e.doc for e in fused if e.doc != positive][: config.pool_size]
    if len(pool) < config.K:
        raise PoolTooSmall(f"only {len(pool)} candidates for query {query_id!r}, need {config.K}")
    if len(pool) == config.K:
        return list(pool)
    rng = _per_query_rng(config.seed, query_id)
    picks = rng.choice(len(pool), size=config.K, replace=False)
    return [pool[i] for i in picks]


def page_neighbor_negatives(
    positive: PageRef,
    all_pages: Sequence[PageRef],
    config: MiningConfig,
) -> List[str]:
    """Negatives from nearby pages of the same source document.

    Candidates are ordered closest offset first; when more than K exist,
    K are sampled uniformly (seeded per positive doc id).
    """
    by_pos = {(p.source_doc, p.page_no): p.doc for p in all_pages}
    candidates = []
    for off in sorted(config.page_window, key=lambda o: (abs(o), o)):
        key = (positive.source_doc, positive.page_no + off)
        if key in by_pos and by_pos[key] != positive.doc:
            candidates.append(by_pos[key])
    if not candidates:
        raise NoNeighbors(f"no neighboring pages for {positive.doc!r}")
    if len(candidates) <= config.K:
        return candidates
    rng = _per_query_rng(config.seed, positive.doc)
    picks = rng.choice(len(candidates), size=config.K, replace=False)
    return [candidates[i] for i in picks]


# -- file formats ----------------------------------------------------------


def load_sidecars(path) -> List[TextSidecar]:
    """JSONL with lines {"_id": ..., "text": ...}."""
    path = Path(path)
    out = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out.append(TextSidecar(doc=str(obj["_id"]), text=str(obj["text"])))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ParseError(str(exc), path=str(path), line=lineno) from exc
    return out


def load_ranking_file(path) -> Dict[str, List[ScoredDoc]]:
    """TSV `query-id <TAB> doc-id <TAB> rank <TAB> score`, grouped by query."""
    path = Path(path)
    rows: Dict[str, List[Tuple[int, str, float]]] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError("expected 4 tab-separated fields", path=str(path), line=lineno)
            qid, doc, rank, score = parts
            try:
                rows.setdefault(qid, []).append((int(rank), doc, float(score)))
            except ValueError as exc:
                raise ParseError(str(exc), path=str(path), line=lineno) from exc
    return {
        qid: [ScoredDoc(doc=doc, score=score) for _, doc, score in sorted(entries)]
        for qid, entries in rows.items()
    }


def save_negatives(path, negatives: Dict[str, Tuple[str, List[str]]]) -> None:
    """TSV `query-id <TAB> positive-id <TAB> neg1,neg2,...`, sorted by query id."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for qid in sorted(negatives):
            pos, negs = negatives[qid]
            fh.write(f"{qid}\t{pos}\t{','.join(negs)}\n")
