"""Brute-force reference implementations for verification.

Everything here transcribes definitions directly -- double loops, central
finite differences, full sorts -- in float64, with no imports from the
production scoring, metric, or loss modules. These functions define the
ground truth that the acceptance suite compares against.
"""

from __future__ import annotations

import math
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .errors import OracleLimitExceeded

MAX_DOCS = 2000
MAX_DIM = 64
MAX_BATCH = 8


def oracle_maxsim(q: np.ndarray, d: np.ndarray) -> float:
    """Double-loop MaxSim over token cosines."""
    q = np.asarray(q, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    total = 0.0
    for i in range(q.shape[0]):
        best = -math.inf
        for j in range(d.shape[0]):
            num = float(np.dot(q[i], d[j]))
            den = math.sqrt(float(np.dot(q[i], q[i]))) * math.sqrt(float(np.dot(d[j], d[j])))
            best = max(best, num / den)
        total += best
    return total


def oracle_knn(matrix: np.ndarray, ids: Sequence[str], q: np.ndarray, k: int) -> List[Tuple[str, float]]:
    """Exact top-k by cosine with the global tie-break (score desc, id asc)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape[0] > MAX_DOCS or matrix.shape[1] > MAX_DIM:
        raise OracleLimitExceeded(f"instance {matrix.shape} beyond oracle limits")
    q = np.asarray(q, dtype=np.float64)
    qn = math.sqrt(float(np.dot(q, q)))
    scored = []
    for i, row in enumerate(matrix):
        rn = math.sqrt(float(np.dot(row, row)))
        scored.append((ids[i], float(np.dot(row, q)) / (rn * qn)))
    scored.sort(key=lambda p: (-p[1], p[0]))
    return scored[:k]


def oracle_grad(loss_fn: Callable[[Sequence[np.ndarray]], float],
                arrays: Sequence[np.ndarray], step: float = 1e-5) -> List[np.ndarray]:
    """Central finite differences of a scalar function of several arrays."""
    grads = []
    for a_idx, arr in enumerate(arrays):
        arr = np.asarray(arr, dtype=np.float64)
        g = np.zeros_like(arr)
        flat = g.ravel()
        base = [np.array(x, dtype=np.float64, copy=True) for x in arrays]
        for i in range(arr.size):
            plus = [x.copy() for x in base]
            minus = [x.copy() for x in base]
            plus[a_idx].ravel()[i] += step
            minus[a_idx].ravel()[i] -= step
            flat[i] = (loss_fn(plus) - loss_fn(minus)) / (2.0 * step)
        grads.append(g)
    return grads


def _sorted_ranking(entries: Sequence[Tuple[str, float]]) -> List[str]:
    return [doc for doc, _ in sorted(entries, key=lambda p: (-p[1], p[0]))]


def oracle_metrics(
    ranking: Sequence[Tuple[str, float]],
    positives: Dict[str, int],
    k: int,
) -> Dict[str, float]:
    """NDCG, recall, MAP, MRR at k for one query, straight from definitions.

    `positives` maps doc id -> grade (> 0 only). Returns an empty dict if
    there are no positives (the query is excluded from averages).
    """
    if not positives:
        return {}
    docs = _sorted_ranking(ranking)[:k]

    dcg = 0.0
    for i, doc in enumerate(docs):
        grade = positives.get(doc, 0)
        dcg += grade / math.log2(i + 2)
    ideal = sorted(positives.values(), reverse=True)[:k]
    idcg = sum(g / math.log2(i + 2) for i, g in enumerate(ideal))
    ndcg = dcg / idcg if idcg > 0 else 0.0

    recall = sum(1 for doc in docs if doc in positives) / len(positives)

    hits = 0
    precision_sum = 0.0
    for i, doc in enumerate(docs):
        if doc in positives:
            hits += 1
            precision_sum += hits / (i + 1)
    ap = precision_sum / min(len(positives), k)

    rr = 0.0
    for i, doc in enumerate(docs):
        if doc in positives:
            rr = 1.0 / (i + 1)
            break

    return {"ndcg": ndcg, "recall": recall, "map": ap, "mrr": rr}


def oracle_mean_metric(
    run: Dict[str, Sequence[Tuple[str, float]]],
    qrels: Dict[Tuple[str, str], int],
    kind: str,
    k: int,
) -> float:
    """Macro average of one metric over queries with at least one positive."""
    values = []
    for qid, ranking in run.items():
        positives = {doc: g for (q, doc), g in qrels.items() if q == qid and g > 0}
        per = oracle_metrics(ranking, positives, k)
        if per:
            values.append(per[kind])
    return sum(values) / len(values) if values else 0.0
