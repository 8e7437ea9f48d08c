"""BEIR-compatible dataset ingestion, retrieval runs, and ranking metrics.

Grades are {0, 1, 2}; a missing (query, doc) judgment counts as 0. NDCG
uses linear gain with a log2(rank+1) discount, the trec-eval convention.
Queries without any positive judgment are excluded from macro averages.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .core import ScoredDoc, rank_scored
from .errors import DanglingReference, ParseError, QueryMismatch

METRICS = ("ndcg@5", "ndcg@10", "recall@5", "recall@10", "map@10", "mrr@10")

VALID_GRADES = {0, 1, 2}


@dataclass
class QrelSet:
    judgments: Dict[Tuple[str, str], int]

    def grade(self, qid: str, doc: str) -> int:
        return self.judgments.get((qid, doc), 0)

    def positives(self, qid: str) -> Dict[str, int]:
        return {d: g for (q, d), g in self.judgments.items() if q == qid and g > 0}

    def query_ids(self) -> List[str]:
        return sorted({q for q, _ in self.judgments})


@dataclass
class BenchmarkDataset:
    corpus: Dict[str, dict]
    queries: Dict[str, str]
    qrels: QrelSet


@dataclass
class RetrievalRun:
    """Per-query ranked lists; lists are canonically tie-broken on creation."""

    rankings: Dict[str, List[ScoredDoc]]

    def __post_init__(self):
        self.rankings = {
            qid: rank_scored((e.doc, e.score) for e in entries)
            for qid, entries in self.rankings.items()
        }


@dataclass
class MetricReport:
    per_query: Dict[str, Dict[str, float]]  # metric -> qid -> value
    means: Dict[str, float]


def load_beir(dirpath) -> BenchmarkDataset:
    """Read corpus.jsonl, queries.jsonl and qrels/test.tsv from a directory."""
    d = Path(dirpath)
    corpus: Dict[str, dict] = {}
    path = d / "corpus.jsonl"
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                corpus[str(obj["_id"])] = obj
            except (json.JSONDecodeError, KeyError) as exc:
                raise ParseError(str(exc), path=str(path), line=lineno) from exc

    queries: Dict[str, str] = {}
    path = d / "queries.jsonl"
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                queries[str(obj["_id"])] = str(obj["text"])
            except (json.JSONDecodeError, KeyError) as exc:
                raise ParseError(str(exc), path=str(path), line=lineno) from exc

    judgments: Dict[Tuple[str, str], int] = {}
    path = d / "qrels" / "test.tsv"
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if lineno == 1 and line.split("\t")[0] in ("query-id", "query_id"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError("expected 3 tab-separated fields", path=str(path), line=lineno)
            qid, doc, score = parts
            try:
                grade = int(score)
            except ValueError as exc:
                raise ParseError(f"non-integer grade {score!r}", path=str(path), line=lineno) from exc
            if grade not in VALID_GRADES:
                raise ParseError(f"grade {grade} outside {{0,1,2}}", path=str(path), line=lineno)
            judgments[(qid, doc)] = grade

    dangling = sorted(
        {q for q, _ in judgments if q not in queries}
        | {doc for _, doc in judgments if doc not in corpus}
    )
    if dangling:
        raise DanglingReference(f"qrels reference unknown ids: {dangling}")
    qrels = QrelSet(judgments)
    if not any(g > 0 for g in judgments.values()):
        raise DanglingReference("dataset has no query with a positive judgment")
    return BenchmarkDataset(corpus=corpus, queries=queries, qrels=qrels)


def run_retrieval(dataset: BenchmarkDataset, provider, index, depth: int = 100,
                  mode: str = "exact") -> RetrievalRun:
    """Embed each query with the provider and rank against the index."""
    from .scoring import search_dense

    rankings = {}
    for qid in sorted(dataset.queries):
        q = provider.embed_query(qid, dataset.queries[qid])
        rankings[qid] = search_dense(index, q, depth, mode=mode)
    return RetrievalRun(rankings)


# -- metrics ---------------------------------------------------------------


def _dcg(grades: List[int], k: int) -> float:
    return sum(g / np.log2(i + 2) for i, g in enumerate(grades[:k]))


def ndcg_at_k(run: RetrievalRun, qrels: QrelSet, k: int) -> Tuple[Dict[str, float], float]:
    per_query = {}
    for qid, ranking in run.rankings.items():
        pos = qrels.positives(qid)
        if not pos:
            continue
        gains = [qrels.grade(qid, e.doc) for e in ranking]
        ideal = sorted(pos.values(), reverse=True)
        idcg = _dcg(ideal, k)
        per_query[qid] = _dcg(gains, k) / idcg if idcg > 0 else 0.0
    mean = float(np.mean(list(per_query.values()))) if per_query else 0.0
    return per_query, mean


def recall_at_k(run: RetrievalRun, qrels: QrelSet, k: int) -> Tuple[Dict[str, float], float]:
    per_query = {}
    for qid, ranking in run.rankings.items():
        pos = qrels.positives(qid)
        if not pos:
            continue
        hit = sum(1 for e in ranking[:k] if e.doc in pos)
        per_query[qid] = hit / len(pos)
    mean = float(np.mean(list(per_query.values()))) if per_query else 0.0
    return per_query, mean


def map_at_k(run: RetrievalRun, qrels: QrelSet, k: int) -> Tuple[Dict[str, float], float]:
    """Mean average precision with binary relevance (grade > 0)."""
    per_query = {}
    for qid, ranking in run.rankings.items():
        pos = qrels.positives(qid)
        if not pos:
            continue
        hits, acc = 0, 0.0
        for i, e in enumerate(ranking[:k], start=1):
            if e.doc in pos:
                hits += 1
                acc += hits / i
        per_query[qid] = acc / min(len(pos), k)
    mean = float(np.mean(list(per_query.values()))) if per_query else 0.0
    return per_query, mean


def mrr_at_k(run: RetrievalRun, qrels: QrelSet, k: int) -> Tuple[Dict[str, float], float]:
    per_query = {}
    for qid, ranking in run.rankings.items():
        pos = qrels.positives(qid)
        if not pos:
            continue
        rr = 0.0
        for i, e in enumerate(ranking[:k], start=1):
            if e.doc in pos:
                rr = 1.0 / i
                break
        per_query[qid] = rr
    mean = float(np.mean(list(per_query.values()))) if per_query else 0.0
    return per_query, mean


_METRIC_FNS = {
    "ndcg": ndcg_at_k,
    "recall": recall_at_k,
    "map": map_at_k,
    "mrr": mrr_at_k,
}


def compute_metrics(run: RetrievalRun, qrels: QrelSet, metrics=METRICS) -> MetricReport:
    per_query, means = {}, {}
    for name in metrics:
        kind, k = name.split("@")
        pq, mean = _METRIC_FNS[kind](run, qrels, int(k))
        per_query[name] = pq
        means[name] = mean
    return MetricReport(per_query=per_query, means=means)


def compare_runs(report_a: MetricReport, report_b: MetricReport) -> Dict[str, dict]:
    """Per-metric mean deltas and relative improvement of A over B."""
    if set(report_a.means) != set(report_b.means):
        raise QueryMismatch("reports cover different metric sets")
    for name in report_a.means:
        if set(report_a.per_query[name]) != set(report_b.per_query[name]):
            raise QueryMismatch(f"reports cover different query sets for {name}")
    out = {}
    for name in sorted(report_a.means):
        a, b = report_a.means[name], report_b.means[name]
        rel: Optional[float] = (a - b) / b if b != 0.0 else None
        out[name] = {"mean_a": a, "mean_b": b, "delta": a - b, "relative": rel}
    return out


# -- run / report files ----------------------------------------------------


def save_run(path, run: RetrievalRun) -> None:
    """TSV `query-id <TAB> doc-id <TAB> rank <TAB> score`."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for qid in sorted(run.rankings):
            for rank, e in enumerate(run.rankings[qid], start=1):
                fh.write(f"{qid}\t{e.doc}\t{rank}\t{e.score:.9f}\n")


def save_report(path, report: MetricReport) -> None:
    lines = ["metric means", "------------"]
    for name in sorted(report.means):
        lines.append(f"{name}\t{report.means[name]:.6f}")
    lines.append("")
    for name in sorted(report.per_query):
        lines.append(f"per-query {name}")
        for qid in sorted(report.per_query[name]):
            lines.append(f"  {qid}\t{report.per_query[name][qid]:.6f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
