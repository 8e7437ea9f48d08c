import json
import string
from pathlib import Path

import numpy as np
import pytest


def random_word(rng, lo=4, hi=9):
    letters = rng.choice(list(string.ascii_lowercase), size=int(rng.integers(lo, hi)))
    return "".join(letters)


def make_beir_dataset(root: Path, n_docs=200, n_queries=40, seed=7, grade=2):
    """Toy BEIR-format dataset: each query is its positive doc's text with
    one word swapped, so it shares most character 3-grams with exactly
    that doc."""
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    (root / "qrels").mkdir(exist_ok=True)

    docs = {}
    for i in range(n_docs):
        did = f"d{i:04d}"
        docs[did] = " ".join(random_word(rng) for _ in range(8))
    with (root / "corpus.jsonl").open("w", encoding="utf-8") as fh:
        for did, text in docs.items():
            fh.write(json.dumps({"_id": did, "title": "", "text": text}) + "\n")

    queries = {}
    qrels = []
    doc_ids = list(docs)
    for i in range(n_queries):
        qid = f"q{i:04d}"
        did = doc_ids[i]
        words = docs[did].split()
        words[-1] = random_word(rng)
        queries[qid] = " ".join(words)
        qrels.append((qid, did, grade))
    with (root / "queries.jsonl").open("w", encoding="utf-8") as fh:
        for qid, text in queries.items():
            fh.write(json.dumps({"_id": qid, "text": text}) + "\n")
    with (root / "qrels" / "test.tsv").open("w", encoding="utf-8") as fh:
        fh.write("query-id\tcorpus-id\tscore\n")
        for qid, did, g in qrels:
            fh.write(f"{qid}\t{did}\t{g}\n")
    return root


@pytest.fixture
def toy_dataset(tmp_path):
    return make_beir_dataset(tmp_path / "toy", n_docs=30, n_queries=10)


def random_run(rng, n_docs=20, n_queries=10, depth=15):
    """Random (run, qrels) instance over small id spaces."""
    doc_ids = [f"d{i}" for i in range(n_docs)]
    run = {}
    qrels = {}
    for q in range(n_queries):
        qid = f"q{q}"
        picked = rng.permutation(n_docs)[: min(depth, n_docs)]
        run[qid] = [(doc_ids[i], float(rng.standard_normal())) for i in picked]
        for i in range(n_docs):
            g = int(rng.choice([0, 0, 0, 1, 2]))
            if g:
                qrels[(qid, doc_ids[i])] = g
    return run, qrels
