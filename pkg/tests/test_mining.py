import math

import numpy as np
import pytest

from docret.core import DenseEmbedding, ScoredDoc
from docret.errors import EmptyQuery, NoNeighbors, PoolTooSmall
from docret.mining import (
    MiningConfig,
    PageRef,
    TextSidecar,
    bm25_rank,
    embedding_rank,
    load_ranking_file,
    load_sidecars,
    mine_negatives,
    page_neighbor_negatives,
    rrf_fuse,
    save_negatives,
    tokenize,
)
from docret.scoring import build_dense_index, search_dense


class TestBM25:
    def test_absent_term_scores_zero(self):
        cars = [TextSidecar("a", "cat dog"), TextSidecar("b", "bird fish")]
        ranked = bm25_rank("zebra", cars, top_n=10)
        assert all(r.score == 0.0 for r in ranked)

    def test_hand_idf_and_score(self):
        # N=3, term in exactly one doc of length 1, so tf saturation and
        # length normalization reduce to a closed form
        cars = [TextSidecar("a", "zebra"), TextSidecar("b", "cat"), TextSidecar("c", "dog")]
        ranked = bm25_rank("zebra", cars, top_n=3)
        idf = math.log(1 + 2.5 / 1.5)
        assert idf == pytest.approx(0.980829, abs=1e-6)
        k1, b = 1.2, 0.75
        expected = idf * 1 * (k1 + 1) / (1 + k1 * (1 - b + b * 1.0 / 1.0))
        assert ranked[0].doc == "a"
        assert ranked[0].score == pytest.approx(expected, abs=1e-9)

    def test_verbatim_beats_disjoint(self):
        cars = [
            TextSidecar("match", "exact query words here"),
            TextSidecar("other", "completely unrelated content"),
        ]
        ranked = bm25_rank("exact query words here", cars, top_n=2)
        assert ranked[0].doc == "match" and ranked[0].score > ranked[1].score

    def test_scores_non_negative(self):
        rng = np.random.default_rng(0)
        words = [f"w{i}" for i in range(30)]
        cars = [
            TextSidecar(f"d{i}", " ".join(rng.choice(words, size=10))) for i in range(20)
        ]
        ranked = bm25_rank("w1 w2 w3", cars, top_n=20)
        assert all(r.score >= 0.0 for r in ranked)

    def test_empty_query(self):
        with pytest.raises(EmptyQuery):
            bm25_rank("   ...   ", [TextSidecar("a", "text")], top_n=5)

    def test_unicode_tokenization(self):
        assert tokenize("ಕನ್ನಡ text, 123!") == ["ಕನ್ನಡ", "text", "123"]


class TestEmbeddingRank:
    def test_agrees_with_exact_search(self):
        rng = np.random.default_rng(1)
        records = [(f"d{i}", DenseEmbedding(rng.standard_normal(8))) for i in range(200)]
        idx = build_dense_index(records)
        q = DenseEmbedding(rng.standard_normal(8))
        assert embedding_rank(q, idx, 20) == search_dense(idx, q, 20, mode="exact")

    def test_self_query_first(self):
        rng = np.random.default_rng(2)
        records = [(f"d{i}", DenseEmbedding(rng.standard_normal(8))) for i in range(10)]
        idx = build_dense_index(records)
        assert embedding_rank(records[4][1], idx, 10)[0].doc == "d4"


def _ranking(*docs):
    return [ScoredDoc(doc=d, score=float(len(docs) - i)) for i, d in enumerate(docs)]


class TestRRF:
    def test_rank_one_in_both(self):
        fused = rrf_fuse([_ranking("x", "y"), _ranking("x", "z")], rrf_k=60)
        assert fused[0].doc == "x"
        assert fused[0].score == pytest.approx(2 / 61, abs=1e-12)

    def test_single_ranking_preserves_order(self):
        fused = rrf_fuse([_ranking("a", "b", "c")], rrf_k=60)
        assert [f.doc for f in fused] == ["a", "b", "c"]

    def test_twice_listed_beats_single_top(self):
        fused = rrf_fuse([_ranking("solo", "both"), _ranking("other", "both")], rrf_k=60)
        scores = {f.doc: f.score for f in fused}
        assert scores["solo"] == pytest.approx(1 / 61, abs=1e-12)
        assert scores["both"] == pytest.approx(2 / 62, abs=1e-12)
        assert fused[0].doc == "both"

    def test_input_order_invariance(self):
        a = _ranking("p", "q", "r")
        b = _ranking("r", "p")
        assert rrf_fuse([a, b], 60) == rrf_fuse([b, a], 60)

    def test_identical_rankings_keep_order(self):
        r = _ranking("m", "n", "o")
        assert [f.doc for f in rrf_fuse([r, r, r], 60)] == ["m", "n", "o"]

    def test_empty_inputs(self):
        assert rrf_fuse([[], []], 60) == []


class TestMineNegatives:
    def test_positive_excluded(self):
        fused = _ranking(*[f"d{i}" for i in range(21)])
        cfg = MiningConfig(K=3, pool_size=20, seed=0)
        for trial in range(1000):
            negs = mine_negatives(f"q{trial}", "d0", fused, cfg)
            assert "d0" not in negs and len(negs) == 3
            assert set(negs) <= {f"d{i}" for i in range(1, 21)}

    def test_pool_exactly_k(self):
        fused = _ranking("pos", "a", "b", "c")
        negs = mine_negatives("q", "pos", fused, MiningConfig(K=3, pool_size=20))
        assert negs == ["a", "b", "c"]

    def test_deterministic_per_seed(self):
        fused = _ranking(*[f"d{i}" for i in range(30)])
        cfg = MiningConfig(K=3, pool_size=20, seed=99)
        assert mine_negatives("q1", "d0", fused, cfg) == mine_negatives("q1", "d0", fused, cfg)

    def test_pool_too_small(self):
        fused = _ranking("pos", "a")
        with pytest.raises(PoolTooSmall):
            mine_negatives("q", "pos", fused, MiningConfig(K=3, pool_size=20))


class TestPageNeighbors:
    def _pages(self, source, n):
        return [PageRef(doc=f"{source}-p{i}", source_doc=source, page_no=i) for i in range(n)]

    def test_boundary_clipping(self):
        pages = self._pages("doc", 2)
        negs = page_neighbor_negatives(pages[0], pages, MiningConfig(K=3))
        assert negs == ["doc-p1"]

    def test_window_membership(self):
        pages = self._pages("doc", 20)
        negs = page_neighbor_negatives(pages[5], pages, MiningConfig(K=3, seed=1))
        assert len(negs) == 3
        assert set(negs) <= {f"doc-p{i}" for i in (2, 3, 4, 6, 7, 8)}

    def test_single_page_doc(self):
        pages = self._pages("doc", 1)
        with pytest.raises(NoNeighbors):
            page_neighbor_negatives(pages[0], pages, MiningConfig())

    def test_other_documents_ignored(self):
        pages = self._pages("a", 3) + self._pages("b", 3)
        negs = page_neighbor_negatives(pages[1], pages, MiningConfig(K=3))
        assert set(negs) == {"a-p0", "a-p2"}


class TestFiles:
    def test_ranking_file_round_trip(self, tmp_path):
        path = tmp_path / "rank.tsv"
        path.write_text("q1\td2\t1\t9.5\nq1\td7\t2\t8.0\nq2\td1\t1\t3.0\n")
        ranks = load_ranking_file(path)
        assert [e.doc for e in ranks["q1"]] == ["d2", "d7"]
        assert ranks["q2"][0].score == 3.0

    def test_sidecar_loading(self, tmp_path):
        path = tmp_path / "side.jsonl"
        path.write_text('{"_id": "d1", "text": "hello"}\n{"_id": "d2", "text": "world"}\n')
        cars = load_sidecars(path)
        assert [c.doc for c in cars] == ["d1", "d2"]

    def test_negatives_output(self, tmp_path):
        path = tmp_path / "negs.tsv"
        save_negatives(path, {"q2": ("p2", ["a", "b"]), "q1": ("p1", ["c"])})
        assert path.read_text() == "q1\tp1\tc\nq2\tp2\ta,b\n"
