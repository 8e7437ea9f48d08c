import numpy as np
import pytest

from docret import oracles
from docret.core import DenseEmbedding, MultiVectorEmbedding
from docret.errors import AnnUnavailable, DimMismatch, DuplicateId, ZeroVector
from docret.hnsw import HnswParams
from docret.scoring import (
    MultiVectorIndex,
    build_dense_index,
    cosine,
    load_dense_index,
    maxsim,
    maxsim_normalized,
    save_dense_index,
    search_dense,
    search_multivector,
)


def _unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


class TestCosine:
    def test_identical(self):
        v = DenseEmbedding(_unit([0.3, -0.4, 0.5]))
        assert cosine(v, v) == pytest.approx(1.0, abs=1e-6)

    def test_orthogonal(self):
        assert cosine(DenseEmbedding([1, 0]), DenseEmbedding([0, 1])) == pytest.approx(0.0)

    def test_hand_example(self):
        assert cosine(DenseEmbedding([1, 0]), DenseEmbedding(_unit([1, 1]))) == pytest.approx(
            0.70711, abs=1e-5
        )

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            cosine(DenseEmbedding([1, 0]), DenseEmbedding([1, 0, 0]))

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            cosine(DenseEmbedding([0, 0]), DenseEmbedding([1, 0]))


class TestMaxSim:
    def test_verbatim_tokens(self):
        d = MultiVectorEmbedding([[1, 0], [0, 1], _unit([1, 1])])
        q = MultiVectorEmbedding([[1, 0], [0, 1]])
        assert maxsim(q, d) == pytest.approx(2.0, abs=1e-6)

    def test_all_orthogonal(self):
        q = MultiVectorEmbedding([[1, 0, 0, 0], [0, 1, 0, 0]])
        d = MultiVectorEmbedding([[0, 0, 1, 0], [0, 0, 0, 1]])
        assert maxsim(q, d) == pytest.approx(0.0, abs=1e-6)

    def test_hand_example(self):
        q = MultiVectorEmbedding([[1, 0], [0.6, 0.8]])
        d = MultiVectorEmbedding([[1, 0], [0, 1]])
        assert maxsim(q, d) == pytest.approx(1.8, abs=1e-6)
        assert maxsim_normalized(q, d) == pytest.approx(0.9, abs=1e-6)

    def test_single_token_equals_maxsim(self):
        q = MultiVectorEmbedding([[0.6, 0.8]])
        d = MultiVectorEmbedding([[0, 1], [1, 0]])
        assert maxsim_normalized(q, d) == maxsim(q, d)

    def test_self_similarity_normalized(self):
        rng = np.random.default_rng(3)
        q = MultiVectorEmbedding(rng.standard_normal((5, 8))).normalize_rows()
        assert maxsim_normalized(q, q) == pytest.approx(1.0, abs=1e-6)

    def test_token_permutation_invariance(self):
        rng = np.random.default_rng(4)
        q = MultiVectorEmbedding(rng.standard_normal((4, 8)))
        d = MultiVectorEmbedding(rng.standard_normal((6, 8)))
        qp = MultiVectorEmbedding(q.tokens[rng.permutation(4)])
        dp = MultiVectorEmbedding(d.tokens[rng.permutation(6)])
        assert maxsim(qp, dp) == pytest.approx(maxsim(q, d), abs=1e-9)

    def test_monotone_in_doc_tokens(self):
        rng = np.random.default_rng(5)
        q = MultiVectorEmbedding(rng.standard_normal((4, 8)))
        d_small = rng.standard_normal((3, 8))
        d_big = np.vstack([d_small, rng.standard_normal((2, 8))])
        assert maxsim(q, MultiVectorEmbedding(d_big)) >= maxsim(q, MultiVectorEmbedding(d_small)) - 1e-12

    def test_matches_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            q = rng.standard_normal((int(rng.integers(1, 6)), 8))
            d = rng.standard_normal((int(rng.integers(1, 8)), 8))
            got = maxsim(MultiVectorEmbedding(q), MultiVectorEmbedding(d))
            want = oracles.oracle_maxsim(
                MultiVectorEmbedding(q).tokens, MultiVectorEmbedding(d).tokens
            )
            assert got == pytest.approx(want, abs=1e-6)


def _random_records(rng, n, dim):
    return [(f"d{i:04d}", DenseEmbedding(rng.standard_normal(dim))) for i in range(n)]


class TestDenseIndex:
    def test_build_counts(self):
        rng = np.random.default_rng(0)
        idx = build_dense_index(_random_records(rng, 3, 8))
        assert idx.n_docs == 3 and idx.dim == 8

    def test_duplicate_ids(self):
        v = DenseEmbedding([1.0, 0.0])
        with pytest.raises(DuplicateId):
            build_dense_index([("a", v), ("a", v)])

    def test_exact_matches_brute_force(self):
        rng = np.random.default_rng(1)
        records = _random_records(rng, 300, 16)
        idx = build_dense_index(records)
        matrix = np.stack([e.values for _, e in records])
        ids = [rid for rid, _ in records]
        for _ in range(20):
            q = rng.standard_normal(16)
            got = search_dense(idx, DenseEmbedding(q), 10)
            want = oracles.oracle_knn(matrix, ids, q, 10)
            assert [g.doc for g in got] == [w for w, _ in want]

    def test_self_query_first(self):
        rng = np.random.default_rng(2)
        records = _random_records(rng, 20, 8)
        idx = build_dense_index(records)
        hit = search_dense(idx, records[7][1], 1)[0]
        assert hit.doc == records[7][0] and hit.score == pytest.approx(1.0, abs=1e-6)

    def test_k_larger_than_corpus(self):
        rng = np.random.default_rng(3)
        idx = build_dense_index(_random_records(rng, 5, 8))
        assert len(search_dense(idx, DenseEmbedding(rng.standard_normal(8)), 50)) == 5

    def test_ann_without_graph(self):
        rng = np.random.default_rng(4)
        idx = build_dense_index(_random_records(rng, 5, 8))
        with pytest.raises(AnnUnavailable):
            search_dense(idx, DenseEmbedding(rng.standard_normal(8)), 3, mode="ann")

    def test_dim_mismatch(self):
        rng = np.random.default_rng(5)
        idx = build_dense_index(_random_records(rng, 5, 8))
        with pytest.raises(DimMismatch):
            search_dense(idx, DenseEmbedding(rng.standard_normal(4)), 3)

    def test_persistence_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        idx = build_dense_index(
            _random_records(rng, 50, 8), HnswParams(M=8, ef_construction=40, seed=9)
        )
        save_dense_index(idx, tmp_path / "idx")
        loaded = load_dense_index(tmp_path / "idx")
        assert loaded.ids == idx.ids
        assert np.array_equal(loaded.matrix, idx.matrix)
        q = DenseEmbedding(rng.standard_normal(8))
        assert search_dense(loaded, q, 5, mode="ann") == search_dense(idx, q, 5, mode="ann")

    def test_save_is_deterministic(self, tmp_path):
        rng = np.random.default_rng(7)
        records = _random_records(rng, 20, 8)
        save_dense_index(build_dense_index(records), tmp_path / "a")
        save_dense_index(build_dense_index(records), tmp_path / "b")
        assert (tmp_path / "a" / "vectors.bin").read_bytes() == (
            tmp_path / "b" / "vectors.bin"
        ).read_bytes()


class TestMultiVectorSearch:
    def _index(self, rng, n=50, dim=8):
        ids = [f"d{i:03d}" for i in range(n)]
        docs = [
            MultiVectorEmbedding(rng.standard_normal((int(rng.integers(2, 6)), dim)))
            for _ in range(n)
        ]
        return ids, docs, MultiVectorIndex(ids, docs)

    def test_single_doc_corpus(self):
        rng = np.random.default_rng(0)
        idx = MultiVectorIndex(["only"], [MultiVectorEmbedding(rng.standard_normal((3, 8)))])
        q = MultiVectorEmbedding(rng.standard_normal((2, 8)))
        assert [h.doc for h in search_multivector(idx, q, 5)] == ["only"]

    def test_self_query_scores_one(self):
        rng = np.random.default_rng(1)
        ids, docs, idx = self._index(rng)
        q = docs[13].normalize_rows()
        top = search_multivector(idx, q, 1, normalized=True)[0]
        assert top.doc == ids[13] and top.score == pytest.approx(1.0, abs=1e-6)

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(2)
        ids, docs, idx = self._index(rng, n=50)
        q = MultiVectorEmbedding(rng.standard_normal((3, 8)))
        got = search_multivector(idx, q, 50)
        want = {
            i: oracles.oracle_maxsim(q.tokens, d.normalize_rows().tokens)
            for i, d in zip(ids, docs)
        }
        for hit in got:
            assert hit.score == pytest.approx(want[hit.doc], abs=1e-6)
