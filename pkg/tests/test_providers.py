import numpy as np
import pytest

from docret.core import DenseEmbedding, MultiVectorEmbedding
from docret.errors import (
    DimMismatch,
    DuplicateId,
    EmptyText,
    ParseError,
    RemoteUnavailable,
)
from docret.providers import (
    EmbeddingRecord,
    PrecomputedProvider,
    RemoteProvider,
    SyntheticProvider,
    load_precomputed,
    save_precomputed,
)
from docret.scoring import cosine


class TestSynthetic:
    def test_deterministic(self):
        p = SyntheticProvider(seed=7, dim=64)
        a = p.embed_text("some document text")
        b = p.embed_text("some document text")
        assert np.array_equal(a.values, b.values)

    def test_cross_instance_deterministic(self):
        a = SyntheticProvider(seed=7, dim=64).embed_text("hello world")
        b = SyntheticProvider(seed=7, dim=64).embed_text("hello world")
        assert np.array_equal(a.values, b.values)

    def test_unit_norm(self):
        p = SyntheticProvider(seed=7, dim=64)
        for text in ("a", "hello", "многоязычный текст", "ಕನ್ನಡ ಪಠ್ಯ"):
            assert abs(np.linalg.norm(p.embed_text(text).values.astype(np.float64)) - 1.0) <= 1e-6

    def test_different_texts_differ(self):
        p = SyntheticProvider(seed=7, dim=64)
        assert cosine(p.embed_text("a"), p.embed_text("b")) < 1.0

    def test_empty_text(self):
        p = SyntheticProvider(seed=7, dim=64)
        with pytest.raises(EmptyText):
            p.embed_text("   ")

    def test_seed_changes_embedding(self):
        a = SyntheticProvider(seed=1, dim=64).embed_text("hello world")
        b = SyntheticProvider(seed=2, dim=64).embed_text("hello world")
        assert not np.array_equal(a.values, b.values)

    def test_ngram_overlap_beats_disjoint(self):
        # fixed 20-pair fixture: overlapping pair vs disjoint pair,
        # overlap cosine must win by at least 0.05
        p = SyntheticProvider(seed=7, dim=256)
        rng = np.random.default_rng(123)
        import string

        def word(n=10):
            return "".join(rng.choice(list(string.ascii_lowercase), size=n))

        for _ in range(20):
            base = word(24)
            overlapping = base[:16] + word(8)  # shares a long prefix
            disjoint = word(24)
            c_overlap = cosine(p.embed_text(base), p.embed_text(overlapping))
            c_disjoint = cosine(p.embed_text(base), p.embed_text(disjoint))
            assert c_overlap - c_disjoint >= 0.05


class TestSyntheticMultivector:
    def test_single_word_single_token(self):
        p = SyntheticProvider(seed=7, dim=64)
        assert p.embed_text_multivector("hello", max_tokens=8).n_tokens == 1

    def test_rows_unit_norm(self):
        p = SyntheticProvider(seed=7, dim=64)
        mv = p.embed_text_multivector("several words of text here", max_tokens=8)
        norms = np.linalg.norm(mv.tokens.astype(np.float64), axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-6)

    def test_deterministic(self):
        p = SyntheticProvider(seed=7, dim=64)
        a = p.embed_text_multivector("one two three", max_tokens=8)
        b = p.embed_text_multivector("one two three", max_tokens=8)
        assert np.array_equal(a.tokens, b.tokens)

    def test_max_tokens_cap(self):
        p = SyntheticProvider(seed=7, dim=64)
        text = " ".join(f"w{i}" for i in range(20))
        assert p.embed_text_multivector(text, max_tokens=4).n_tokens == 4


class TestPrecomputedFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "emb.tsv"
        records = {
            "a": EmbeddingRecord("a", "dense", DenseEmbedding([1.0, 0.0, 0.0, 0.0])),
            "b": EmbeddingRecord("b", "dense", DenseEmbedding([0.0, 1.0, 0.0, 0.0])),
        }
        save_precomputed(path, records)
        loaded = load_precomputed(path)
        assert set(loaded) == {"a", "b"}
        assert np.array_equal(loaded["a"].payload.values, records["a"].payload.values)

    def test_single_dense_record(self, tmp_path):
        path = tmp_path / "one.tsv"
        path.write_text("x\tdense\t1.0,2.0,3.0,4.0\n")
        loaded = load_precomputed(path)
        assert len(loaded) == 1 and loaded["x"].payload.dim == 4

    def test_multivector_record(self, tmp_path):
        path = tmp_path / "mv.tsv"
        path.write_text("x\tmv\t1.0,0.0;0.0,1.0\n")
        loaded = load_precomputed(path)
        assert loaded["x"].kind == "mv" and loaded["x"].payload.n_tokens == 2

    def test_dim_mismatch(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("a\tdense\t1.0,2.0,3.0,4.0\nb\tdense\t1.0,2.0\n")
        with pytest.raises(DimMismatch):
            load_precomputed(path)

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "dup.tsv"
        path.write_text("a\tdense\t1.0,2.0\na\tdense\t1.0,2.0\n")
        with pytest.raises(DuplicateId):
            load_precomputed(path)

    def test_parse_error_carries_line(self, tmp_path):
        path = tmp_path / "broken.tsv"
        path.write_text("a\tdense\t1.0,2.0\nb\tdense\tnot-a-number\n")
        with pytest.raises(ParseError) as err:
            load_precomputed(path)
        assert err.value.line == 2

    def test_provider_lookup(self, tmp_path):
        path = tmp_path / "emb.tsv"
        path.write_text("q1\tdense\t1.0,0.0\n")
        prov = PrecomputedProvider(path)
        assert prov.embed_query("q1", "ignored").dim == 2
        with pytest.raises(ParseError):
            prov.embed_query("missing", "ignored")


class TestRemote:
    def test_dense_round_trip(self, monkeypatch):
        captured = {}

        class FakeResponse:
            status_code = 200

            def json(self):
                return {"embeddings": [[0.6, 0.8]]}

        def fake_post(url, json=None, timeout=None):
            captured.update(url=url, body=json)
            return FakeResponse()

        import httpx

        monkeypatch.setattr(httpx, "post", fake_post)
        prov = RemoteProvider("http://svc:9000", timeout_ms=500)
        out = prov.embed_text("hello")
        assert captured["url"] == "http://svc:9000/embed"
        assert captured["body"] == {"inputs": ["hello"], "mode": "dense"}
        np.testing.assert_allclose(out.values, [0.6, 0.8])

    def test_non_200_raises(self, monkeypatch):
        class FakeResponse:
            status_code = 500

        import httpx

        monkeypatch.setattr(httpx, "post", lambda *a, **k: FakeResponse())
        with pytest.raises(RemoteUnavailable):
            RemoteProvider("http://svc:9000").embed_text("hello")

    def test_connection_error(self, monkeypatch):
        import httpx

        def boom(*a, **k):
            raise OSError("connection refused")

        monkeypatch.setattr(httpx, "post", boom)
        with pytest.raises(RemoteUnavailable):
            RemoteProvider("http://svc:9000").embed_text("hello")
