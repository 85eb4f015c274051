import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from memharbor.config import EmbeddingSettings
from memharbor.embedding import (
    CallableEmbedder,
    EmbeddingProvider,
    HashEmbedder,
    fnv1a_64,
    hash_embed,
    make_provider,
    token_slot,
)
from memharbor.errors import ConfigError, DimensionMismatch, InvalidEmbedding
from memharbor.scoring import cosine


def test_fnv_reference_values():
    # FNV-1a 64 offset basis / published test vectors (seed bytes prepended)
    h = 0xCBF29CE484222325
    for byte in bytes(8) + b"a":
        h = ((h ^ byte) * 0x100000001B3) % 2**64
    assert fnv1a_64(b"a") == h
    assert fnv1a_64(b"a", seed=1) != fnv1a_64(b"a")


def test_empty_text_zero_vector():
    assert not hash_embed("").any()
    assert not hash_embed("!!! ...").any()


def test_deterministic_and_unit():
    a, b = hash_embed("cats purr"), hash_embed("cats purr")
    assert np.array_equal(a, b)
    assert cosine(a, b) == pytest.approx(1.0)
    assert np.linalg.norm(a) == pytest.approx(1.0, abs=1e-12)


def test_cats_vs_dogs_regression():
    same = cosine(hash_embed("cats purr"), hash_embed("cats purr"))
    other = cosine(hash_embed("cats purr"), hash_embed("dogs bark"))
    assert same > other
    # pinned from the reference computation below
    expected = _reference_cosine("cats purr", "dogs bark", 64, 0)
    assert other == pytest.approx(expected, abs=1e-12)


def _reference_cosine(x, y, dim, seed):
    def vec(text):
        v = [0.0] * dim
        for tok in text.lower().split():
            h = 0xCBF29CE484222325
            for byte in seed.to_bytes(8, "little") + tok.encode():
                h = ((h ^ byte) * 0x100000001B3) % 2**64
            v[(h >> 1) % dim] += -1.0 if h & 1 else 1.0
        return v
    a, b = vec(x), vec(y)
    dot = sum(p * q for p, q in zip(a, b))
    na, nb = sum(p * p for p in a) ** 0.5, sum(q * q for q in b) ** 0.5
    return dot / (na * nb)


@given(st.lists(st.sampled_from(["red", "green", "blue", "cat", "dog"]), min_size=1, max_size=8),
       st.randoms())
def test_permutation_invariance(tokens, rnd):
    shuffled = list(tokens)
    rnd.shuffle(shuffled)
    assert np.array_equal(hash_embed(" ".join(tokens)), hash_embed(" ".join(shuffled)))


@given(st.text(min_size=1, max_size=30), st.integers(1, 128), st.integers(0, 2**32))
def test_unit_norm_or_zero(text, dim, seed):
    v = hash_embed(text, dim, seed)
    assert v.shape == (dim,)
    n = np.linalg.norm(v)
    assert n == 0.0 or abs(n - 1.0) < 1e-12


def test_slot_range():
    idx, sign = token_slot("hello", 7, 3)
    assert 0 <= idx < 7 and sign in (1.0, -1.0)


def test_seed_changes_vector():
    assert not np.array_equal(hash_embed("alpha beta gamma", 64, 0), hash_embed("alpha beta gamma", 64, 9))


def test_callable_embedder():
    emb = CallableEmbedder(lambda t: [1.0, float(len(t))], 2)
    assert isinstance(emb, EmbeddingProvider)
    assert emb.embed("abc").tolist() == [1.0, 3.0]
    with pytest.raises(DimensionMismatch):
        CallableEmbedder(lambda t: [1.0], 2).embed("x")
    with pytest.raises(InvalidEmbedding):
        CallableEmbedder(lambda t: [float("nan"), 0.0], 2).embed("x")


def test_make_provider():
    p = make_provider(EmbeddingSettings(), 32)
    assert isinstance(p, HashEmbedder) and p.dimension == 32
    with pytest.raises(DimensionMismatch):
        make_provider(EmbeddingSettings(dimension=16), 32)
    with pytest.raises(ConfigError):
        make_provider(EmbeddingSettings(provider="external"), 32)
    ext = make_provider(EmbeddingSettings(provider="external"), 2, external=lambda t: [0.0, 1.0])
    assert ext.embed("x").tolist() == [0.0, 1.0]
    with pytest.raises(ConfigError):
        make_provider(EmbeddingSettings(provider="cloud"), 2)
