import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from memharbor.errors import ConfigError, DimensionMismatch, FutureMemory, NoDimensions
from memharbor.model import Category, Dimension, EntityMention, EntityType, Intent
from memharbor.scoring import (
    DimensionWeights,
    aggregate,
    category_score,
    context_score,
    cosine,
    entity_score,
    intent_score,
    semantic_score,
    temporal_score,
)

DAY = 86400
P = EntityType.PERSON


def ents(*names):
    return [EntityMention(n, P) for n in names]


def test_semantic_fixtures():
    v = np.array([1.0, 0.0])
    assert semantic_score(v, v) == 0.5
    assert semantic_score(v, np.array([0.0, 1.0])) == 0.0
    assert semantic_score(v, np.array([0.5, math.sqrt(3) / 2])) == pytest.approx(0.25, abs=1e-12)
    assert semantic_score(v, np.zeros(2)) == 0.0
    with pytest.raises(DimensionMismatch):
        cosine(v, np.zeros(3))


def test_cosine_clamped():
    v = np.array([0.1, 0.2, 0.3])
    assert cosine(v, v * 7) <= 1.0


def test_entity_fixtures():
    assert entity_score(ents("alice"), ents("Alice")) == pytest.approx(0.4)
    assert entity_score([], ents("alice")) == 0.0
    assert entity_score(ents("alice"), []) == 0.0
    assert entity_score(ents("jon"), ents("john")) == pytest.approx(6 / 7 * 0.4, abs=1e-12)
    # best match is picked per query entity, then the cap applies
    assert entity_score(ents("jon", "mary"), ents("john", "mary")) == 0.4


def test_category_fixtures():
    pi, pr = Category.PERSONAL_INFO, Category.PROFESSIONAL_INFO
    assert category_score({pi}, {pr}) == 0.0
    assert category_score({pi}, {pi, pr}) == 0.3
    assert category_score({pi, pr}, {pi, pr}) == 0.4


def test_intent_fixtures():
    s, g = Intent.INFORMATION_SEEKING, Intent.GOAL_SETTING
    assert intent_score(s, s) == 0.3
    assert intent_score(s, g) == 0.0
    assert intent_score(Intent.UNKNOWN, Intent.UNKNOWN) == 0.0


def test_temporal_fixtures():
    assert temporal_score(100, 100) == 0.2
    assert temporal_score(30 * DAY, 0) == pytest.approx(0.1, abs=1e-12)
    assert temporal_score(60 * DAY, 0) == pytest.approx(0.05, abs=1e-12)
    with pytest.raises(FutureMemory):
        temporal_score(0, 1)


@given(st.integers(0, 10**9), st.integers(1, 10**9))
def test_temporal_strictly_decreasing(dt, step):
    if dt + step <= 10**9:
        assert temporal_score(dt + step, 0) < temporal_score(dt, 0)


def test_context_fixtures():
    assert context_score(["c1", "c2"], ["c2", "c1"], "", "") == 0.2
    assert context_score([], [], "", "") == 0.0
    assert context_score(["c1"], ["c2"], "same text", "same text") == pytest.approx(0.2)
    # text only helps when both sides have text
    assert context_score([], [], "", "something") == 0.0


def test_aggregate_fixtures():
    S, I = Dimension.SEMANTIC, Dimension.INTENT
    assert aggregate({S: 0.5}, {S}) == 0.5
    assert aggregate({S: 0.4, I: 0.3}, {S, I}) == pytest.approx(2.1, abs=1e-12)
    assert aggregate({S: 0.0, I: 0.0}, {S, I}) == 0.0
    assert aggregate({}, {S, I}) == 0.0
    with pytest.raises(NoDimensions):
        aggregate({}, set())
    with pytest.raises(ValueError):
        aggregate({S: 0.1}, {I})


@given(st.lists(st.floats(0, 1), min_size=2, max_size=6))
def test_bonus_exactness(values):
    dims = list(Dimension)[:len(values)]
    scores = dict(zip(dims, values))
    multi = aggregate(scores, set(dims))
    single = aggregate({Dimension.SEMANTIC: sum(scores[d] for d in dims)}, {Dimension.SEMANTIC})
    assert multi == pytest.approx(3.0 * single, rel=1e-12, abs=1e-15)


@given(st.lists(st.lists(st.floats(0, 1), min_size=3, max_size=3), min_size=2, max_size=8),
       st.floats(0.01, 100))
def test_scaling_preserves_ranking(rows, c):
    dims = [Dimension.SEMANTIC, Dimension.ENTITY, Dimension.INTENT]
    base = [aggregate(dict(zip(dims, r)), set(dims)) for r in rows]
    scaled = [aggregate(dict(zip(dims, [x * c for x in r])), set(dims)) for r in rows]
    for i in range(len(rows)):
        for j in range(len(rows)):
            if base[i] < base[j] * (1 - 1e-9):
                assert scaled[i] < scaled[j]


names = st.text(alphabet="abcjohnmry", min_size=1, max_size=6)


@given(st.lists(names, max_size=4), st.lists(names, max_size=4))
def test_entity_cap(q, m):
    assert 0.0 <= entity_score(ents(*q), ents(*m)) <= 0.4


@given(st.sets(st.sampled_from(list(Category))), st.sets(st.sampled_from(list(Category))))
def test_category_cap_and_self(a, b):
    assert 0.0 <= category_score(a, b) <= 0.4
    assert category_score(a, a) == min(0.4, 0.3 * len(a))


@given(st.lists(names, min_size=1, max_size=4))
def test_entity_self_saturates(m):
    assert entity_score(ents(*m), ents(*m)) == 0.4


def test_weights_file(tmp_path):
    path = tmp_path / "w.txt"
    path.write_text("# tuned\nw_semantic=0.7\nalpha = 0.1\n")
    w = DimensionWeights.load(path)
    assert w.w_semantic == 0.7 and w.alpha == 0.1 and w.w_intent == 0.3
    with pytest.raises(ConfigError):
        DimensionWeights.parse("w_bogus=1")
    with pytest.raises(ConfigError):
        DimensionWeights.parse("alpha=0")
    with pytest.raises(ConfigError):
        DimensionWeights.parse("w_entity=-1")
    with pytest.raises(ConfigError):
        DimensionWeights.parse("entity_cap=abc")


def test_custom_weights_used():
    w = DimensionWeights(w_semantic=1.0, per_category_credit=0.1, multi_bonus=2.0)
    v = np.array([1.0, 0.0])
    assert semantic_score(v, v, w) == 1.0
    assert category_score({Category.CONTEXTUAL}, {Category.CONTEXTUAL}, w) == pytest.approx(0.1)
    assert aggregate({Dimension.SEMANTIC: 1.0}, {Dimension.SEMANTIC, Dimension.ENTITY}, w) == 2.0
