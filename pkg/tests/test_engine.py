import random
import threading
from dataclasses import replace

import pytest

import oracles
from memharbor.embedding import HashEmbedder
from memharbor.engine import NO_MEMORIES, RetrievalConfig, compose_response, retrieve, score_all
from memharbor.graph import build_graph
from memharbor.model import (
    Category,
    Dimension,
    EntityMention,
    EntityType,
    MemoryRecord,
    MemoryStore,
    ScoredMemory,
)
from memharbor.query import QueryProcessor, default_rules
from memharbor.scoring import aggregate, score_dimensions

D = Dimension
WORDS = ("I love hiking with Alice in Paris my job is engineer at Google favorite food pizza "
         "meeting tomorrow the budget plan want to learn piano we discussed").split()


def brute_force(result, store, user, now, k=5, threshold=0.0, variants=None):
    """Rank every candidate by the scalar path, max over variants."""
    variants = variants or [result.query]
    rows = []
    for m in store:
        if (user is not None and m.user_id != user) or m.timestamp > now:
            continue
        best = max(aggregate(score_dimensions(v, m, now), v.enabled_dimensions) for v in variants)
        if threshold == 0.0 or best >= threshold:
            rows.append((-best, -m.timestamp, m.id, best))
    rows.sort()
    return [(r[2], r[3]) for r in rows[:k]]


def random_store(processor, seed, n, users=3, contexts=5):
    rng = random.Random(seed)
    store = MemoryStore()
    for i in range(n):
        text = " ".join(rng.choice(WORDS) for _ in range(rng.randint(0, 9)))
        store.ingest(processor.make_record(f"m{i:05d}", f"u{i % users}", text, 10**6 + rng.randint(0, 10**7),
                                           (f"c{rng.randrange(contexts)}",)))
    return store


def assert_same(result, expected):
    got = [(sm.memory.id, sm.total) for sm in result.ranked]
    assert [g[0] for g in got] == [e[0] for e in expected]
    for (_, a), (_, b) in zip(got, expected):
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_empty_store():
    result = retrieve("anything at all", "u", MemoryStore())
    assert result.ranked == []
    assert result.response_text == NO_MEMORIES
    assert result.variants_used >= 1


def test_identical_memory_first(make_store):
    store = make_store([("a", "u", "My name is Alice", 100), ("b", "u", "I live in Paris", 100),
                        ("c", "u", "Alice likes Paris", 50)])
    result = retrieve("My name is Alice", "u", store, dimensions=set(D), now=100)
    assert result.ranked[0].memory.id == "a"


def test_three_memory_fixture():
    store = MemoryStore(2)
    emb = [1.0, 0.0]
    store.ingest(MemoryRecord("cat", "u", "I enjoy long walks", emb, (), {Category.PREFERENCES_INTERESTS}, timestamp=1))
    store.ingest(MemoryRecord("ent", "u", "Met Jon yesterday", emb, (EntityMention("Jon", EntityType.PERSON),),
                              {Category.CONTEXTUAL}, timestamp=2))
    store.ingest(MemoryRecord("none", "u", "Sky is grey", emb, (), (), timestamp=3))

    # no synonyms, so the query is scored without variants
    proc = QueryProcessor(replace(default_rules(), synonyms={}), HashEmbedder(2))
    result = retrieve("Is John into my favorite hobbies?", "u", store,
                      config=RetrievalConfig(processor=proc),
                      dimensions={D.CATEGORY, D.ENTITY}, now=10)
    q = result.query
    assert [e.surface for e in q.entities] == ["John"]
    assert q.categories == {Category.PREFERENCES_INTERESTS}
    # hand evaluation: entity ratio(john, jon) * 0.4, category 0.3 per shared label, times 3
    cat_total = (0.0 + 0.3) * 3
    ent_total = (min(0.4, oracles.ratio("john", "jon") * 0.4) + 0.0) * 3
    assert result.variants_used == 1
    assert ent_total > cat_total
    assert [sm.memory.id for sm in result.ranked] == ["ent", "cat", "none"]
    assert result.ranked[0].total == pytest.approx(ent_total, abs=1e-12)
    assert result.ranked[1].total == pytest.approx(cat_total, abs=1e-12)
    assert result.ranked[2].total == 0.0
    assert set(result.ranked[0].per_dimension) == {D.CATEGORY, D.ENTITY}


@pytest.mark.parametrize("seed", range(6))
def test_matches_brute_force(processor, seed):
    store = random_store(processor, seed, 300)
    rng = random.Random(100 + seed)
    for _ in range(8):
        text = " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 7)))
        dims = None if rng.random() < 0.3 else set(rng.sample(list(D), rng.randint(1, 6)))
        user = rng.choice([None, "u0", "u1"])
        now = 10**6 + rng.randint(0, 10**7)
        k = rng.randint(1, 12)
        cfg = RetrievalConfig(top_k=k)
        result = retrieve(text, user, store, None, cfg, dimensions=dims, now=now,
                          context_markers=(f"c{rng.randrange(5)}",))
        variants = processor.expand(result.query)
        assert_same(result, brute_force(result, store, user, now, k, variants=variants))


def test_matches_brute_force_with_graph(processor):
    store = random_store(processor, 42, 200, users=1)
    graph = build_graph(store)
    result = retrieve("where does alice work at google", "u0", store, graph, now=2 * 10**7)
    variants = processor.expand(result.query, graph)
    assert result.variants_used == len(variants)
    assert_same(result, brute_force(result, store, "u0", 2 * 10**7, variants=variants))


def test_context_pruning_is_exact(processor):
    # many near-duplicates so bounds overlap heavily, context dimension alone
    store = MemoryStore()
    rng = random.Random(3)
    base = "we discussed the budget plan at the meeting"
    for i in range(500):
        words = base.split()
        for _ in range(rng.randint(0, 4)):
            words[rng.randrange(len(words))] = rng.choice(WORDS)
        store.ingest(processor.make_record(f"m{i:04d}", "u", " ".join(words), i, (f"c{i % 3}",)))
    for k in (1, 5, 40):
        result = retrieve(base, "u", store, config=RetrievalConfig(top_k=k), dimensions={D.CONTEXT})
        assert_same(result, brute_force(result, store, "u", 499, k))


def test_score_all_matches_scalar(processor):
    store = random_store(processor, 9, 120)
    q = processor.analyze("the budget meeting with Alice", 2 * 10**7, set(D), ("c1",))
    for rec, total in score_all(q, store, 2 * 10**7):
        assert total == pytest.approx(aggregate(score_dimensions(q, rec, 2 * 10**7), q.enabled_dimensions),
                                      rel=1e-12, abs=1e-12)


def test_ordering_ties_and_threshold(make_store):
    store = make_store([("b", "u", "same text", 5), ("a", "u", "same text", 5), ("c", "u", "same text", 9),
                        ("d", "u", "other words entirely", 9)])
    result = retrieve("same text", "u", store, dimensions={D.SEMANTIC}, now=9)
    assert [sm.memory.id for sm in result.ranked] == ["c", "a", "b", "d"]
    totals = [sm.total for sm in result.ranked]
    assert totals == sorted(totals, reverse=True)
    high = retrieve("same text", "u", store, None, RetrievalConfig(threshold=0.4),
                    dimensions={D.SEMANTIC}, now=9)
    assert [sm.memory.id for sm in high.ranked] == ["c", "a", "b"]


def test_user_and_time_filters(make_store):
    store = make_store([("a", "u1", "pizza", 10), ("b", "u2", "pizza", 10), ("c", "u1", "pizza", 99)])
    assert [s.memory.id for s in retrieve("pizza", "u1", store, now=50).ranked] == ["a"]
    assert {s.memory.id for s in retrieve("pizza", None, store, now=50).ranked} == {"a", "b"}
    assert [s.memory.id for s in retrieve("pizza", "u1", store).ranked] == ["c", "a"]
    assert retrieve("pizza", "nobody", store).ranked == []


def test_multi_dimension_bonus_on_identity(make_store):
    store = make_store([("a", "u", "I love hiking in Paris", 100)])
    multi = retrieve("I love hiking in Paris", "u", store, dimensions={D.SEMANTIC, D.ENTITY}, now=100).ranked[0]
    parts = sum(multi.per_dimension.values())
    assert multi.total == pytest.approx(3.0 * parts, abs=1e-15)
    single = retrieve("I love hiking in Paris", "u", store, dimensions={D.SEMANTIC}, now=100).ranked[0]
    assert single.total == pytest.approx(single.per_dimension[D.SEMANTIC])


def test_top_k_stability(processor):
    store = random_store(processor, 5, 200, users=1)
    prev = None
    for k in range(1, 30, 4):
        ids = [s.memory.id for s in retrieve("hiking with Alice", "u0", store, config=RetrievalConfig(top_k=k)).ranked]
        if prev is not None:
            assert ids[:len(prev)] == prev
        prev = ids


def test_deterministic_and_thread_safe(processor):
    store = random_store(processor, 8, 400)

    def run():
        return [(s.memory.id, s.total) for s in retrieve("my job at Google", "u1", store).ranked]

    expected = run()
    results = []
    threads = [threading.Thread(target=lambda: results.append(run())) for _ in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(r == expected for r in results)


def test_index_refreshes_after_ingest(make_store, processor):
    store = make_store([("a", "u", "pizza night", 1)])
    assert len(retrieve("pizza", "u", store).ranked) == 1
    store.ingest(processor.make_record("b", "u", "pizza again", 2))
    assert [s.memory.id for s in retrieve("pizza", "u", store).ranked][0] == "b"


def test_top_k_validation():
    with pytest.raises(ValueError):
        RetrievalConfig(top_k=0)


def scored(text, total=1.0):
    return ScoredMemory(MemoryRecord(text, "u", text, [1.0]), {}, total)


def test_compose_response():
    assert compose_response([]) == NO_MEMORIES
    assert "Your name is Alice" in compose_response([scored("Your name is Alice")])
    resp = compose_response([scored("first one"), scored("second one"), scored("third one"), scored("fourth one")])
    assert resp.index("first one") < resp.index("second one") < resp.index("third one")
    assert "fourth one" not in resp
