import io
import math
import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from memharbor.errors import (
    DimensionMismatch,
    DuplicateId,
    InvalidEmbedding,
    InvalidRecord,
    ParseError,
    UnsupportedVersion,
)
from memharbor.model import (
    Category,
    Dimension,
    EntityMention,
    EntityType,
    Intent,
    MemoryRecord,
    MemoryStore,
    ProcessedQuery,
    dump_store,
    ingest,
    load_store,
    normalize_embedding,
    parse_dimensions,
    save_store,
)


def record(rid="m1", emb=None, dim=64, **kw):
    if emb is None:
        emb = np.zeros(dim)
        emb[0] = 1.0
    return MemoryRecord(id=rid, user_id=kw.pop("user_id", "u"), text=kw.pop("text", "hello"),
                        embedding=emb, **kw)


def test_zero_embedding_stored_unchanged():
    store = MemoryStore()
    ingest(record(emb=np.zeros(64)), store)
    assert not store.get("m1").embedding.any()


def test_three_four_five_normalization():
    store = MemoryStore()
    emb = np.zeros(64)
    emb[:2] = [3.0, 4.0]
    store.ingest(record(emb=emb))
    got = store.get("m1").embedding
    assert got[0] == pytest.approx(0.6, abs=1e-15)
    assert got[1] == pytest.approx(0.8, abs=1e-15)
    assert not got[2:].any()


def test_duplicate_id_rejected():
    store = MemoryStore()
    store.ingest(record())
    with pytest.raises(DuplicateId):
        store.ingest(record())
    assert len(store) == 1


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        MemoryStore(64).ingest(record(dim=32))


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_embedding(bad):
    emb = np.zeros(64)
    emb[3] = bad
    with pytest.raises(InvalidEmbedding):
        record(emb=emb)


@pytest.mark.parametrize("ts", [-1, 1.5, "12", True])
def test_bad_timestamps(ts):
    with pytest.raises(InvalidRecord):
        record(timestamp=ts)


def test_empty_surface_rejected():
    with pytest.raises(InvalidRecord):
        EntityMention("", EntityType.PERSON)


def test_enum_parse():
    assert Category.parse("contextual") is Category.CONTEXTUAL
    assert Intent.parse("unknown") is Intent.UNKNOWN
    with pytest.raises(ValueError):
        Category.parse("hobbies")
    assert parse_dimensions("semantic, intent") == {Dimension.SEMANTIC, Dimension.INTENT}
    with pytest.raises(ValueError):
        parse_dimensions("semantic,colour")


def test_query_needs_dimensions():
    with pytest.raises(ValueError):
        ProcessedQuery("x", np.zeros(4), (), frozenset(), Intent.UNKNOWN, frozenset())


def test_ingest_monotone():
    store = MemoryStore()
    for i in range(25):
        store.ingest(record(f"m{i}"))
        assert len(store) == i + 1
    assert [r.id for r in store] == [f"m{i}" for i in range(25)]


@given(st.lists(st.floats(-1e6, 1e6), min_size=8, max_size=8))
def test_normalization_idempotent(values):
    once = normalize_embedding(values)
    twice = normalize_embedding(once)
    assert np.max(np.abs(once - twice)) <= 1e-12
    norm = np.linalg.norm(once)
    assert norm == 0.0 or abs(norm - 1.0) < 1e-12


def test_empty_store_file_is_header_only():
    text = dump_store(MemoryStore(16))
    assert text == "memharbor-store v1 dim=16\n"
    assert len(load_store(io.StringIO(text))) == 0


def test_one_record_two_lines(tmp_path):
    store = MemoryStore()
    store.ingest(record(entities=(EntityMention("Alice", EntityType.PERSON),),
                        categories={Category.PERSONAL_INFO}, context_markers=("c1",), timestamp=7))
    path = tmp_path / "s.store"
    n = save_store(store, path)
    data = path.read_bytes()
    assert n == len(data)
    assert data.decode().count("\n") == 2
    line = data.decode().splitlines()[1]
    keys = ["id", "user_id", "text", "embedding", "entities", "categories", "intent",
            "context_markers", "timestamp"]
    positions = [line.index(f'"{k}"') for k in keys]
    assert positions == sorted(positions)
    assert load_store(path) == store


def test_round_trip_unicode_and_fields():
    store = MemoryStore(4)
    store.ingest(MemoryRecord("é-1", "ü", "naïve café ☃ \"quoted\"\nline", [0.1, -0.2, 1e-300, 3.0],
                              (EntityMention("Zoë", "person"),), {"contextual", "goals_aspirations"},
                              "goal_setting", ("a", "b"), 2**40))
    back = load_store(io.StringIO(dump_store(store)))
    assert back == store


@pytest.mark.parametrize("text,exc,line", [
    ("", ParseError, 1),
    ("memharbor-store v2 dim=4\n", UnsupportedVersion, None),
    ("something else\n", ParseError, 1),
    ("memharbor-store v1 dim=x\n", ParseError, 1),
    ("memharbor-store v1 dim=2\n{not json}\n", ParseError, 2),
    ('memharbor-store v1 dim=2\n{"id":"a"}\n', ParseError, 2),
])
def test_malformed_store(text, exc, line):
    with pytest.raises(exc) as info:
        load_store(io.StringIO(text))
    if line is not None:
        assert info.value.line == line


def test_duplicate_in_file_reports_line():
    store = MemoryStore(2)
    store.ingest(MemoryRecord("a", "u", "t", [1.0, 0.0]))
    text = dump_store(store)
    text += text.splitlines()[1] + "\n"
    with pytest.raises(ParseError) as info:
        load_store(io.StringIO(text))
    assert info.value.line == 3


def test_concurrent_ingest():
    store = MemoryStore(2)

    def worker(k):
        for i in range(200):
            store.ingest(MemoryRecord(f"{k}-{i}", "u", "t", [1.0, 0.0]))

    threads = [threading.Thread(target=worker, args=(k,)) for k in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(store) == 800
    assert store.version == 800
