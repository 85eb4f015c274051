"""Domain types and the append-only memory store.

The store file is line-delimited UTF-8: a ``memharbor-store v1 dim=<D>``
header followed by one JSON object per record with a fixed key order.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Iterator

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateId,
    InvalidEmbedding,
    InvalidRecord,
    ParseError,
    UnsupportedVersion,
)

DEFAULT_DIMENSION = 64
STORE_MAGIC = "memharbor-store"
STORE_VERSION = "v1"


class _LabelEnum(str, Enum):
    @classmethod
    def parse(cls, label: str):
        try:
            return cls(label)
        except ValueError:
            raise ValueError(f"unknown {cls.__name__} label: {label!r}") from None

    def __str__(self) -> str:
        return self.value


class Category(_LabelEnum):
    PERSONAL_INFO = "personal_info"
    PROFESSIONAL_INFO = "professional_info"
    PREFERENCES_INTERESTS = "preferences_interests"
    GOALS_ASPIRATIONS = "goals_aspirations"
    CONTEXTUAL = "contextual"


class Intent(_LabelEnum):
    INFORMATION_SEEKING = "information_seeking"
    PREFERENCE_EXPRESSION = "preference_expression"
    GOAL_SETTING = "goal_setting"
    CONTEXTUAL_CLARIFICATION = "contextual_clarification"
    SOCIAL_INTERACTION = "social_interaction"
    UNKNOWN = "unknown"


class EntityType(_LabelEnum):
    PERSON = "person"
    LOCATION = "location"
    ORGANIZATION = "organization"
    DATE = "date"
    TIME = "time"
    PRODUCT = "product"
    CONCEPT = "concept"


class Dimension(_LabelEnum):
    SEMANTIC = "semantic"
    ENTITY = "entity"
    CATEGORY = "category"
    INTENT = "intent"
    CONTEXT = "context"
    TEMPORAL = "temporal"


# Canonical order; scores are always summed in this order.
ALL_DIMENSIONS: tuple[Dimension, ...] = tuple(Dimension)
CATEGORY_ORDER: tuple[Category, ...] = tuple(Category)


def parse_dimensions(labels_text: str | Iterable[str]) -> frozenset[Dimension]:
    """Parse ``"semantic,entity"`` (or an iterable of labels) into a dimension set."""
    labels = labels_text.split(",") if isinstance(labels_text, str) else list(labels_text)
    dims = frozenset(Dimension.parse(s.strip()) for s in labels if s.strip())
    if not dims:
        raise ValueError("dimension set must be nonempty")
    return dims


def sort_dimensions(dims: Iterable[Dimension]) -> list[Dimension]:
    return sorted(dims, key=ALL_DIMENSIONS.index)


def sort_categories(cats: Iterable[Category]) -> list[Category]:
    return sorted(cats, key=CATEGORY_ORDER.index)


@dataclass
class EntityMention:
    surface: str
    entity_type: EntityType
    # Filled in by entity resolution; not part of the stored record.
    canonical_id: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.surface:
            raise InvalidRecord("entity surface must be nonempty")
        self.entity_type = EntityType.parse(self.entity_type)


_UNIT_TOL = 4 * np.finfo(np.float64).eps


def normalize_embedding(vec) -> np.ndarray:
    """Scale to unit L2 norm; the zero vector is returned unchanged."""
    arr = np.array(vec, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    # Already-unit vectors are left alone so normalization is idempotent bit-for-bit.
    if norm == 0.0 or abs(norm - 1.0) <= _UNIT_TOL:
        return arr
    return arr / norm


def _as_timestamp(value) -> int:
    if isinstance(value, bool):
        raise InvalidRecord("timestamp must be an integer")
    if isinstance(value, float):
        if not value.is_integer():
            raise InvalidRecord(f"timestamp must be integral seconds, got {value}")
        value = int(value)
    if not isinstance(value, (int, np.integer)):
        raise InvalidRecord(f"timestamp must be an integer, got {type(value).__name__}")
    if value < 0:
        raise InvalidRecord("timestamp must be >= 0")
    return int(value)


@dataclass(frozen=True, eq=False)
class MemoryRecord:
    id: str
    user_id: str
    text: str
    embedding: np.ndarray
    entities: tuple[EntityMention, ...] = ()
    categories: frozenset[Category] = frozenset()
    intent: Intent = Intent.UNKNOWN
    context_markers: tuple[str, ...] = ()
    timestamp: int = 0

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise InvalidRecord("record id must be a nonempty string")
        if not isinstance(self.text, str):
            raise InvalidRecord("record text must be a string")
        emb = np.array(self.embedding, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(emb)):
            raise InvalidEmbedding(f"record {self.id!r} has non-finite embedding components")
        emb.setflags(write=False)
        object.__setattr__(self, "embedding", emb)
        object.__setattr__(self, "entities", tuple(self.entities))
        object.__setattr__(
            self, "categories", frozenset(Category.parse(c) for c in self.categories)
        )
        object.__setattr__(self, "intent", Intent.parse(self.intent))
        object.__setattr__(self, "context_markers", tuple(str(m) for m in self.context_markers))
        object.__setattr__(self, "timestamp", _as_timestamp(self.timestamp))

    def __eq__(self, other):
        if not isinstance(other, MemoryRecord):
            return NotImplemented
        return (
            self.id == other.id
            and self.user_id == other.user_id
            and self.text == other.text
            and self.embedding.shape == other.embedding.shape
            and bool(np.array_equal(self.embedding, other.embedding))
            and self.entities == other.entities
            and self.categories == other.categories
            and self.intent == other.intent
            and self.context_markers == other.context_markers
            and self.timestamp == other.timestamp
        )

    __hash__ = None


@dataclass(frozen=True)
class ProcessedQuery:
    text: str
    embedding: np.ndarray
    entities: tuple[EntityMention, ...]
    categories: frozenset[Category]
    intent: Intent
    enabled_dimensions: frozenset[Dimension]
    timestamp: int = 0
    context_markers: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.enabled_dimensions:
            raise ValueError("enabled_dimensions must be nonempty")
        emb = normalize_embedding(self.embedding)
        if not np.all(np.isfinite(emb)):
            raise InvalidEmbedding("query embedding has non-finite components")
        emb.setflags(write=False)
        object.__setattr__(self, "embedding", emb)
        object.__setattr__(self, "entities", tuple(self.entities))
        object.__setattr__(self, "categories", frozenset(self.categories))
        object.__setattr__(self, "enabled_dimensions", frozenset(self.enabled_dimensions))
        object.__setattr__(self, "context_markers", tuple(self.context_markers))


@dataclass(frozen=True)
class ScoredMemory:
    memory: MemoryRecord
    per_dimension: dict[Dimension, float]
    total: float


class MemoryStore:
    """Append-only collection of memories with a fixed embedding dimension.

    Writers are serialized by a lock; records never change once stored, so
    readers need no coordination.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = int(dimension)
        self._records: list[MemoryRecord] = []
        self._by_id: dict[str, MemoryRecord] = {}
        self._lock = threading.Lock()
        self.version = 0
        self._index = None  # built lazily by the retrieval engine

    def ingest(self, record: MemoryRecord) -> str:
        if record.embedding.shape != (self.dimension,):
            raise DimensionMismatch(
                f"record {record.id!r}: embedding length {record.embedding.size}, "
                f"store dimension {self.dimension}"
            )
        normalized = replace(record, embedding=normalize_embedding(record.embedding))
        with self._lock:
            if record.id in self._by_id:
                raise DuplicateId(record.id)
            self._records.append(normalized)
            self._by_id[record.id] = normalized
            self.version += 1
        return record.id

    def get(self, record_id: str) -> MemoryRecord:
        return self._by_id[record_id]

    def __contains__(self, record_id) -> bool:
        return record_id in self._by_id

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[MemoryRecord]:
        return iter(tuple(self._records))

    @property
    def records(self) -> tuple[MemoryRecord, ...]:
        return tuple(self._records)

    def user_ids(self) -> list[str]:
        return sorted({r.user_id for r in self._records})

    def __eq__(self, other):
        if not isinstance(other, MemoryStore):
            return NotImplemented
        return self.dimension == other.dimension and self._records == other._records

    __hash__ = None

    def __repr__(self) -> str:
        return f"MemoryStore(dimension={self.dimension}, size={len(self)})"


def ingest(record: MemoryRecord, store: MemoryStore) -> str:
    return store.ingest(record)


def _record_to_line(rec: MemoryRecord) -> str:
    obj = {
        "id": rec.id,
        "user_id": rec.user_id,
        "text": rec.text,
        "embedding": [float(x) for x in rec.embedding],
        "entities": [{"surface": e.surface, "type": e.entity_type.value} for e in rec.entities],
        "categories": [c.value for c in sort_categories(rec.categories)],
        "intent": rec.intent.value,
        "context_markers": list(rec.context_markers),
        "timestamp": rec.timestamp,
    }
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


_RECORD_KEYS = (
    "id", "user_id", "text", "embedding", "entities",
    "categories", "intent", "context_markers", "timestamp",
)


def _record_from_obj(obj) -> MemoryRecord:
    if not isinstance(obj, dict):
        raise ValueError("record must be an object")
    missing = [k for k in _RECORD_KEYS if k not in obj]
    if missing:
        raise ValueError(f"missing fields: {', '.join(missing)}")
    extra = sorted(set(obj) - set(_RECORD_KEYS))
    if extra:
        raise ValueError(f"unexpected fields: {', '.join(extra)}")
    if not isinstance(obj["text"], str) or not isinstance(obj["user_id"], str):
        raise ValueError("text and user_id must be strings")
    if not isinstance(obj["embedding"], list):
        raise ValueError("embedding must be an array")
    entities = tuple(
        EntityMention(e["surface"], EntityType.parse(e["type"])) for e in obj["entities"]
    )
    return MemoryRecord(
        id=obj["id"],
        user_id=obj["user_id"],
        text=obj["text"],
        embedding=np.array(obj["embedding"], dtype=np.float64),
        entities=entities,
        categories=frozenset(Category.parse(c) for c in obj["categories"]),
        intent=Intent.parse(obj["intent"]),
        context_markers=tuple(obj["context_markers"]),
        timestamp=obj["timestamp"],
    )


def dump_store(store: MemoryStore) -> str:
    lines = [f"{STORE_MAGIC} {STORE_VERSION} dim={store.dimension}"]
    lines.extend(_record_to_line(r) for r in store.records)
    return "\n".join(lines) + "\n"


def save_store(store: MemoryStore, sink: str | Path | IO[str]) -> int:
    """Write ``store`` to a path or text stream; returns the number of UTF-8 bytes."""
    text = dump_store(store)
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sink.write(text)
    return len(text.encode("utf-8"))


def _parse_header(line: str) -> int:
    parts = line.split()
    if len(parts) != 3 or parts[0] != STORE_MAGIC or not parts[2].startswith("dim="):
        raise ParseError(f"not a store header: {line!r}", line=1)
    if parts[1] != STORE_VERSION:
        raise UnsupportedVersion(f"store version {parts[1]!r}, expected {STORE_VERSION!r}")
    try:
        dim = int(parts[2][4:])
    except ValueError:
        raise ParseError(f"bad dimension in header: {parts[2]!r}", line=1) from None
    if dim < 1:
        raise ParseError("dimension must be >= 1", line=1)
    return dim


def load_store(source: str | Path | IO[str]) -> MemoryStore:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("empty store file", line=1)
    store = MemoryStore(_parse_header(lines[0]))
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            raise ParseError("blank line", line=lineno)
        try:
            record = _record_from_obj(json.loads(raw))
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(str(exc), line=lineno) from exc
        try:
            store.ingest(record)
        except (DimensionMismatch, DuplicateId) as exc:
            raise ParseError(f"{type(exc).__name__}: {exc}", line=lineno) from exc
    return store


def is_unit_or_zero(vec: np.ndarray, tol: float = 1e-12) -> bool:
    norm = float(np.linalg.norm(vec))
    return norm == 0.0 or math.isclose(norm, 1.0, abs_tol=tol)
