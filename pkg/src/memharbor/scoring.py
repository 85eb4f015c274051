"""Per-dimension similarity scores and their bonus-scaled aggregate.

Each scorer returns a value that already carries its dimension weight, so
:func:`aggregate` only sums and applies the multi-dimension bonus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Collection, Mapping, Sequence

import numpy as np

from .config import parse_kv, read_kv
from .errors import ConfigError, DimensionMismatch, FutureMemory, NoDimensions
from .model import (
    ALL_DIMENSIONS,
    Category,
    Dimension,
    EntityMention,
    Intent,
    MemoryRecord,
    ProcessedQuery,
)
from .text import MAX_ENHANCED, enhanced_text_similarity, fold, sequence_ratio

SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class DimensionWeights:
    w_semantic: float = 0.5
    w_entity: float = 0.4
    w_category: float = 0.3
    w_intent: float = 0.3
    w_temporal: float = 0.2
    w_context: float = 0.2
    alpha: float = math.log(2) / 30  # per day: 30-day half-life
    entity_cap: float = 0.4
    category_cap: float = 0.4
    per_category_credit: float = 0.3
    per_entity_weight: float = 0.4
    multi_bonus: float = 3.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigError(f"{f.name} must be a finite number")
            if value < 0:
                raise ConfigError(f"{f.name} must be >= 0")
        if self.entity_cap <= 0 or self.category_cap <= 0:
            raise ConfigError("caps must be > 0")
        if self.alpha <= 0:
            raise ConfigError("alpha must be > 0")

    @classmethod
    def from_mapping(cls, values: Mapping[str, str]) -> "DimensionWeights":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown weight keys: {', '.join(unknown)}")
        parsed = {}
        for key, raw in values.items():
            try:
                parsed[key] = float(raw)
            except ValueError:
                raise ConfigError(f"{key} must be a number, got {raw!r}") from None
        return cls(**parsed)

    @classmethod
    def parse(cls, text: str) -> "DimensionWeights":
        return cls.from_mapping(parse_kv(text))

    @classmethod
    def load(cls, path: str | Path) -> "DimensionWeights":
        return cls.from_mapping(read_kv(path))


DEFAULT_WEIGHTS = DimensionWeights()


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"vector lengths differ: {a.size} vs {b.size}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return min(1.0, max(-1.0, float(np.dot(a, b)) / (na * nb)))


def semantic_score(q_vec, m_vec, w: DimensionWeights = DEFAULT_WEIGHTS) -> float:
    return cosine(q_vec, m_vec) * w.w_semantic


def entity_score(
    q_entities: Sequence[EntityMention],
    m_entities: Sequence[EntityMention],
    w: DimensionWeights = DEFAULT_WEIGHTS,
) -> float:
    """Capped sum over query entities of their best surface match in the memory."""
    if not q_entities or not m_entities:
        return 0.0
    m_surfaces = [fold(e.surface) for e in m_entities]
    total = 0.0
    for e in q_entities:
        qs = fold(e.surface)
        best = max(sequence_ratio(qs, ms) for ms in m_surfaces)
        total += best * w.per_entity_weight
    return min(w.entity_cap, total)


def category_score(
    q_cats: Collection[Category],
    m_cats: Collection[Category],
    w: DimensionWeights = DEFAULT_WEIGHTS,
) -> float:
    shared = len(set(q_cats) & set(m_cats))
    return min(w.category_cap, w.per_category_credit * shared)


def intent_score(q_intent: Intent, m_intent: Intent, w: DimensionWeights = DEFAULT_WEIGHTS) -> float:
    if q_intent == m_intent and q_intent != Intent.UNKNOWN:
        return w.w_intent
    return 0.0


def temporal_score(now: float, m_time: float, w: DimensionWeights = DEFAULT_WEIGHTS) -> float:
    if now < m_time:
        raise FutureMemory(f"memory time {m_time} is after now={now}")
    days = (now - m_time) / SECONDS_PER_DAY
    return math.exp(-w.alpha * days) * w.w_temporal


def marker_jaccard(q_markers: Collection[str], m_markers: Collection[str]) -> float:
    qs, ms = set(q_markers), set(m_markers)
    union = len(qs | ms)
    if union == 0:
        return 0.0
    return len(qs & ms) / union


def context_score(
    q_markers: Collection[str],
    m_markers: Collection[str],
    q_text: str,
    m_text: str,
    w: DimensionWeights = DEFAULT_WEIGHTS,
) -> float:
    """Weighted max of marker overlap and normalized text similarity.

    The text signal only counts when both texts are nonempty.
    """
    text_sig = 0.0
    if q_text and m_text:
        text_sig = enhanced_text_similarity(q_text, m_text) / MAX_ENHANCED
    return w.w_context * max(marker_jaccard(q_markers, m_markers), text_sig)


def multi_bonus(enabled: Collection[Dimension], w: DimensionWeights = DEFAULT_WEIGHTS) -> float:
    return w.multi_bonus if len(enabled) > 1 else 1.0


def aggregate(
    per_dimension: Mapping[Dimension, float],
    enabled: Collection[Dimension],
    w: DimensionWeights = DEFAULT_WEIGHTS,
) -> float:
    enabled = frozenset(enabled)
    if not enabled:
        raise NoDimensions("at least one dimension must be enabled")
    stray = set(per_dimension) - enabled
    if stray:
        raise ValueError(f"scores for disabled dimensions: {sorted(map(str, stray))}")
    total = 0.0
    for d in ALL_DIMENSIONS:
        if d in per_dimension:
            total += per_dimension[d]
    return total * multi_bonus(enabled, w)


def score_dimensions(
    q: ProcessedQuery,
    m: MemoryRecord,
    now: float,
    w: DimensionWeights = DEFAULT_WEIGHTS,
) -> dict[Dimension, float]:
    """Scalar reference path: every enabled dimension of ``m`` against ``q``."""
    out: dict[Dimension, float] = {}
    for d in ALL_DIMENSIONS:
        if d not in q.enabled_dimensions:
            continue
        if d is Dimension.SEMANTIC:
            out[d] = semantic_score(q.embedding, m.embedding, w)
        elif d is Dimension.ENTITY:
            out[d] = entity_score(q.entities, m.entities, w)
        elif d is Dimension.CATEGORY:
            out[d] = category_score(q.categories, m.categories, w)
        elif d is Dimension.INTENT:
            out[d] = intent_score(q.intent, m.intent, w)
        elif d is Dimension.CONTEXT:
            out[d] = context_score(q.context_markers, m.context_markers, q.text, m.text, w)
        else:
            out[d] = temporal_score(now, m.timestamp, w)
    return out
