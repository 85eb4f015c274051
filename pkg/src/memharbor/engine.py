"""Retrieval pipeline: analyze -> expand -> score every candidate -> rank -> respond.

Scores are computed column-wise over a per-store index. The sequence-ratio
part of the context dimension is the only expensive term, so it is first
bounded (0 below, character-multiset overlap above) and computed exactly
only for memories whose upper bound can still reach the top-k. The result
is identical to scoring every memory exactly.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .model import (
    ALL_DIMENSIONS,
    CATEGORY_ORDER,
    Dimension,
    Intent,
    MemoryRecord,
    MemoryStore,
    ProcessedQuery,
    ScoredMemory,
)
from .query import QueryProcessor
from .scoring import SECONDS_PER_DAY, DimensionWeights
from .text import BONUS_SCALE, EXACT_BONUS, MAX_ENHANCED, SUBSTRING_BONUS, fold, tokenize

NO_MEMORIES = "no memories found"
DEFAULT_TOP_K = 5

_INTENTS = tuple(Intent)
_UNKNOWN_CODE = _INTENTS.index(Intent.UNKNOWN)
_POPCOUNT = np.array([bin(i).count("1") for i in range(1 << len(CATEGORY_ORDER))], dtype=np.int64)


@dataclass
class RetrievalConfig:
    top_k: int = DEFAULT_TOP_K
    # 0 keeps everything; any other value drops memories scoring below it
    threshold: float = 0.0
    weights: DimensionWeights = field(default_factory=DimensionWeights)
    processor: QueryProcessor | None = None

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


@dataclass(frozen=True)
class RetrievalResult:
    ranked: list[ScoredMemory]
    strategy_used: frozenset[Dimension]
    variants_used: int
    response_text: str
    query: ProcessedQuery | None = None


class StoreIndex:
    """Column arrays over a store snapshot; rebuilt when the store grows."""

    def __init__(self, store: MemoryStore):
        recs = store.records
        n = len(recs)
        self.version = store.version
        self.records = recs
        self.size = n
        dim = store.dimension
        self.embeddings = np.vstack([r.embedding for r in recs]) if n else np.zeros((0, dim))
        self.norms = np.linalg.norm(self.embeddings, axis=1)
        self.timestamps = np.array([r.timestamp for r in recs], dtype=np.float64)
        order = sorted(range(n), key=lambda i: recs[i].id)
        self.id_rank = np.empty(n, dtype=np.int64)
        self.id_rank[order] = np.arange(n)

        users: dict[str, list[int]] = {}
        for i, r in enumerate(recs):
            users.setdefault(r.user_id, []).append(i)
        self.user_rows = {u: np.array(rows, dtype=np.int64) for u, rows in users.items()}

        self.cat_mask = np.array(
            [sum(1 << CATEGORY_ORDER.index(c) for c in r.categories) for r in recs], dtype=np.int64
        )
        self.intent = np.array([_INTENTS.index(r.intent) for r in recs], dtype=np.int64)

        self.folded = [fold(r.text) for r in recs]
        self.text_len = np.array([len(t) for t in self.folded], dtype=np.int64)
        self.codes, self.offsets = _kernels.pack(self.folded)
        self.by_text: dict[str, list[int]] = {}
        for i, t in enumerate(self.folded):
            self.by_text.setdefault(t, []).append(i)

        self.word_postings, self.word_count = _postings(set(tokenize(r.text)) for r in recs)
        self.marker_postings, self.marker_count = _postings(set(r.context_markers) for r in recs)

        chars = sorted({c for t in self.folded for c in t})
        self.char_col = {c: j for j, c in enumerate(chars)}
        self.char_counts = np.zeros((n, len(chars)), dtype=np.int32)
        for i, t in enumerate(self.folded):
            for c in t:
                self.char_counts[i, self.char_col[c]] += 1

        vocab: dict[str, int] = {}
        m_rows, m_sids = [], []
        for i, r in enumerate(recs):
            for e in r.entities:
                sid = vocab.setdefault(fold(e.surface), len(vocab))
                m_rows.append(i)
                m_sids.append(sid)
        self.surfaces = list(vocab)
        self.mention_rows = np.array(m_rows, dtype=np.int64)
        self.mention_sids = np.array(m_sids, dtype=np.int64)
        self._surface_codes = _kernels.pack(self.surfaces)
        self._ratio_cache: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def candidate_rows(self, user_id: str | None, now: float | None) -> np.ndarray:
        if user_id is None:
            rows = np.arange(self.size, dtype=np.int64)
        else:
            rows = self.user_rows.get(user_id, np.zeros(0, dtype=np.int64))
        if now is not None and rows.size:
            rows = rows[self.timestamps[rows] <= now]
        return rows

    def surface_ratios(self, surface: str) -> np.ndarray:
        """Symmetric sequence ratio of a folded surface against every stored surface."""
        cached = self._ratio_cache.get(surface)
        if cached is not None:
            return cached
        codes, offsets = self._surface_codes
        rows = np.arange(len(self.surfaces), dtype=np.int64)
        q = _kernels.encode(surface) if surface else np.zeros(0, dtype=np.int32)
        matches = _kernels.symmetric_matches(q, codes, offsets, rows)
        totals = np.diff(offsets) + len(surface)
        ratios = np.ones(len(rows), dtype=np.float64)
        nz = totals > 0
        ratios[nz] = 2.0 * matches[nz] / totals[nz]
        with self._lock:
            self._ratio_cache[surface] = ratios
        return ratios


def _postings(sets: Iterable[set[str]]) -> tuple[dict[str, np.ndarray], np.ndarray]:
    post: dict[str, list[int]] = {}
    counts = []
    for i, items in enumerate(sets):
        counts.append(len(items))
        for item in items:
            post.setdefault(item, []).append(i)
    return {k: np.array(v, dtype=np.int64) for k, v in post.items()}, np.array(counts, dtype=np.int64)


_index_lock = threading.Lock()


def store_index(store: MemoryStore) -> StoreIndex:
    idx = store._index
    if idx is None or idx.version != store.version:
        with _index_lock:
            idx = store._index
            if idx is None or idx.version != store.version:
                idx = StoreIndex(store)
                store._index = idx
    return idx


def _overlap_counts(postings: dict[str, np.ndarray], items: Iterable[str], size: int) -> np.ndarray:
    counts = np.zeros(size, dtype=np.int64)
    for item in set(items):
        rows = postings.get(item)
        if rows is not None:
            counts[rows] += 1
    return counts


class _VariantScores:
    """Column scores of one query variant over the candidate rows."""

    def __init__(self, idx: StoreIndex, q: ProcessedQuery, rows: np.ndarray, now: float,
                 w: DimensionWeights):
        self.q = q
        self.rows = rows
        self.w = w
        self.idx = idx
        enabled = q.enabled_dimensions
        self.bonus = w.multi_bonus if len(enabled) > 1 else 1.0
        cols: dict[Dimension, np.ndarray] = {}

        if Dimension.SEMANTIC in enabled:
            qv = q.embedding
            qn = float(np.linalg.norm(qv))
            sem = np.zeros(rows.size)
            if qn > 0.0 and rows.size:
                denom = idx.norms[rows] * qn
                ok = denom > 0.0
                dots = idx.embeddings[rows[ok]] @ qv
                sem[ok] = np.clip(dots / denom[ok], -1.0, 1.0)
            cols[Dimension.SEMANTIC] = sem * w.w_semantic

        if Dimension.ENTITY in enabled:
            ent = np.zeros(rows.size)
            if q.entities and idx.mention_rows.size:
                total = np.zeros(idx.size)
                for e in q.entities:
                    vals = idx.surface_ratios(fold(e.surface))[idx.mention_sids]
                    best = np.zeros(idx.size)
                    np.maximum.at(best, idx.mention_rows, vals)
                    total += best * w.per_entity_weight
                ent = np.minimum(w.entity_cap, total[rows])
            cols[Dimension.ENTITY] = ent

        if Dimension.CATEGORY in enabled:
            qmask = sum(1 << CATEGORY_ORDER.index(c) for c in q.categories)
            shared = _POPCOUNT[idx.cat_mask[rows] & qmask]
            cols[Dimension.CATEGORY] = np.minimum(w.category_cap, w.per_category_credit * shared)

        if Dimension.INTENT in enabled:
            code = _INTENTS.index(q.intent)
            hit = (idx.intent[rows] == code) & (code != _UNKNOWN_CODE)
            cols[Dimension.INTENT] = np.where(hit, w.w_intent, 0.0)

        if Dimension.TEMPORAL in enabled:
            days = (now - idx.timestamps[rows]) / SECONDS_PER_DAY
            cols[Dimension.TEMPORAL] = np.exp(-w.alpha * days) * w.w_temporal

        self.cols = cols
        self.has_context = Dimension.CONTEXT in enabled
        if self.has_context:
            self._prepare_context()

    def _prepare_context(self):
        idx, q, rows = self.idx, self.q, self.rows
        m_inter = _overlap_counts(idx.marker_postings, q.context_markers, idx.size)[rows]
        m_union = len(set(q.context_markers)) + idx.marker_count[rows] - m_inter
        self.marker_j = np.where(m_union > 0, m_inter / np.maximum(m_union, 1), 0.0)

        qf = fold(q.text)
        self.qf = qf
        self.text_ok = (idx.text_len[rows] > 0) & (len(qf) > 0)
        qwords = set(tokenize(q.text))
        inter = _overlap_counts(idx.word_postings, qwords, idx.size)[rows]
        mwords = idx.word_count[rows]
        union = len(qwords) + mwords - inter
        self.jac = np.where(union > 0, inter / np.maximum(union, 1), 1.0)
        denom = np.maximum(mwords, len(qwords))
        self.overlap = np.where(denom > 0, inter / np.maximum(denom, 1), 1.0)
        self.bonus_val = self._match_bonus(qf)

        # character-multiset overlap bounds the matched-character count from above
        qcounts = np.zeros(idx.char_counts.shape[1], dtype=np.int32)
        for c in qf:
            j = idx.char_col.get(c)
            if j is not None:
                qcounts[j] += 1
        shared = np.minimum(idx.char_counts[rows], qcounts).sum(axis=1)
        lens = idx.text_len[rows] + len(qf)
        self.seq_ub = np.where(lens > 0, 2.0 * shared / np.maximum(lens, 1), 1.0)

    def _match_bonus(self, qf: str) -> np.ndarray:
        idx, rows = self.idx, self.rows
        full = np.zeros(idx.size)
        if qf:
            if len(qf) <= 256:
                for i in range(len(qf)):
                    for j in range(i + 1, len(qf) + 1):
                        hit = idx.by_text.get(qf[i:j])
                        if hit is not None:
                            full[hit] = SUBSTRING_BONUS
                for r in rows:
                    if full[r] == 0.0 and len(idx.folded[r]) > len(qf) and qf in idx.folded[r]:
                        full[r] = SUBSTRING_BONUS
            else:
                for r in rows:
                    mf = idx.folded[r]
                    if mf and (qf in mf or mf in qf):
                        full[r] = SUBSTRING_BONUS
            exact = idx.by_text.get(qf)
            if exact is not None:
                full[exact] = EXACT_BONUS
        return full[rows]

    def context_column(self, seq: np.ndarray, sel: np.ndarray | slice = slice(None)) -> np.ndarray:
        text = (self.jac[sel] + seq + self.overlap[sel]) / 3.0 + self.bonus_val[sel] * BONUS_SCALE
        text = np.where(self.text_ok[sel], text / MAX_ENHANCED, 0.0)
        return self.w.w_context * np.maximum(self.marker_j[sel], text)

    def exact_seq(self, sel: np.ndarray) -> np.ndarray:
        idx = self.idx
        rows = self.rows[sel]
        q = _kernels.encode(self.qf) if self.qf else np.zeros(0, dtype=np.int32)
        matches = _kernels.symmetric_matches(q, idx.codes, idx.offsets, rows)
        lens = idx.text_len[rows] + len(self.qf)
        return np.where(lens > 0, 2.0 * matches / np.maximum(lens, 1), 1.0)

    def totals(self, context: np.ndarray | None, sel: np.ndarray | slice = slice(None)) -> np.ndarray:
        n = self.rows[sel].size
        total = np.zeros(n)
        for d in ALL_DIMENSIONS:
            if d is Dimension.CONTEXT:
                if self.has_context:
                    total = total + context
            elif d in self.cols:
                total = total + self.cols[d][sel]
        return total * self.bonus

    def per_dimension(self, pos: int, context_value: float | None) -> dict[Dimension, float]:
        out = {}
        for d in ALL_DIMENSIONS:
            if d is Dimension.CONTEXT and self.has_context:
                out[d] = float(context_value)
            elif d in self.cols:
                out[d] = float(self.cols[d][pos])
        return out


def _kth_largest(values: np.ndarray, k: int) -> float:
    if values.size < k:
        return -np.inf
    return float(np.partition(values, values.size - k)[values.size - k])


def rank_memories(
    variants: Sequence[ProcessedQuery],
    store: MemoryStore,
    user_id: str | None,
    now: float,
    weights: DimensionWeights,
    top_k: int,
    threshold: float = 0.0,
) -> list[ScoredMemory]:
    """Top-k memories under per-memory max over query variants."""
    idx = store_index(store)
    rows = idx.candidate_rows(user_id, now)
    if rows.size == 0:
        return []
    scored = [_VariantScores(idx, v, rows, now, weights) for v in variants]

    lower, upper = [], []
    for s in scored:
        if s.has_context:
            lower.append(s.totals(s.context_column(np.zeros(rows.size))))
            upper.append(s.totals(s.context_column(s.seq_ub)))
        else:
            exact = s.totals(None)
            lower.append(exact)
            upper.append(exact)
    merged_lb = np.max(np.vstack(lower), axis=0)
    merged_ub = np.max(np.vstack(upper), axis=0)
    sel = np.flatnonzero(merged_ub >= _kth_largest(merged_lb, top_k))

    exact_totals = []
    contexts = []
    for s, lb in zip(scored, lower):
        if s.has_context:
            ctx = s.context_column(s.exact_seq(sel), sel)
            contexts.append(ctx)
            exact_totals.append(s.totals(ctx, sel))
        else:
            contexts.append(None)
            exact_totals.append(lb[sel])
    stacked = np.vstack(exact_totals)
    winner = np.argmax(stacked, axis=0)  # first variant reaching the max
    total = stacked[winner, np.arange(sel.size)]

    if threshold != 0.0:
        keep = total >= threshold
        sel, winner, total = sel[keep], winner[keep], total[keep]
        positions = np.flatnonzero(keep)
    else:
        positions = np.arange(sel.size)
    cand_rows = rows[sel]
    order = np.lexsort((idx.id_rank[cand_rows], -idx.timestamps[cand_rows], -total))[:top_k]

    out = []
    for o in order:
        v = int(winner[o])
        s = scored[v]
        pos = int(sel[o])
        ctx = contexts[v]
        per_dim = s.per_dimension(pos, None if ctx is None else ctx[positions[o]])
        out.append(ScoredMemory(idx.records[int(cand_rows[o])], per_dim, float(total[o])))
    return out


def compose_response(top: Sequence[ScoredMemory], query: ProcessedQuery | None = None) -> str:
    """Template answer: the best memory, then up to two supporting ones."""
    if not top:
        return NO_MEMORIES
    parts = [f"From what you told me: {top[0].memory.text}"]
    support = [sm.memory.text for sm in top[1:3]]
    if support:
        parts.append("Related: " + " ".join(support))
    return " ".join(parts)


def default_now(store: MemoryStore, user_id: str | None) -> int:
    idx = store_index(store)
    rows = idx.candidate_rows(user_id, None)
    return int(idx.timestamps[rows].max()) if rows.size else 0


def retrieve(
    raw_query: str,
    user_id: str | None,
    store: MemoryStore,
    graph=None,
    config: RetrievalConfig | None = None,
    *,
    dimensions: Iterable[Dimension] | None = None,
    now: int | None = None,
    context_markers: Sequence[str] = (),
) -> RetrievalResult:
    """Run the full pipeline for one query.

    ``user_id=None`` searches every user. ``now`` defaults to the newest
    memory timestamp of the searched user, which keeps results independent
    of the wall clock; memories newer than ``now`` are not candidates.
    ``dimensions`` overrides strategy selection.
    """
    config = config or RetrievalConfig()
    processor = config.processor or QueryProcessor.for_dimension(store.dimension)
    if now is None:
        now = default_now(store, user_id)
    q = processor.analyze(raw_query, now, dimensions, context_markers)
    variants = processor.expand(q, graph)
    ranked = rank_memories(variants, store, user_id, now, config.weights, config.top_k,
                           config.threshold)
    return RetrievalResult(
        ranked=ranked,
        strategy_used=q.enabled_dimensions,
        variants_used=len(variants),
        response_text=compose_response(ranked, q),
        query=q,
    )


def score_all(q: ProcessedQuery, store: MemoryStore, now: float,
              weights: DimensionWeights | None = None) -> list[tuple[MemoryRecord, float]]:
    """Exact totals of every memory for a single query (diagnostics and tests)."""
    weights = weights or DimensionWeights()
    idx = store_index(store)
    rows = idx.candidate_rows(None, now)
    s = _VariantScores(idx, q, rows, now, weights)
    ctx = s.context_column(s.exact_seq(np.arange(rows.size))) if s.has_context else None
    totals = s.totals(ctx)
    return [(idx.records[int(r)], float(t)) for r, t in zip(rows, totals)]
