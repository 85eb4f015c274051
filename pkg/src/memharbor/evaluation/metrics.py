"""Per-query quality metrics and the weighted overall score."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, fields
from typing import Collection, Iterable, Sequence

from ..errors import InvalidMetric
from ..text import MAX_ENHANCED, enhanced_text_similarity, fold, tokenize

OVERALL_WEIGHTS = {
    "f1": 0.25,
    "intent_accuracy": 0.20,
    "answer_relevance": 0.20,
    "memory_relevance": 0.15,
    "completeness": 0.10,
    "bleu": 0.10,
}
FULL_SYSTEM_BONUS = 1.5
BLEU_MAX_N = 4


@dataclass(frozen=True)
class MetricVector:
    f1: float
    intent_accuracy: float
    answer_relevance: float
    memory_relevance: float
    completeness: float
    bleu: float
    response_time_seconds: float = 0.0
    real_tech_usage: float = 0.0


def entity_f1(predicted: Collection[str], gold: Collection[str]) -> float:
    p = {fold(x) for x in predicted}
    g = {fold(x) for x in gold}
    if not p and not g:
        return 1.0
    hits = len(p & g)
    if hits == 0:
        return 0.0
    precision, recall = hits / len(p), hits / len(g)
    return 2 * precision * recall / (precision + recall)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str, reference: str, max_n: int = BLEU_MAX_N) -> float:
    """Sentence BLEU on folded word tokens.

    Unigram precision is unsmoothed; orders 2..max_n use add-one smoothing,
    so a candidate sharing no word with the reference scores 0.
    """
    cand, ref = tokenize(candidate), tokenize(reference)
    if not cand or not ref:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        c_grams, r_grams = _ngrams(cand, n), _ngrams(ref, n)
        clipped = sum(min(k, r_grams[g]) for g, k in c_grams.items())
        total = max(len(cand) - n + 1, 0)
        if n == 1:
            if clipped == 0:
                return 0.0
            log_sum += math.log(clipped / total)
        else:
            log_sum += math.log((clipped + 1) / (total + 1))
    c, r = len(cand), len(ref)
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    return bp * math.exp(log_sum / max_n)


def answer_relevance(response: str, gold_answer: str) -> float:
    return min(1.0, max(0.0, enhanced_text_similarity(response, gold_answer) / MAX_ENHANCED))


def relevance_metrics(retrieved_ids: Sequence[str], gold_ids: Collection[str],
                      response: str, gold_answer: str) -> tuple[float, float, float]:
    """(answer_relevance, memory_relevance, completeness) for one query."""
    retrieved = set(retrieved_ids)
    gold = set(gold_ids)
    hits = len(retrieved & gold)
    memory = hits / len(retrieved) if retrieved else 0.0
    completeness = hits / len(gold) if gold else (1.0 if not retrieved else 0.0)
    return answer_relevance(response, gold_answer), memory, completeness


def overall_score(m: MetricVector, full_system: bool = False) -> float:
    total = 0.0
    for name, weight in OVERALL_WEIGHTS.items():
        value = getattr(m, name)
        if not (0.0 <= value <= 1.0):
            raise InvalidMetric(f"{name}={value} outside [0, 1]")
        total += weight * value
    return total * (FULL_SYSTEM_BONUS if full_system else 1.0)


def mean_vector(vectors: Iterable[MetricVector]) -> MetricVector | None:
    """Component-wise mean, or None for an empty input."""
    vectors = list(vectors)
    if not vectors:
        return None
    names = [f.name for f in fields(MetricVector)]
    return MetricVector(**{n: math.fsum(getattr(v, n) for v in vectors) / len(vectors) for n in names})


@dataclass(frozen=True)
class ReferenceRow:
    system: str
    metrics: MetricVector
    reported_overall: float

    @property
    def recomputed(self) -> float:
        return overall_score(self.metrics)


# Reference comparison rows: component metrics and the overall value listed beside them.
REFERENCE_ROWS = (
    ReferenceRow("prod", MetricVector(1.000, 0.167, 1.000, 1.000, 1.000, 0.800), 0.792),
    ReferenceRow("sim", MetricVector(0.667, 0.200, 0.200, 0.468, 0.200, 0.200), 0.314),
    ReferenceRow("spacy_rag", MetricVector(0.500, 0.133, 0.072, 0.333, 0.333, 0.058), 0.207),
)


def reference_check(tolerance: float = 5e-4) -> list[str]:
    """One line per reference row: recomputed vs reported overall, flagged when they differ."""
    lines = []
    for row in REFERENCE_ROWS:
        diff = row.recomputed - row.reported_overall
        flag = "DEVIATES" if abs(diff) > tolerance else "matches"
        lines.append(f"{row.system}: formula={row.recomputed:.4f} reported={row.reported_overall:.3f} "
                     f"diff={diff:+.4f} {flag}")
    return lines
