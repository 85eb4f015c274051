"""Run every evaluation query under fixed dimension subsets and report metric means."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

from ..engine import RetrievalConfig, RetrievalResult, retrieve
from ..graph import EntityGraph, build_graph
from ..model import Dimension, MemoryStore
from .dataset import EvalQuery
from .metrics import MetricVector, entity_f1, mean_vector, overall_score, reference_check, bleu
from .metrics import relevance_metrics as _relevance

D = Dimension


class SystemVariant(str, Enum):
    FULL = "Full"
    SEMANTIC_ONLY = "Semantic_Only"
    ENTITY_ONLY = "Entity_Only"
    CATEGORY_ONLY = "Category_Only"
    INTENT_ONLY = "Intent_Only"
    CONTEXT_ONLY = "Context_Only"
    SEMANTIC_ENTITY = "Semantic_Entity"
    SEMANTIC_CATEGORY = "Semantic_Category"

    @property
    def dimensions(self) -> frozenset[Dimension]:
        return VARIANT_DIMENSIONS[self]

    @classmethod
    def parse(cls, name: str) -> "SystemVariant":
        for v in cls:
            if v.value.lower() == name.lower():
                return v
        raise ValueError(f"unknown variant {name!r}; expected one of {', '.join(v.value for v in cls)}")


VARIANT_DIMENSIONS = {
    SystemVariant.FULL: frozenset(D),
    SystemVariant.SEMANTIC_ONLY: frozenset({D.SEMANTIC}),
    SystemVariant.ENTITY_ONLY: frozenset({D.ENTITY}),
    SystemVariant.CATEGORY_ONLY: frozenset({D.CATEGORY}),
    SystemVariant.INTENT_ONLY: frozenset({D.INTENT}),
    SystemVariant.CONTEXT_ONLY: frozenset({D.CONTEXT}),
    SystemVariant.SEMANTIC_ENTITY: frozenset({D.SEMANTIC, D.ENTITY}),
    SystemVariant.SEMANTIC_CATEGORY: frozenset({D.SEMANTIC, D.CATEGORY}),
}

CSV_COLUMNS = ("variant", "f1", "intent_accuracy", "answer_relevance", "memory_relevance",
               "completeness", "bleu", "response_time", "overall")
PER_QUERY_COLUMNS = ("variant", "conversation_id") + CSV_COLUMNS[1:] + ("retrieved_ids",)
NA = "NA"


def relevance_metrics(result: RetrievalResult, gold: EvalQuery) -> tuple[float, float, float]:
    ids = [sm.memory.id for sm in result.ranked]
    return _relevance(ids, gold.gold_memory_ids, result.response_text, gold.gold_answer)


@dataclass(frozen=True)
class QueryOutcome:
    variant: SystemVariant
    query: EvalQuery
    metrics: MetricVector
    overall: float
    retrieved_ids: tuple[str, ...]


@dataclass
class VariantSummary:
    variant: SystemVariant
    mean: MetricVector | None
    overall: float | None


@dataclass
class EvalReport:
    rows: list[VariantSummary]
    outcomes: list[QueryOutcome] = field(default_factory=list)

    def row(self, variant: SystemVariant) -> VariantSummary:
        return next(r for r in self.rows if r.variant is variant)


@dataclass
class EvalConfig:
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    real_tech_usage: float = 0.0
    use_graph: bool = True


def evaluate_query(q: EvalQuery, variant: SystemVariant, store: MemoryStore,
                   graph: EntityGraph | None, config: EvalConfig) -> QueryOutcome:
    start = time.perf_counter()
    result = retrieve(q.query, q.user_id, store, graph, config.retrieval,
                      dimensions=variant.dimensions, now=q.timestamp,
                      context_markers=(q.conversation_id,))
    elapsed = time.perf_counter() - start
    answer, memory, completeness = relevance_metrics(result, q)
    metrics = MetricVector(
        f1=entity_f1([e.surface for e in result.query.entities], q.gold_entities),
        intent_accuracy=1.0 if result.query.intent == q.gold_intent else 0.0,
        answer_relevance=answer,
        memory_relevance=memory,
        completeness=completeness,
        bleu=bleu(result.response_text, q.gold_answer),
        response_time_seconds=elapsed,
        real_tech_usage=config.real_tech_usage,
    )
    return QueryOutcome(variant, q, metrics, overall_score(metrics, variant is SystemVariant.FULL),
                        tuple(sm.memory.id for sm in result.ranked))


def run_ablation(queries: Sequence[EvalQuery], store: MemoryStore, config: EvalConfig | None = None,
                 variants: Sequence[SystemVariant] = tuple(SystemVariant)) -> EvalReport:
    config = config or EvalConfig()
    graph = build_graph(store) if config.use_graph and len(store) else None
    rows, outcomes = [], []
    for variant in variants:
        results = [evaluate_query(q, variant, store, graph, config) for q in queries]
        outcomes.extend(results)
        mean = mean_vector(r.metrics for r in results)
        overall = None if mean is None else sum(r.overall for r in results) / len(results)
        rows.append(VariantSummary(variant, mean, overall))
    return EvalReport(rows, outcomes)


def _fmt(x: float | None) -> str:
    return NA if x is None else f"{x:.6f}"


def _metric_cells(m: MetricVector | None, overall: float | None) -> list[str]:
    if m is None:
        return [NA] * (len(CSV_COLUMNS) - 1)
    return [_fmt(m.f1), _fmt(m.intent_accuracy), _fmt(m.answer_relevance), _fmt(m.memory_relevance),
            _fmt(m.completeness), _fmt(m.bleu), _fmt(m.response_time_seconds), _fmt(overall)]


def report_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in report.rows:
        writer.writerow([r.variant.value] + _metric_cells(r.mean, r.overall))
    return buf.getvalue()


def per_query_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PER_QUERY_COLUMNS)
    for o in report.outcomes:
        writer.writerow([o.variant.value, o.query.conversation_id]
                        + _metric_cells(o.metrics, o.overall) + [" ".join(o.retrieved_ids)])
    return buf.getvalue()


def report_summary(report: EvalReport) -> str:
    """Human-readable summary; leaves out timing so it is reproducible byte for byte."""
    lines = ["variant ranking by mean overall score:"]
    ranked = sorted(report.rows, key=lambda r: (r.overall is None, -(r.overall or 0.0), r.variant.value))
    for r in ranked:
        lines.append(f"  {r.variant.value:<18} {_fmt(r.overall)}")
    queries = len({o.query.conversation_id for o in report.outcomes})
    lines.append(f"queries per variant: {queries}")
    real = next((o.metrics.real_tech_usage for o in report.outcomes), 0.0)
    lines.append(f"real_tech_usage: {real:g}")
    lines.append("reference rows, overall recomputed by the weighted-sum formula:")
    lines.extend("  " + line for line in reference_check())
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "report.csv": report_csv(report),
        "summary.txt": report_summary(report),
        "per_query.csv": per_query_csv(report),
    }
    paths = []
    for name, text in files.items():
        path = out / name
        path.write_text(text, encoding="utf-8")
        paths.append(path)
    return paths
