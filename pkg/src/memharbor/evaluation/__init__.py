"""Synthetic dataset, metrics and the ablation harness."""

from .ablation import EvalConfig, EvalReport, SystemVariant, run_ablation, write_report
from .dataset import Dataset, EvalQuery, build_store, generate_dataset, load_queries, write_dataset
from .metrics import MetricVector, bleu, entity_f1, overall_score, relevance_metrics

__all__ = [
    "Dataset", "EvalConfig", "EvalQuery", "EvalReport", "MetricVector", "SystemVariant",
    "bleu", "build_store", "entity_f1", "generate_dataset", "load_queries", "overall_score",
    "relevance_metrics", "run_ablation", "write_dataset", "write_report",
]
