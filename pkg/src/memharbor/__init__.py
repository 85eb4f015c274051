"""Multi-dimensional memory retrieval for conversational agents."""

from .engine import RetrievalConfig, RetrievalResult, compose_response, retrieve
from .graph import EntityGraph, build_graph, related_memories, resolve
from .model import (
    Category,
    Dimension,
    EntityMention,
    EntityType,
    Intent,
    MemoryRecord,
    MemoryStore,
    ProcessedQuery,
    ScoredMemory,
    load_store,
    save_store,
)
from .query import QueryProcessor
from .scoring import DimensionWeights, aggregate, score_dimensions
from .text import enhanced_text_similarity, sequence_ratio

__version__ = "0.1.0"

__all__ = [
    "Category", "Dimension", "DimensionWeights", "EntityGraph", "EntityMention", "EntityType",
    "Intent", "MemoryRecord", "MemoryStore", "ProcessedQuery", "QueryProcessor",
    "RetrievalConfig", "RetrievalResult", "ScoredMemory", "aggregate", "build_graph",
    "compose_response", "enhanced_text_similarity", "load_store", "related_memories", "resolve",
    "retrieve", "save_store", "score_dimensions", "sequence_ratio",
]
