"""Embedding providers.

The default :class:`HashEmbedder` is a signed feature-hashing bag of tokens
(64-bit FNV-1a), so the semantic dimension works offline and identically on
every platform. Any other model can be plugged in through
:class:`CallableEmbedder`.
"""

from __future__ import annotations

from collections import Counter
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from .config import EmbeddingSettings
from .errors import ConfigError, DimensionMismatch, InvalidEmbedding
from .text import tokenize

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


@runtime_checkable
class EmbeddingProvider(Protocol):
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


def fnv1a_64(data: bytes, seed: int = 0) -> int:
    """FNV-1a over the seed's 8 little-endian bytes followed by ``data``."""
    h = FNV_OFFSET
    for byte in (seed & _MASK64).to_bytes(8, "little") + data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def token_slot(token: str, dimension: int, seed: int = 0) -> tuple[int, float]:
    h = fnv1a_64(token.encode("utf-8"), seed)
    # low bit gives the sign, the remaining bits the index
    return (h >> 1) % dimension, (1.0 if h & 1 == 0 else -1.0)


def hash_embed(text: str, dimension: int = 64, seed: int = 0) -> np.ndarray:
    return HashEmbedder(dimension, seed).embed(text)


class HashEmbedder:
    def __init__(self, dimension: int = 64, seed: int = 0):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension
        self.seed = seed
        self._slots: dict[str, tuple[int, float]] = {}

    def _slot(self, token: str) -> tuple[int, float]:
        slot = self._slots.get(token)
        if slot is None:
            slot = self._slots[token] = token_slot(token, self.dimension, self.seed)
        return slot

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        counts = Counter(tokenize(text))
        # sorted so accumulation order (and hence rounding) ignores token order
        for token in sorted(counts):
            idx, sign = self._slot(token)
            vec[idx] += sign * counts[token]
        norm = float(np.linalg.norm(vec))
        if norm > 0.0:
            vec /= norm
        return vec

    def __repr__(self) -> str:
        return f"HashEmbedder(dimension={self.dimension}, seed={self.seed})"


class CallableEmbedder:
    """Adapter for an external model: any ``text -> sequence of floats`` function."""

    def __init__(self, fn: Callable[[str], Sequence[float]], dimension: int):
        self._fn = fn
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        vec = np.asarray(self._fn(text), dtype=np.float64).reshape(-1)
        if vec.shape != (self.dimension,):
            raise DimensionMismatch(f"provider returned {vec.size} components, expected {self.dimension}")
        if not np.all(np.isfinite(vec)):
            raise InvalidEmbedding("provider returned non-finite components")
        return vec


def make_provider(
    settings: EmbeddingSettings,
    dimension: int,
    external: Callable[[str], Sequence[float]] | None = None,
) -> EmbeddingProvider:
    dim = settings.dimension or dimension
    if dim != dimension:
        raise DimensionMismatch(f"embedding.dimension={dim} but store dimension is {dimension}")
    if settings.provider == "hash":
        return HashEmbedder(dim, settings.seed)
    if settings.provider == "external":
        if external is None:
            raise ConfigError("embedding.provider=external needs an embedding function registered in code")
        return CallableEmbedder(external, dim)
    raise ConfigError(f"unknown embedding provider {settings.provider!r}")
