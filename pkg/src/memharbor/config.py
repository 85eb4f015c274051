"""Flat ``key=value`` configuration files and the CLI run profile."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, ParseError

CONFIG_ENV = "MEMHARBOR_CONFIG"


def parse_kv(text: str) -> dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {raw!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ParseError("empty key", line=lineno)
        if key in out:
            raise ParseError(f"duplicate key {key!r}", line=lineno)
        out[key] = value
    return out


def read_kv(path: str | Path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        return parse_kv(fh.read())


@dataclass
class EmbeddingSettings:
    provider: str = "hash"
    dimension: int | None = None  # None: take the store's dimension
    seed: int = 0


@dataclass
class RunProfile:
    store: Path | None = None
    rules_dir: Path | None = None
    weights: Path | None = None
    embedding: EmbeddingSettings = field(default_factory=EmbeddingSettings)
    seed: int = 0
    top_k: int = 5
    threshold: float = 0.0
    real_tech_usage: float = 0.0

    def check_paths(self) -> None:
        for name in ("store", "rules_dir", "weights"):
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise ConfigError(f"{name} path does not exist: {path}")


_PROFILE_KEYS = {
    "store", "rules_dir", "weights", "seed", "real_tech_usage",
    "embedding.provider", "embedding.dimension", "embedding.seed",
    "retrieval.top_k", "retrieval.threshold",
}


def _to_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None


def _to_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {value!r}") from None


def profile_from_mapping(values: dict[str, str], base: Path | None = None) -> RunProfile:
    unknown = sorted(set(values) - _PROFILE_KEYS)
    if unknown:
        raise ConfigError(f"unknown profile keys: {', '.join(unknown)}")

    def path(key):
        if key not in values:
            return None
        p = Path(values[key])
        return p if p.is_absolute() or base is None else base / p

    prof = RunProfile(store=path("store"), rules_dir=path("rules_dir"), weights=path("weights"))
    if "embedding.provider" in values:
        provider = values["embedding.provider"]
        if provider not in ("hash", "external"):
            raise ConfigError(f"embedding.provider must be hash or external, got {provider!r}")
        prof.embedding.provider = provider
    if "embedding.dimension" in values:
        prof.embedding.dimension = _to_int("embedding.dimension", values["embedding.dimension"])
        if prof.embedding.dimension < 1:
            raise ConfigError("embedding.dimension must be >= 1")
    if "embedding.seed" in values:
        prof.embedding.seed = _to_int("embedding.seed", values["embedding.seed"])
    if "seed" in values:
        prof.seed = _to_int("seed", values["seed"])
    if "retrieval.top_k" in values:
        prof.top_k = _to_int("retrieval.top_k", values["retrieval.top_k"])
        if prof.top_k < 1:
            raise ConfigError("retrieval.top_k must be >= 1")
    if "retrieval.threshold" in values:
        prof.threshold = _to_float("retrieval.threshold", values["retrieval.threshold"])
    if "real_tech_usage" in values:
        prof.real_tech_usage = _to_float("real_tech_usage", values["real_tech_usage"])
        if not 0.0 <= prof.real_tech_usage <= 1.0:
            raise ConfigError("real_tech_usage must lie in [0, 1]")
    return prof


def load_profile(path: str | Path | None = None) -> RunProfile:
    """Load a run profile from ``path`` or ``$MEMHARBOR_CONFIG``; defaults otherwise."""
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    if path is None:
        return RunProfile()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return profile_from_mapping(read_kv(path), base=path.parent)
