"""Cross-memory entity resolution and the entity co-occurrence graph."""

from __future__ import annotations

from dataclasses import dataclass, field
from difflib import SequenceMatcher
from itertools import combinations
from pathlib import Path
from typing import IO, Iterable

from .errors import InvalidThreshold, NotFound, ParseError, UnresolvedMention
from .model import EntityMention, EntityType, MemoryStore
from .text import fold, sequence_ratio

DEFAULT_THRESHOLD = 0.85

MentionRef = tuple[str, int]  # (memory id, mention index)


@dataclass
class CanonicalEntity:
    canonical_id: str
    entity_type: EntityType
    aliases: set[str]
    member_mentions: list[MentionRef] = field(default_factory=list)

    def memory_ids(self) -> set[str]:
        return {mid for mid, _ in self.member_mentions}


@dataclass
class EntityGraph:
    entities: dict[str, CanonicalEntity]
    edges: dict[tuple[str, str], int] = field(default_factory=dict)
    threshold: float = DEFAULT_THRESHOLD

    def count(self, a: str, b: str) -> int:
        return self.edges.get(edge_key(a, b), 0)

    def neighbors(self, canonical_id: str) -> set[str]:
        out = set()
        for a, b in self.edges:
            if a == canonical_id:
                out.add(b)
            elif b == canonical_id:
                out.add(a)
        return out

    def find(self, surface: str) -> CanonicalEntity | None:
        """Entity owning ``surface`` as an alias, else the closest one above threshold."""
        key = fold(surface)
        for cid in sorted(self.entities):
            if any(fold(a) == key for a in self.entities[cid].aliases):
                return self.entities[cid]
        best, best_ratio = None, self.threshold
        for cid in sorted(self.entities):
            ent = self.entities[cid]
            r = max(sequence_ratio(key, fold(a)) for a in ent.aliases)
            if r > best_ratio or (best is None and r >= best_ratio):
                best, best_ratio = ent, r
        return best


def edge_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def canonical_id_for(entity_type: EntityType, aliases: Iterable[str]) -> str:
    return f"{entity_type.value}:{fold(min(aliases))}"


def store_mentions(store: MemoryStore) -> list[tuple[str, int, EntityMention]]:
    return [(rec.id, i, m) for rec in store for i, m in enumerate(rec.entities)]


def _linked(a: str, b: str, threshold: float) -> bool:
    total = len(a) + len(b)
    # cheap upper bounds first; both bound the symmetric ratio as well
    if 2.0 * min(len(a), len(b)) / total < threshold:
        return False
    if SequenceMatcher(None, a, b, autojunk=False).quick_ratio() < threshold:
        return False
    return sequence_ratio(a, b) >= threshold


def resolve(
    mentions: Iterable[tuple[str, int, EntityMention]],
    threshold: float = DEFAULT_THRESHOLD,
) -> dict[str, CanonicalEntity]:
    """Single-linkage clustering of same-type mentions by folded-surface ratio.

    Every mention's ``canonical_id`` is filled in as a side effect.
    """
    if not (0.0 < threshold <= 1.0):
        raise InvalidThreshold(f"threshold must lie in (0, 1], got {threshold}")
    mentions = list(mentions)
    by_type: dict[EntityType, dict[str, list[int]]] = {}
    for idx, (_, _, m) in enumerate(mentions):
        by_type.setdefault(m.entity_type, {}).setdefault(fold(m.surface), []).append(idx)

    entities: dict[str, CanonicalEntity] = {}
    for etype, groups in by_type.items():
        keys = sorted(groups)
        parent = list(range(len(keys)))

        def root(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i, j in combinations(range(len(keys)), 2):
            if root(i) != root(j) and _linked(keys[i], keys[j], threshold):
                parent[root(j)] = root(i)

        clusters: dict[int, list[int]] = {}
        for i in range(len(keys)):
            clusters.setdefault(root(i), []).append(i)
        for members in clusters.values():
            idxs = sorted(idx for k in members for idx in groups[keys[k]])
            aliases = {mentions[idx][2].surface for idx in idxs}
            cid = canonical_id_for(etype, aliases)
            ent = CanonicalEntity(cid, etype, aliases)
            for idx in idxs:
                mid, pos, mention = mentions[idx]
                mention.canonical_id = cid
                ent.member_mentions.append((mid, pos))
            entities[cid] = ent
    return dict(sorted(entities.items()))


def build_edges(entities: dict[str, CanonicalEntity], store: MemoryStore,
                threshold: float = DEFAULT_THRESHOLD) -> EntityGraph:
    edges: dict[tuple[str, str], int] = {}
    for rec in store:
        ids = set()
        for m in rec.entities:
            if m.canonical_id is None:
                raise UnresolvedMention(f"memory {rec.id!r}: mention {m.surface!r} has no canonical id")
            if m.canonical_id not in entities:
                raise UnresolvedMention(f"memory {rec.id!r}: unknown canonical id {m.canonical_id!r}")
            ids.add(m.canonical_id)
        for a, b in combinations(sorted(ids), 2):
            edges[(a, b)] = edges.get((a, b), 0) + 1
    return EntityGraph(entities, dict(sorted(edges.items())), threshold)


def build_graph(store: MemoryStore, threshold: float = DEFAULT_THRESHOLD) -> EntityGraph:
    return build_edges(resolve(store_mentions(store), threshold), store, threshold)


def related_memories(surface: str, graph: EntityGraph, store: MemoryStore | None = None,
                     hops: int = 0) -> set[str]:
    if hops not in (0, 1):
        raise ValueError("hops must be 0 or 1")
    entity = graph.find(surface)
    if entity is None:
        raise NotFound(f"no entity matches {surface!r}")
    ids = entity.memory_ids()
    if hops == 1:
        for cid in graph.neighbors(entity.canonical_id):
            ids |= graph.entities[cid].memory_ids()
    if store is not None:
        ids = {i for i in ids if i in store}
    return ids


def write_graph(graph: EntityGraph, sink: str | Path | IO[str]) -> None:
    lines = []
    for cid, ent in graph.entities.items():
        lines.append(f"E\t{cid}\t{ent.entity_type.value}\t{'|'.join(sorted(ent.aliases))}")
    for (a, b), n in graph.edges.items():
        lines.append(f"R\t{a}\t{b}\t{n}")
    text = "".join(line + "\n" for line in lines)
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text, encoding="utf-8")
    else:
        sink.write(text)


def read_graph(source: str | Path | IO[str], threshold: float = DEFAULT_THRESHOLD) -> EntityGraph:
    """Inverse of :func:`write_graph` (member mentions are not exported, so they come back empty)."""
    text = Path(source).read_text(encoding="utf-8") if isinstance(source, (str, Path)) else source.read()
    entities: dict[str, CanonicalEntity] = {}
    edges: dict[tuple[str, str], int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split("\t")
        try:
            if parts[0] == "E" and len(parts) == 4:
                entities[parts[1]] = CanonicalEntity(parts[1], EntityType.parse(parts[2]),
                                                     set(parts[3].split("|")))
            elif parts[0] == "R" and len(parts) == 4:
                count = int(parts[3])
                if count < 1 or parts[1] not in entities or parts[2] not in entities:
                    raise ValueError("bad edge")
                edges[edge_key(parts[1], parts[2])] = count
            else:
                raise ValueError(f"unrecognized line {line!r}")
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
    return EntityGraph(entities, edges, threshold)
