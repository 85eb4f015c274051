"""Query analysis: rule-based entity extraction, intent and category
classification, strategy selection and query expansion.

All rule tables are plain TSV files (see ``memharbor/rules``) and are
immutable once loaded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .embedding import EmbeddingProvider, HashEmbedder
from .errors import ParseError
from .model import (
    ALL_DIMENSIONS,
    Category,
    Dimension,
    EntityMention,
    EntityType,
    Intent,
    MemoryRecord,
    ProcessedQuery,
    parse_dimensions,
)
from .text import fold, tokenize

RULES_DIR = Path(__file__).parent / "rules"
MAX_VARIANTS = 5

INTENT_PRIORITY: tuple[Intent, ...] = (
    Intent.INFORMATION_SEEKING,
    Intent.PREFERENCE_EXPRESSION,
    Intent.GOAL_SETTING,
    Intent.CONTEXTUAL_CLARIFICATION,
    Intent.SOCIAL_INTERACTION,
)

_WORD_RE = re.compile(r"[^\W_]+")
_SENTENCE_END = re.compile(r"[.!?]")

_LOCATION_CUES = frozenset({"in", "from", "to", "near", "visit", "visiting", "around"})
_ORG_CUES = frozenset({"at", "for", "joined"})
_ORG_SUFFIXES = frozenset({
    "inc", "corp", "corporation", "labs", "university", "college", "company",
    "ltd", "llc", "group", "bank", "hospital", "institute",
})
# Capitalized words that are never names on their own.
_NOT_NAMES = frozenset("""
i im ive id ill monday tuesday wednesday thursday friday saturday sunday
january february march april may june july august september october november december
""".split())


def _read_tsv(path: Path, ncols: int = 2) -> list[tuple[int, list[str]]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != ncols or not all(p.strip() for p in parts):
                raise ParseError(f"{path.name}: expected {ncols} tab-separated fields", line=lineno)
            rows.append((lineno, [p.strip() for p in parts]))
    return rows


# ---------------------------------------------------------------------------
# rule tables


@dataclass(frozen=True)
class ExtractionRuleSet:
    """Gazetteers (token tuples), date/time patterns and capitalization rules."""

    gazetteers: Mapping[EntityType, frozenset[str]]
    patterns: tuple[tuple[EntityType, re.Pattern], ...] = ()
    use_case_rules: bool = True
    _phrases: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        phrases: dict[tuple[str, ...], EntityType] = {}
        for etype in EntityType:
            for surface in sorted(self.gazetteers.get(etype, ())):
                if surface != surface.lower():
                    raise ValueError(f"gazetteer entries must be lowercase: {surface!r}")
                key = tuple(tokenize(surface))
                if key:
                    phrases.setdefault(key, etype)
        object.__setattr__(self, "_phrases", phrases)

    @property
    def max_phrase_len(self) -> int:
        return max((len(k) for k in self._phrases), default=0)

    def lookup(self, tokens: tuple[str, ...]) -> EntityType | None:
        return self._phrases.get(tokens)

    @classmethod
    def from_files(cls, gazetteer: Path, patterns: Path | None = None) -> "ExtractionRuleSet":
        gaz: dict[EntityType, set[str]] = {}
        for lineno, (label, surface) in _read_tsv(gazetteer):
            try:
                etype = EntityType.parse(label)
            except ValueError as exc:
                raise ParseError(f"{gazetteer.name}: {exc}", line=lineno) from None
            gaz.setdefault(etype, set()).add(surface.lower())
        pats = []
        if patterns is not None and patterns.exists():
            for lineno, (label, regex) in _read_tsv(patterns):
                try:
                    pats.append((EntityType.parse(label), re.compile(regex, re.IGNORECASE)))
                except (ValueError, re.error) as exc:
                    raise ParseError(f"{patterns.name}: {exc}", line=lineno) from None
        return cls({k: frozenset(v) for k, v in gaz.items()}, tuple(pats))


@dataclass(frozen=True)
class KeywordTable:
    """label -> keyword phrases, matched as whole-token subsequences."""

    entries: tuple[tuple[str, tuple[str, ...]], ...]

    @classmethod
    def from_file(cls, path: Path, labels: Iterable[str]) -> "KeywordTable":
        allowed = set(labels)
        entries = []
        for lineno, (label, phrase) in _read_tsv(path):
            if label not in allowed:
                raise ParseError(f"{path.name}: unknown label {label!r}", line=lineno)
            toks = tuple(tokenize(phrase))
            if not toks:
                raise ParseError(f"{path.name}: empty keyword phrase", line=lineno)
            entries.append((label, toks))
        return cls(tuple(entries))

    def hits(self, text: str) -> dict[str, int]:
        """Number of distinct keyword phrases of each label found in ``text``."""
        tokens = tokenize(text)
        if not tokens:
            return {}
        longest = max((len(p) for _, p in self.entries), default=0)
        grams = {
            tuple(tokens[i:i + n])
            for n in range(1, longest + 1)
            for i in range(len(tokens) - n + 1)
        }
        counts: dict[str, int] = {}
        seen = set()
        for label, phrase in self.entries:
            if phrase in grams and (label, phrase) not in seen:
                seen.add((label, phrase))
                counts[label] = counts.get(label, 0) + 1
        return counts


@dataclass(frozen=True)
class StrategyTable:
    mapping: Mapping[Category, frozenset[Dimension]]
    default: frozenset[Dimension] = frozenset(ALL_DIMENSIONS)

    def __post_init__(self):
        if not self.default or any(not dims for dims in self.mapping.values()):
            raise ValueError("strategy entries must be nonempty")

    @classmethod
    def from_file(cls, path: Path) -> "StrategyTable":
        mapping: dict[Category, frozenset[Dimension]] = {}
        default = frozenset(ALL_DIMENSIONS)
        for lineno, (label, dims) in _read_tsv(path):
            try:
                parsed = parse_dimensions(dims)
                if label == "default":
                    default = parsed
                else:
                    mapping[Category.parse(label)] = parsed
            except ValueError as exc:
                raise ParseError(f"{path.name}: {exc}", line=lineno) from None
        return cls(mapping, default)


def load_synonyms(path: Path) -> dict[str, frozenset[str]]:
    table: dict[str, frozenset[str]] = {}
    for lineno, (word, syns) in _read_tsv(path):
        key = fold(word)
        if len(tokenize(key)) != 1:
            raise ParseError(f"{path.name}: synonym key must be a single word", line=lineno)
        values = frozenset(s.strip() for s in syns.split(",") if s.strip())
        table[key] = table.get(key, frozenset()) | values
    return table


@dataclass(frozen=True)
class RuleBook:
    extraction: ExtractionRuleSet
    intents: KeywordTable
    categories: KeywordTable
    synonyms: Mapping[str, frozenset[str]]
    strategy: StrategyTable

    @classmethod
    def load(cls, directory: str | Path | None = None) -> "RuleBook":
        d = Path(directory) if directory is not None else RULES_DIR
        synonyms = d / "synonyms.tsv"
        strategy = d / "strategy.tsv"
        return cls(
            extraction=ExtractionRuleSet.from_files(d / "gazetteer.tsv", d / "patterns.tsv"),
            intents=KeywordTable.from_file(d / "intents.tsv", [i.value for i in INTENT_PRIORITY]),
            categories=KeywordTable.from_file(d / "categories.tsv", [c.value for c in Category]),
            synonyms=load_synonyms(synonyms) if synonyms.exists() else {},
            strategy=StrategyTable.from_file(strategy) if strategy.exists() else StrategyTable({}),
        )


@lru_cache(maxsize=1)
def default_rules() -> RuleBook:
    return RuleBook.load()


# ---------------------------------------------------------------------------
# analysis operations


@dataclass(frozen=True)
class _Token:
    text: str
    folded: str
    start: int
    end: int
    sentence_initial: bool


def _word_tokens(text: str) -> list[_Token]:
    out = []
    prev_end = 0
    for i, m in enumerate(_WORD_RE.finditer(text)):
        gap = text[prev_end:m.start()]
        initial = i == 0 or bool(_SENTENCE_END.search(gap))
        out.append(_Token(m.group(), m.group().casefold(), m.start(), m.end(), initial))
        prev_end = m.end()
    return out


def _is_capitalized(tok: _Token) -> bool:
    return tok.text[0].isupper() and tok.folded not in _NOT_NAMES


def _case_rule_type(tokens: list[_Token], start: int, end: int) -> EntityType:
    if tokens[end - 1].folded in _ORG_SUFFIXES:
        return EntityType.ORGANIZATION
    cue = tokens[start - 1].folded if start > 0 else ""
    if cue in _LOCATION_CUES:
        return EntityType.LOCATION
    if cue in _ORG_CUES:
        return EntityType.ORGANIZATION
    return EntityType.PERSON


def extract_entities(text: str, rules: ExtractionRuleSet | None = None) -> list[EntityMention]:
    """Rule-based mentions in text order; a token belongs to at most one mention.

    Candidates come from date/time patterns, gazetteer phrases and runs of
    capitalized words. Longer candidates win, then leftmost, then the source
    in that order.
    """
    if rules is None:
        rules = default_rules().extraction
    tokens = _word_tokens(text)
    if not tokens:
        return []
    # (start_tok, end_tok, priority, type, char_start, char_end)
    cands: list[tuple[int, int, int, EntityType, int, int]] = []

    for etype, pattern in rules.patterns:
        for m in pattern.finditer(text):
            covered = [i for i, t in enumerate(tokens) if t.start < m.end() and t.end > m.start()]
            if covered:
                cands.append((covered[0], covered[-1] + 1, 0, etype, m.start(), m.end()))

    longest = rules.max_phrase_len
    folded = [t.folded for t in tokens]
    for i in range(len(tokens)):
        for n in range(1, min(longest, len(tokens) - i) + 1):
            etype = rules.lookup(tuple(folded[i:i + n]))
            if etype is not None:
                cands.append((i, i + n, 1, etype, tokens[i].start, tokens[i + n - 1].end))

    if rules.use_case_rules:
        i = 0
        while i < len(tokens):
            tok = tokens[i]
            if tok.sentence_initial or not _is_capitalized(tok):
                i += 1
                continue
            j = i + 1
            while (
                j < len(tokens)
                and _is_capitalized(tokens[j])
                and not tokens[j].sentence_initial
                and not text[tokens[j - 1].end:tokens[j].start].strip()
            ):
                j += 1
            cands.append((i, j, 2, _case_rule_type(tokens, i, j), tokens[i].start, tokens[j - 1].end))
            i = j

    claimed = [False] * len(tokens)
    chosen = []
    for start, end, prio, etype, cs, ce in sorted(cands, key=lambda c: (c[0] - c[1], c[0], c[2])):
        if any(claimed[start:end]):
            continue
        for k in range(start, end):
            claimed[k] = True
        chosen.append((start, cs, ce, etype))
    chosen.sort()
    return [EntityMention(text[cs:ce], etype) for _, cs, ce, etype in chosen]


def classify_intent(text: str, table: KeywordTable | None = None) -> Intent:
    """Intent with the most keyword hits; ties resolved by INTENT_PRIORITY."""
    if table is None:
        table = default_rules().intents
    hits = table.hits(text)
    best, best_hits = Intent.UNKNOWN, 0
    for intent in INTENT_PRIORITY:
        n = hits.get(intent.value, 0)
        if n > best_hits:
            best, best_hits = intent, n
    return best


def classify_categories(text: str, table: KeywordTable | None = None) -> frozenset[Category]:
    if table is None:
        table = default_rules().categories
    return frozenset(Category(label) for label, n in table.hits(text).items() if n > 0)


def select_strategy(q: ProcessedQuery, table: StrategyTable | None = None) -> frozenset[Dimension]:
    if table is None:
        table = default_rules().strategy
    dims: set[Dimension] = set()
    for cat in q.categories:
        dims |= table.mapping.get(cat, table.default)
    return frozenset(dims) if dims else table.default


def _substitutions(text: str, synonyms: Mapping[str, Iterable[str]]) -> list[str]:
    out = []
    for tok in _word_tokens(text):
        for syn in sorted(synonyms.get(tok.folded, ())):
            out.append(text[:tok.start] + syn + text[tok.end:])
    return out


def expand_query(
    q: ProcessedQuery,
    synonyms: Mapping[str, Iterable[str]],
    analyze: Callable[[str], ProcessedQuery],
    aliases: Sequence[tuple[str, Sequence[str]]] = (),
) -> list[ProcessedQuery]:
    """The original query followed by at most MAX_VARIANTS rewritten variants.

    Synonym substitutions come first (by word position, then synonym order),
    then entity-alias substitutions from ``aliases`` as (surface, aliases)
    pairs. ``analyze`` re-embeds and re-classifies each variant text.
    """
    texts = _substitutions(q.text, synonyms)
    for surface, names in aliases:
        pos = q.text.find(surface)
        if pos < 0:
            continue
        for alias in sorted(names):
            if fold(alias) != fold(surface):
                texts.append(q.text[:pos] + alias + q.text[pos + len(surface):])
    seen = {fold(q.text)}
    out = [q]
    for t in texts:
        if len(out) > MAX_VARIANTS:
            break
        if fold(t) in seen:
            continue
        seen.add(fold(t))
        out.append(analyze(t))
    return out


class QueryProcessor:
    """Bundles rule tables with an embedding provider."""

    def __init__(self, rules: RuleBook | None = None, embedder: EmbeddingProvider | None = None):
        self.rules = rules or default_rules()
        self.embedder = embedder or HashEmbedder()

    @classmethod
    def for_dimension(cls, dimension: int, rules: RuleBook | None = None) -> "QueryProcessor":
        return cls(rules, HashEmbedder(dimension))

    @property
    def dimension(self) -> int:
        return self.embedder.dimension

    def analyze(
        self,
        text: str,
        timestamp: int = 0,
        dimensions: Iterable[Dimension] | None = None,
        context_markers: Sequence[str] = (),
    ) -> ProcessedQuery:
        q = ProcessedQuery(
            text=text,
            embedding=self.embedder.embed(text),
            entities=tuple(extract_entities(text, self.rules.extraction)),
            categories=classify_categories(text, self.rules.categories),
            intent=classify_intent(text, self.rules.intents),
            enabled_dimensions=frozenset(ALL_DIMENSIONS),
            timestamp=timestamp,
            context_markers=tuple(context_markers),
        )
        dims = frozenset(dimensions) if dimensions is not None else select_strategy(q, self.rules.strategy)
        return replace(q, enabled_dimensions=dims)

    def expand(self, q: ProcessedQuery, graph=None) -> list[ProcessedQuery]:
        aliases = []
        if graph is not None:
            for mention in q.entities:
                entity = graph.find(mention.surface)
                if entity is not None:
                    aliases.append((mention.surface, sorted(entity.aliases)))

        def analyze(text: str) -> ProcessedQuery:
            return self.analyze(text, q.timestamp, q.enabled_dimensions, q.context_markers)

        return expand_query(q, self.rules.synonyms, analyze, aliases)

    def make_record(
        self,
        record_id: str,
        user_id: str,
        text: str,
        timestamp: int,
        context_markers: Sequence[str] = (),
    ) -> MemoryRecord:
        """Annotate raw text the same way queries are analyzed."""
        return MemoryRecord(
            id=record_id,
            user_id=user_id,
            text=text,
            embedding=self.embedder.embed(text),
            entities=tuple(extract_entities(text, self.rules.extraction)),
            categories=classify_categories(text, self.rules.categories),
            intent=classify_intent(text, self.rules.intents),
            context_markers=tuple(context_markers),
            timestamp=timestamp,
        )
