"""Lexical similarity primitives and the combined text similarity score."""

from __future__ import annotations

import re
from dataclasses import dataclass
from difflib import SequenceMatcher

from . import _kernels

_TOKEN_RE = re.compile(r"[^\W_]+")

EXACT_BONUS = 1.0
SUBSTRING_BONUS = 0.8
BONUS_SCALE = 0.5
MAX_ENHANCED = 1.0 + EXACT_BONUS * BONUS_SCALE


def fold(text: str) -> str:
    return text.casefold()


def tokenize(text: str) -> list[str]:
    """Case-fold and split on runs of non-alphanumeric characters."""
    return _TOKEN_RE.findall(fold(text))


@dataclass(frozen=True)
class TokenizedText:
    raw: str
    words: tuple[str, ...]
    word_set: frozenset[str]

    @classmethod
    def of(cls, raw: str) -> "TokenizedText":
        words = tuple(tokenize(raw))
        return cls(raw, words, frozenset(words))


def _as_tokens(x: "TokenizedText | str") -> TokenizedText:
    return x if isinstance(x, TokenizedText) else TokenizedText.of(x)


def jaccard(a: TokenizedText | str, b: TokenizedText | str) -> float:
    wa, wb = _as_tokens(a).word_set, _as_tokens(b).word_set
    union = len(wa | wb)
    if union == 0:
        return 1.0
    return len(wa & wb) / union


def word_overlap(a: TokenizedText | str, b: TokenizedText | str) -> float:
    wa, wb = _as_tokens(a).word_set, _as_tokens(b).word_set
    denom = max(len(wa), len(wb))
    if denom == 0:
        return 1.0
    return len(wa & wb) / denom


def matched_characters(a: str, b: str) -> int:
    """Characters covered by the Ratcliff-Obershelp matching blocks of ``a`` against ``b``.

    The longest common block is taken first (earliest in ``a``, then earliest in
    ``b`` on ties) and the procedure recurses on both sides. Because of that
    tie-break the count depends on argument order.
    """
    matcher = SequenceMatcher(None, a, b, autojunk=False)
    return sum(block.size for block in matcher.get_matching_blocks())


def sequence_ratio(a: str, b: str) -> float:
    """Symmetric Ratcliff-Obershelp ratio ``2*M / (len(a) + len(b))``.

    ``M`` is the larger of the two orientation-dependent match counts of
    :func:`matched_characters`, which makes the ratio independent of argument
    order. The count comes from the compiled kernel, which follows the same
    block tie-break as ``difflib``.
    """
    total = len(a) + len(b)
    if total == 0:
        return 1.0
    if a == b:
        return 1.0
    if not a or not b:
        return 0.0
    return 2.0 * _kernels.pair_matches(_kernels.encode(a), _kernels.encode(b)) / total


def bonus(q: str, m: str) -> float:
    """Exact/substring bonus term on case-folded strings; empty strings earn none."""
    qf, mf = fold(q), fold(m)
    if not qf or not mf:
        return 0.0
    if qf == mf:
        return EXACT_BONUS
    if qf in mf or mf in qf:
        return SUBSTRING_BONUS
    return 0.0


def combine_text_components(j: float, seq: float, overlap: float, bonus_value: float) -> float:
    return (j + seq + overlap) / 3.0 + bonus_value * BONUS_SCALE


def enhanced_text_similarity(q: str, m: str) -> float:
    """Mean of Jaccard, sequence ratio and word overlap, plus half the match bonus.

    Range is [0, 1.5]; 1.5 only for equal nonempty strings (after case folding).
    """
    tq, tm = TokenizedText.of(q), TokenizedText.of(m)
    seq = sequence_ratio(fold(q), fold(m))
    return combine_text_components(jaccard(tq, tm), seq, word_overlap(tq, tm), bonus(q, m))
