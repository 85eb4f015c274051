"""Compiled batch kernel for Ratcliff-Obershelp match counts.

Mirrors :func:`memharbor.text.matched_characters` (same longest-block
tie-break) so batch scores are identical to the scalar path.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _matched(a, b, prev, cur, stack):
    total = 0
    stack[0, 0] = 0
    stack[0, 1] = a.shape[0]
    stack[0, 2] = 0
    stack[0, 3] = b.shape[0]
    top = 1
    while top > 0:
        top -= 1
        alo = stack[top, 0]
        ahi = stack[top, 1]
        blo = stack[top, 2]
        bhi = stack[top, 3]
        best = 0
        bi = alo
        bj = blo
        for j in range(blo, bhi + 1):
            prev[j] = 0
            cur[j] = 0
        for i in range(alo, ahi):
            ai = a[i]
            for j in range(blo, bhi):
                if ai == b[j]:
                    k = prev[j] + 1
                    cur[j + 1] = k
                    # strict '>' keeps the earliest block in a, then in b
                    if k > best:
                        best = k
                        bi = i - k + 1
                        bj = j - k + 1
                else:
                    cur[j + 1] = 0
            for j in range(blo + 1, bhi + 1):
                prev[j] = cur[j]
        if best > 0:
            total += best
            if alo < bi and blo < bj:
                stack[top, 0] = alo
                stack[top, 1] = bi
                stack[top, 2] = blo
                stack[top, 3] = bj
                top += 1
            if bi + best < ahi and bj + best < bhi:
                stack[top, 0] = bi + best
                stack[top, 1] = ahi
                stack[top, 2] = bj + best
                stack[top, 3] = bhi
                top += 1
    return total


@njit(cache=True, nogil=True)
def symmetric_matches(q, codes, offsets, rows):
    """max(M(q, m), M(m, q)) for each memory text ``m`` selected by ``rows``."""
    n = rows.shape[0]
    out = np.zeros(n, np.int64)
    maxlen = q.shape[0]
    for t in range(n):
        r = rows[t]
        length = offsets[r + 1] - offsets[r]
        if length > maxlen:
            maxlen = length
    prev = np.zeros(maxlen + 2, np.int64)
    cur = np.zeros(maxlen + 2, np.int64)
    stack = np.zeros((maxlen + 2, 4), np.int64)
    for t in range(n):
        r = rows[t]
        m = codes[offsets[r]:offsets[r + 1]]
        if q.shape[0] == 0 or m.shape[0] == 0:
            continue
        first = _matched(q, m, prev, cur, stack)
        if first < min(q.shape[0], m.shape[0]):
            second = _matched(m, q, prev, cur, stack)
            if second > first:
                first = second
        out[t] = first
    return out


@njit(cache=True, nogil=True)
def pair_matches(a, b):
    """max(M(a, b), M(b, a)) for one pair of code-point arrays."""
    if a.shape[0] == 0 or b.shape[0] == 0:
        return 0
    n = max(a.shape[0], b.shape[0]) + 2
    prev = np.zeros(n, np.int64)
    cur = np.zeros(n, np.int64)
    stack = np.zeros((n, 4), np.int64)
    first = _matched(a, b, prev, cur, stack)
    if first < min(a.shape[0], b.shape[0]):
        second = _matched(b, a, prev, cur, stack)
        if second > first:
            first = second
    return first


def encode(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("utf-32-le", "surrogatepass"), dtype=np.uint32).astype(np.int32)


def pack(texts) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate code points of ``texts`` with an offsets array of length n+1."""
    lengths = np.array([len(t) for t in texts], dtype=np.int64)
    offsets = np.zeros(len(texts) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    joined = "".join(texts)
    codes = encode(joined) if joined else np.zeros(0, dtype=np.int32)
    return codes, offsets


def batch_ratios(query: str, texts) -> np.ndarray:
    """Symmetric sequence ratios of ``query`` against every text (convenience wrapper)."""
    codes, offsets = pack(list(texts))
    rows = np.arange(len(offsets) - 1, dtype=np.int64)
    q = encode(query) if query else np.zeros(0, dtype=np.int32)
    m = symmetric_matches(q, codes, offsets, rows)
    totals = np.diff(offsets) + len(query)
    out = np.ones(len(rows), dtype=np.float64)
    nz = totals > 0
    out[nz] = 2.0 * m[nz] / totals[nz]
    return out
