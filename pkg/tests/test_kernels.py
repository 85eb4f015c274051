import random

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from memharbor import _kernels
from memharbor.text import matched_characters, sequence_ratio


def difflib_symmetric(a, b):
    return max(matched_characters(a, b), matched_characters(b, a))


@given(st.text(max_size=30), st.text(max_size=30))
def test_pair_kernel_matches_difflib(a, b):
    got = _kernels.pair_matches(_kernels.encode(a), _kernels.encode(b)) if a and b else 0
    assert got == difflib_symmetric(a, b)


def test_batch_kernel_matches_difflib_random_corpus():
    rng = random.Random(5)
    alphabet = "ab cdeé☃"
    texts = ["".join(rng.choice(alphabet) for _ in range(rng.randint(0, 40))) for _ in range(400)]
    codes, offsets = _kernels.pack(texts)
    rows = np.arange(len(texts))
    for _ in range(20):
        q = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 40)))
        qa = _kernels.encode(q) if q else np.zeros(0, dtype=np.int32)
        got = _kernels.symmetric_matches(qa, codes, offsets, rows)
        expected = [difflib_symmetric(q, t) if q and t else 0 for t in texts]
        assert got.tolist() == expected


def test_row_subset():
    texts = ["abc", "zzz", "cab"]
    codes, offsets = _kernels.pack(texts)
    got = _kernels.symmetric_matches(_kernels.encode("abc"), codes, offsets, np.array([2, 0]))
    assert got.tolist() == [2, 3]


def test_batch_ratios_agree_with_scalar():
    texts = ["", "a", "hello world", "world hello", "ab", "bacb"]
    for q in ["", "ab", "hello"]:
        got = _kernels.batch_ratios(q, texts)
        assert got.tolist() == [sequence_ratio(q, t) for t in texts]


def test_astral_and_surrogates():
    s = "a\U0001F600b\ud800"
    assert _kernels.encode(s).size == 4
    assert _kernels.pair_matches(_kernels.encode(s), _kernels.encode(s)) == 4
