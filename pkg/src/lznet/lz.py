"""LZ digests, Jaccard distance (LZJD) and LZJD k-nearest-neighbour classification."""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Hashable, Iterable, Iterator, Sequence

import numpy as np

_MASK = (1 << 64) - 1
_MULT = 0x100000001B3  # FNV-1a 64-bit prime


@dataclass(frozen=True)
class Digest:
    """Set of unique subsequences (or their 64-bit hashes) in discovery order."""

    order: tuple
    hashed: bool = False

    @property
    def entries(self) -> frozenset:
        return frozenset(self.order)

    def __len__(self) -> int:
        return len(self.order)

    def __iter__(self) -> Iterator:
        return iter(self.order)

    def __contains__(self, item) -> bool:
        return item in self.entries


def _token_codes(seq) -> Sequence[int]:
    if isinstance(seq, str):
        return [ord(ch) for ch in seq]
    if isinstance(seq, (bytes, bytearray)):
        return seq
    return [int(tok) for tok in seq]


def _normalize(seq):
    if isinstance(seq, (str, bytes, tuple)):
        return seq
    if isinstance(seq, bytearray):
        return bytes(seq)
    return tuple(seq)


def lz_digest(seq, hashed: bool = False) -> Digest:
    """Grow a window until it is unseen, store it, restart after it.

    A trailing window that is still in the store when the input runs out is
    dropped. Exact mode stores the subsequences themselves (``str`` slices for
    strings, ``bytes`` for bytes, tuples otherwise); hashed mode stores a
    64-bit polynomial hash that is extended in O(1) per token.
    """
    if hashed:
        return _digest_hashed(seq)
    seq = _normalize(seq)
    store: set = set()
    order = []
    start = 0
    for end in range(1, len(seq) + 1):
        window = seq[start:end]
        if window not in store:
            store.add(window)
            order.append(window)
            start = end
    return Digest(tuple(order), hashed=False)


def _digest_hashed(seq) -> Digest:
    codes = _token_codes(seq)
    store: set[int] = set()
    order = []
    h = 0
    for code in codes:
        h = ((h * _MULT) + int(code) + 1) & _MASK
        if h not in store:
            store.add(h)
            order.append(h)
            h = 0
    return Digest(tuple(order), hashed=True)


def jaccard_distance(a: Digest, b: Digest) -> float:
    """``1 - |A & B| / |A | B|``, and 0 for two empty digests."""
    if a.hashed != b.hashed:
        raise ValueError("cannot compare a hashed digest with an exact one")
    sa, sb = a.entries, b.entries
    union = len(sa | sb)
    if union == 0:
        return 0.0
    return 1.0 - len(sa & sb) / union


def lzjd(s1, s2, hashed: bool = False) -> float:
    return jaccard_distance(lz_digest(s1, hashed), lz_digest(s2, hashed))


def lzjd_matrix(rows: Sequence, cols: Sequence | None = None, hashed: bool = False, workers: int | None = None) -> np.ndarray:
    """Pairwise LZJD; ``out[i, j] = lzjd(rows[i], cols[j])`` regardless of ``workers``."""
    row_d = [lz_digest(s, hashed) for s in rows]
    col_d = row_d if cols is None else [lz_digest(s, hashed) for s in cols]

    def one_row(da: Digest) -> list[float]:
        return [jaccard_distance(da, db) for db in col_d]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        filled = list(pool.map(one_row, row_d))
    return np.array(filled, dtype=np.float64).reshape(len(row_d), len(col_d))


def knn_classify(train: Sequence[tuple[object, Hashable]], query, k: int = 1, hashed: bool = False) -> Hashable:
    """Majority label among the ``k`` nearest training sequences under LZJD.

    Equal distances keep training order. A tie in label counts goes to the
    label with the smaller summed distance, then to the one seen first.
    """
    if not train:
        raise ValueError("empty training set")
    if int(k) != k or k < 1 or k > len(train):
        raise ValueError(f"k must be in 1..{len(train)}, got {k}")
    qd = lz_digest(query, hashed)
    scored = sorted(
        ((jaccard_distance(qd, lz_digest(seq, hashed)), i, label) for i, (seq, label) in enumerate(train)),
        key=lambda item: (item[0], item[1]),
    )[:k]
    counts: Counter = Counter()
    dist_sum: dict = {}
    first: dict = {}
    for rank, (dist, _, label) in enumerate(scored):
        counts[label] += 1
        dist_sum[label] = dist_sum.get(label, 0.0) + dist
        first.setdefault(label, rank)
    return min(counts, key=lambda lab: (-counts[lab], dist_sum[lab], first[lab]))


def knn_predict(train: Sequence[tuple[object, Hashable]], queries: Iterable, k: int = 1, hashed: bool = False) -> list:
    return [knn_classify(train, q, k, hashed) for q in queries]
