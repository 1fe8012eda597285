"""Substring and subsequence patterns over symbol sequences.

Substring occurrences are counted with overlap (sliding window). Counts feed
similarity and clustering; per-sequence presence feeds the series statistics.
"""
from __future__ import annotations

import csv
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DEFAULT_MAX_SIZE = 9
MAX_SUBSEQUENCE_LEN = 4


def _codes(seq) -> str:
    # accepts plain strings, SymbolSequence and NarrativeRecord
    return seq if isinstance(seq, str) else seq.codes


@dataclass
class SubstringProfile:
    sequence_id: str
    min_len: int
    max_len: int
    counts: Counter = field(default_factory=Counter)

    def presence(self) -> "PresenceProfile":
        return PresenceProfile(self.sequence_id, frozenset(self.counts))

    def __getitem__(self, pattern: str) -> int:
        return self.counts.get(pattern, 0)

    def as_dict(self) -> dict[str, int]:
        return dict(self.counts)


@dataclass(frozen=True)
class PresenceProfile:
    sequence_id: str
    patterns: frozenset

    def __contains__(self, pattern: str) -> bool:
        return pattern in self.patterns


def _check_bounds(min_len: int, max_len: int) -> None:
    if min_len < 1:
        raise ValueError(f"min_len must be >= 1, got {min_len}")
    if max_len < min_len:
        raise ValueError(f"max_len ({max_len}) must be >= min_len ({min_len})")


def substrings(seq, min_len: int = 1, max_len: int = 3, sequence_id: str = "") -> SubstringProfile:
    """Count every contiguous window of length ``min_len..max_len``.

    >>> dict(substrings("amv", 2, 2).counts)
    {'am': 1, 'mv': 1}
    """
    _check_bounds(min_len, max_len)
    s = _codes(seq)
    counts: Counter = Counter()
    for n in range(min_len, min(max_len, len(s)) + 1):
        counts.update(s[i:i + n] for i in range(len(s) - n + 1))
    return SubstringProfile(sequence_id or getattr(seq, "id", ""), min_len, max_len, counts)


def profile_many(records: Sequence, min_len: int = 1, max_len: int = 3, workers: int = 1) -> list[SubstringProfile]:
    """Profile many records; output order matches input order for any ``workers``."""
    def one(rec):
        return substrings(_codes(rec), min_len, max_len, getattr(rec, "id", ""))

    if workers <= 1:
        return [one(r) for r in records]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, records))


def subsequence_present(seq, pattern: str) -> bool:
    """True when ``pattern`` embeds in ``seq`` keeping order (gaps allowed)."""
    if not pattern:
        raise ValueError("pattern must be nonempty")
    it = iter(_codes(seq))
    return all(ch in it for ch in pattern)


def subsequence_patterns(seq, max_len: int = MAX_SUBSEQUENCE_LEN) -> set[str]:
    """All distinct subsequences of length 1..max_len present in ``seq``."""
    if max_len > MAX_SUBSEQUENCE_LEN:
        raise ValueError(f"subsequence enumeration is capped at length {MAX_SUBSEQUENCE_LEN}")
    s = _codes(seq)
    found: set[str] = set()
    frontier = {""}
    # extend by one symbol per round; each pattern keeps its earliest end index
    ends = {"": -1}
    for _ in range(max_len):
        nxt: dict[str, int] = {}
        for pat in frontier:
            start = ends[pat] + 1
            for j in range(start, len(s)):
                cand = pat + s[j]
                if cand not in nxt or j < nxt[cand]:
                    nxt[cand] = j
        found.update(nxt)
        ends = nxt
        frontier = set(nxt)
    return found


def distinct_substrings(series: Iterable, size: int) -> tuple[int, list[str]]:
    """Number and sorted list of distinct patterns of exactly ``size`` in a series."""
    if size < 1:
        raise ValueError("size must be >= 1")
    inventory: set[str] = set()
    for rec in series:
        s = _codes(rec)
        inventory.update(s[i:i + size] for i in range(len(s) - size + 1))
    ordered = sorted(inventory)
    return len(ordered), ordered


@dataclass(frozen=True)
class ContingencyTable:
    """Presence table: a/b = series A with/without, c/d = series B with/without."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) < 0:
            raise ValueError(f"negative cell in {self}")
        if self.a + self.b < 1 or self.c + self.d < 1:
            raise ValueError(f"empty row in {self}")

    def swapped(self) -> "ContingencyTable":
        return ContingencyTable(self.c, self.d, self.a, self.b)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.a, self.b, self.c, self.d)


def presence_table(series_a: Sequence, series_b: Sequence, pattern: str) -> ContingencyTable:
    if not series_a or not series_b:
        raise ValueError("both series must be nonempty")
    a = sum(pattern in _codes(r) for r in series_a)
    c = sum(pattern in _codes(r) for r in series_b)
    return ContingencyTable(a, len(series_a) - a, c, len(series_b) - c)


def vocabulary(profiles: Iterable[SubstringProfile]) -> list[str]:
    """Sorted by (length, pattern) so short patterns come first."""
    vocab: set[str] = set()
    for p in profiles:
        vocab.update(p.counts)
    return sorted(vocab, key=lambda x: (len(x), x))


def frequency_vector(profile: SubstringProfile, vocab: Sequence[str]) -> np.ndarray:
    return np.array([profile.counts.get(p, 0) for p in vocab], dtype=np.int64)


def frequency_matrix(profiles: Sequence[SubstringProfile], vocab: Sequence[str]) -> np.ndarray:
    index = {p: i for i, p in enumerate(vocab)}
    mat = np.zeros((len(profiles), len(vocab)), dtype=np.int64)
    for row, prof in enumerate(profiles):
        for pat, n in prof.counts.items():
            mat[row, index[pat]] = n
    return mat


INVENTORY_COLUMNS = ["pattern", "size", "series", "sequence_presence_count", "total_occurrences"]


def inventory_rows(series_name: str, records: Sequence, sizes: Iterable[int]) -> list[dict]:
    rows = []
    for size in sizes:
        presence: Counter = Counter()
        total: Counter = Counter()
        for rec in records:
            s = _codes(rec)
            windows = [s[i:i + size] for i in range(len(s) - size + 1)]
            total.update(windows)
            presence.update(set(windows))
        for pat in sorted(total):
            rows.append({"pattern": pat, "size": size, "series": series_name,
                         "sequence_presence_count": presence[pat], "total_occurrences": total[pat]})
    return rows


def write_inventory(rows: Iterable[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=INVENTORY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
