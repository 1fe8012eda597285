"""Lempel-Ziv (1976) complexity of symbol sequences.

Exhaustive-history parsing: a phrase grows while it can still be copied from
the text preceding its last symbol (overlap allowed); the phrase closes on the
first symbol that makes it new. A trailing phrase that is still reproducible
when the input ends is counted as well. Implemented with the Kaspar-Schuster
scan, which needs no substring searches.
"""
from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass
from typing import Sequence

from .patterns import _codes


@dataclass
class ComplexityReport:
    sequence_id: str
    length: int
    phrase_count: int
    normalized: float
    boundaries: list[int]

    def phrases(self, seq: str) -> list[str]:
        ends = self.boundaries[1:] + [len(seq)]
        return [seq[a:b] for a, b in zip(self.boundaries, ends)]


def lz76_phrases(s: str) -> list[int]:
    """Start offsets of the LZ76 phrases of ``s``."""
    n = len(s)
    if n == 0:
        raise ValueError("LZ76 complexity is undefined for an empty sequence")
    starts = [0]
    if n == 1:
        return starts
    starts.append(1)
    i, k, k_max, l = 0, 1, 1, 1
    while True:
        if s[i + k - 1] == s[l + k - 1]:
            k += 1
            if l + k > n:
                break
        else:
            k_max = max(k, k_max)
            i += 1
            if i == l:
                l += k_max
                if l + 1 > n:
                    break
                starts.append(l)
                i, k, k_max = 0, 1, 1
            else:
                k = 1
    return starts


def lz76_complexity(seq, alphabet_size: int = 4, sequence_id: str = "") -> ComplexityReport:
    """Phrase count and ``count * log_b(L) / L`` with ``b = max(alphabet_size, 2)``."""
    s = _codes(seq)
    starts = lz76_phrases(s)
    n = len(s)
    base = max(alphabet_size, 2)
    normalized = len(starts) * math.log(n, base) / n
    return ComplexityReport(sequence_id or getattr(seq, "id", ""), n, len(starts), normalized, starts)


@dataclass
class ComplexitySummary:
    count: int
    mean: float
    median: float
    minimum: float
    maximum: float
    values: list[float]


def complexity_profile(series: Sequence, alphabet_size: int = 4) -> tuple[ComplexitySummary, list[ComplexityReport]]:
    """Normalized-complexity summary of one series; empty sequences are skipped."""
    reports = [lz76_complexity(r, alphabet_size) for r in series if len(_codes(r)) > 0]
    if not reports:
        raise ValueError("series has no nonempty sequences")
    vals = [r.normalized for r in reports]
    summary = ComplexitySummary(len(vals), statistics.fmean(vals), float(statistics.median(vals)),
                                min(vals), max(vals), vals)
    return summary, reports


def write_complexity(reports: Sequence[ComplexityReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "length", "phrase_count", "normalized"])
        for r in reports:
            writer.writerow([r.sequence_id, r.length, r.phrase_count, repr(r.normalized)])
