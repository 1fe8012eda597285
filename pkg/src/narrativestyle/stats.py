"""Series-versus-series comparison of substring presence.

Every pattern of a given size becomes a presence/absence variable per
sequence. Two series are compared pattern by pattern with Fisher's exact test,
Holm step-down correction and (Haldane-corrected when needed) odds ratios.
"""
from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .patterns import ContingencyTable, _codes

# Two tables count as equally probable within this relative tolerance.
REL_TOL = 1e-12

_LOG_FACT: list[float] = [0.0]


def _log_factorial(n: int) -> float:
    if n >= len(_LOG_FACT):
        _LOG_FACT.extend(math.lgamma(k + 1) for k in range(len(_LOG_FACT), n + 1))
    return _LOG_FACT[n]


def _log_comb(n: int, k: int) -> float:
    return _log_factorial(n) - _log_factorial(k) - _log_factorial(n - k)


def fisher_exact_two_sided(table: ContingencyTable | tuple) -> float:
    """Two-sided Fisher exact p-value by the probability-mass rule.

    Sums the hypergeometric probabilities of all tables with the observed
    margins whose probability does not exceed the observed one. Tables with
    an empty row or column have a single arrangement, so p is 1.
    """
    a, b, c, d = table.as_tuple() if isinstance(table, ContingencyTable) else (int(v) for v in table)
    if min(a, b, c, d) < 0:
        raise ValueError(f"negative cell in {(a, b, c, d)}")
    row1, row2, col1 = a + b, c + d, a + c
    n = row1 + row2
    lo, hi = max(0, col1 - row2), min(row1, col1)
    log_denom = _log_comb(n, col1)
    logs = [_log_comb(row1, x) + _log_comb(row2, col1 - x) - log_denom for x in range(lo, hi + 1)]
    cutoff = logs[a - lo] + math.log1p(REL_TOL)
    inside = math.fsum(math.exp(v) for v in logs if v <= cutoff)
    outside = math.fsum(math.exp(v) for v in logs if v > cutoff)
    # sum whichever side is smaller; p is exactly 1 when every table qualifies
    p = 1.0 - outside if outside < inside else inside
    return min(1.0, max(0.0, p))


def odds_ratio(table: ContingencyTable | tuple) -> tuple[float, bool]:
    """``(a*d)/(b*c)``; any zero cell adds 0.5 to all four (flag set)."""
    if not isinstance(table, ContingencyTable):
        table = ContingencyTable(*table)
    a, b, c, d = table.as_tuple()
    if 0 in (a, b, c, d):
        return ((a + 0.5) * (d + 0.5)) / ((b + 0.5) * (c + 0.5)), True
    return (a * d) / (b * c), False


def holm_correct(p_values: Sequence[float], alpha: float = 0.05) -> list[tuple[float, bool]]:
    """Holm step-down adjusted p-values and rejections, in input order."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    m = len(p_values)
    for p in p_values:
        if not 0 <= p <= 1:
            raise ValueError(f"p-value out of range: {p}")
    order = sorted(range(m), key=lambda i: (p_values[i], i))
    adjusted = [0.0] * m
    running = 0.0
    for rank, i in enumerate(order):
        running = max(running, min(1.0, (m - rank) * p_values[i]))
        adjusted[i] = running
    return [(adj, adj <= alpha) for adj in adjusted]


@dataclass
class TestResult:
    pattern: str
    size: int
    table: ContingencyTable
    odds_ratio: float
    corrected: bool
    p_raw: float
    p_adjusted: float = 1.0
    significant: bool = False

    __test__ = False  # not a pytest class

    def row(self) -> dict:
        a, b, c, d = self.table.as_tuple()
        return {"pattern": self.pattern, "size": self.size, "a": a, "b": b, "c": c, "d": d,
                "odds_ratio": repr(self.odds_ratio), "corrected": int(self.corrected),
                "p_raw": repr(self.p_raw), "p_adjusted": repr(self.p_adjusted),
                "significant": int(self.significant)}


REPORT_COLUMNS = ["pattern", "size", "a", "b", "c", "d", "odds_ratio", "corrected",
                  "p_raw", "p_adjusted", "significant"]


def _presence_counts(records: Iterable, size: int) -> Counter:
    counts: Counter = Counter()
    for rec in records:
        s = _codes(rec)
        counts.update({s[i:i + size] for i in range(len(s) - size + 1)})
    return counts


def compare_series(series_a: Sequence, series_b: Sequence, sizes: Iterable[int] = (1, 2, 3),
                   alpha: float = 0.05, pool_sizes: bool = False,
                   significant_only: bool = False) -> list[TestResult]:
    """Test every pattern present in either series, per size.

    The Holm family is all patterns of one size unless ``pool_sizes`` is set.
    Results are ordered by size, then descending odds ratio, then pattern.
    """
    if not series_a or not series_b:
        raise ValueError("both series must be nonempty")
    n_a, n_b = len(series_a), len(series_b)
    families: list[list[TestResult]] = []
    for size in sorted(set(sizes)):
        pres_a = _presence_counts(series_a, size)
        pres_b = _presence_counts(series_b, size)
        family = []
        for pat in sorted(set(pres_a) | set(pres_b)):
            table = ContingencyTable(pres_a[pat], n_a - pres_a[pat], pres_b[pat], n_b - pres_b[pat])
            ratio, corrected = odds_ratio(table)
            family.append(TestResult(pat, size, table, ratio, corrected, fisher_exact_two_sided(table)))
        families.append(family)
    if pool_sizes:
        families = [[r for fam in families for r in fam]]
    for fam in families:
        for res, (adj, rej) in zip(fam, holm_correct([r.p_raw for r in fam], alpha)):
            res.p_adjusted, res.significant = adj, rej
    results = [r for fam in families for r in fam]
    results.sort(key=lambda r: (r.size, -r.odds_ratio, r.pattern))
    if significant_only:
        results = [r for r in results if r.significant]
    return results


def significant_counts(results: Iterable[TestResult]) -> dict[int, int]:
    out: Counter = Counter()
    for r in results:
        out[r.size] += 0
        if r.significant:
            out[r.size] += 1
    return dict(sorted(out.items()))


def write_report(results: Iterable[TestResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in results:
            writer.writerow(r.row())
