"""Compare predicted clause annotations with gold-standard ones."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from ..errors import ValidationError
from .schema import PROCESS_TYPES, UNKNOWN, ClauseAnnotation


@dataclass
class ValidationReport:
    n_clauses: int
    process_accuracy: float
    participant_accuracy: float
    circumstance_accuracy: float
    # confusion[gold][predicted]
    confusion: dict[str, dict[str, int]] = field(default_factory=dict)
    mismatches: list[tuple[str, int]] = field(default_factory=list)

    def summary_rows(self) -> list[tuple[str, float]]:
        return [("n_clauses", self.n_clauses), ("process_accuracy", self.process_accuracy),
                ("participant_accuracy", self.participant_accuracy),
                ("circumstance_accuracy", self.circumstance_accuracy)]


def _spans(spans) -> Counter:
    return Counter(s.key() for s in spans)


def validate(gold: Sequence[ClauseAnnotation], predicted: Sequence[ClauseAnnotation]) -> ValidationReport:
    """Exact-match rates per clause plus a process confusion table.

    Participants (and circumstances) match when the multisets of
    (role, whitespace- and case-normalized span) agree.
    """
    if not gold:
        raise ValidationError("gold set is empty")
    if len(gold) != len(predicted):
        raise ValidationError(f"gold has {len(gold)} clauses, predicted has {len(predicted)}")
    key = lambda a: (a.narrative_id, a.clause_index)  # noqa: E731
    g_sorted = sorted(gold, key=key)
    p_sorted = sorted(predicted, key=key)
    for g, p in zip(g_sorted, p_sorted):
        if key(g) != key(p):
            raise ValidationError(f"misaligned clauses: gold {key(g)} vs predicted {key(p)}")
    labels = list(PROCESS_TYPES) + [UNKNOWN]
    confusion = {g: {p: 0 for p in labels} for g in PROCESS_TYPES}
    proc = part = circ = 0
    mismatches = []
    for g, p in zip(g_sorted, p_sorted):
        confusion[g.process_type][p.process_type if p.process_type in labels else UNKNOWN] += 1
        ok_proc = g.process_type == p.process_type
        ok_part = _spans(g.participants) == _spans(p.participants)
        ok_circ = _spans(g.circumstances) == _spans(p.circumstances)
        proc += ok_proc
        part += ok_part
        circ += ok_circ
        if not (ok_proc and ok_part and ok_circ):
            mismatches.append(key(g))
    n = len(gold)
    return ValidationReport(n, proc / n, part / n, circ / n, confusion, mismatches)
