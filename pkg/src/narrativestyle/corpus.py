"""Sequence corpora grouped by series, the norm sample, and length statistics."""
from __future__ import annotations

import csv
import json
import logging
import statistics
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .alphabet import Alphabet, SymbolSequence
from .errors import ValidationError

log = logging.getLogger(__name__)

NORM_SERIES = "norm"
# Recorded in manifests next to the seed.
RNG_NAME = f"numpy.random.PCG64 (numpy {np.__version__})"


@dataclass(frozen=True)
class NarrativeRecord:
    id: str
    series: str
    sequence: SymbolSequence
    text: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValidationError("record id must be nonempty")

    @property
    def codes(self) -> str:
        return self.sequence.codes


@dataclass
class SeriesCorpus:
    alphabet: Alphabet
    series: dict[str, list[NarrativeRecord]] = field(default_factory=dict)

    def __len__(self) -> int:
        return sum(len(v) for v in self.series.values())

    def sizes(self) -> dict[str, int]:
        return {name: len(recs) for name, recs in self.series.items()}

    def records(self) -> list[NarrativeRecord]:
        return [r for recs in self.series.values() for r in recs]

    def __getitem__(self, name: str) -> list[NarrativeRecord]:
        return self.series[name]

    def add(self, record: NarrativeRecord) -> None:
        bucket = self.series.setdefault(record.series, [])
        bucket.append(record)

    @classmethod
    def from_records(cls, alphabet: Alphabet, records: Iterable[NarrativeRecord]) -> "SeriesCorpus":
        corpus = cls(alphabet)
        for rec in records:
            corpus.add(rec)
        return corpus


def _make_record(row: dict, alphabet: Alphabet, where: str) -> NarrativeRecord:
    for key in ("id", "series", "sequence"):
        if key not in row or row[key] is None:
            raise ValidationError(f"{where}: missing field {key!r}")
    rid = str(row["id"])
    codes = str(row["sequence"])
    for pos, ch in enumerate(codes):
        if ch not in alphabet:
            raise ValidationError(f"{where}: record {rid!r} has invalid code {ch!r} at position {pos}")
    return NarrativeRecord(rid, str(row["series"]), SymbolSequence(alphabet.name, codes), row.get("text") or None)


def _iter_rows(path: Path):
    if path.suffix.lower() == ".csv":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            # header is line 1
            for lineno, row in enumerate(reader, start=2):
                if None in row:
                    raise ValidationError(f"{path}:{lineno}: malformed CSV row (too many fields)")
                yield lineno, row
        return
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: malformed line ({exc.msg})") from exc
            if not isinstance(row, dict):
                raise ValidationError(f"{path}:{lineno}: malformed line (expected an object)")
            yield lineno, row


def load_sequences(path: str | Path, alphabet: Alphabet) -> SeriesCorpus:
    """Load a JSONL (one object per line) or CSV sequence file.

    Required fields are ``id``, ``series`` and ``sequence``; ``text`` is
    optional. Record order within each series follows file order.
    """
    path = Path(path)
    corpus = SeriesCorpus(alphabet)
    seen: set[tuple[str, str]] = set()
    for lineno, row in _iter_rows(path):
        rec = _make_record(row, alphabet, f"{path}:{lineno}")
        key = (rec.series, rec.id)
        if key in seen:
            raise ValidationError(f"{path}:{lineno}: duplicate id {rec.id!r} in series {rec.series!r}")
        seen.add(key)
        corpus.add(rec)
    return corpus


def save_sequences(records: Iterable[NarrativeRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            row = {"id": rec.id, "series": rec.series, "sequence": rec.codes}
            if rec.text is not None:
                row["text"] = rec.text
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def build_norm(corpus: SeriesCorpus, per_series: int, seed: int) -> list[NarrativeRecord]:
    """Sample ``per_series`` records from every series into a ``norm`` series.

    Series are visited in sorted name order and sampled indices are emitted in
    file order, so the result depends only on (corpus, per_series, seed).
    Sampled ids are prefixed with their source series to stay unique.
    """
    if per_series < 1:
        raise ValueError("per_series must be >= 1")
    if len(corpus) == 0:
        raise ValidationError("cannot build a norm from an empty corpus")
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for name in sorted(corpus.series):
        recs = corpus.series[name]
        if not recs:
            continue
        k = per_series
        if k > len(recs):
            log.warning("series %r has %d records, fewer than %d; taking all", name, len(recs), per_series)
            k = len(recs)
        picked = sorted(rng.choice(len(recs), size=k, replace=False).tolist())
        for i in picked:
            rec = recs[i]
            out.append(NarrativeRecord(f"{name}:{rec.id}", NORM_SERIES, rec.sequence, rec.text))
    return out


@dataclass
class LengthSummary:
    count: int
    min: int
    max: int
    mean: float
    median: float
    histogram: dict[int, int]

    def as_row(self) -> dict:
        return {"count": self.count, "min": self.min, "max": self.max,
                "mean": self.mean, "median": self.median}


def _summarize(lengths: list[int]) -> LengthSummary:
    return LengthSummary(
        count=len(lengths),
        min=min(lengths),
        max=max(lengths),
        mean=statistics.fmean(lengths),
        median=float(statistics.median(lengths)),
        histogram=dict(sorted(Counter(lengths).items())),
    )


def length_stats(corpus: SeriesCorpus) -> dict[str, LengthSummary]:
    """Per-series sequence-length summaries plus a pooled ``"*"`` entry."""
    out: dict[str, LengthSummary] = {}
    pooled: list[int] = []
    for name, recs in corpus.series.items():
        if not recs:
            log.warning("series %r is empty; excluded from length summary", name)
            continue
        lengths = [len(r.sequence) for r in recs]
        pooled.extend(lengths)
        out[name] = _summarize(lengths)
    if pooled:
        out["*"] = _summarize(pooled)
    return out
