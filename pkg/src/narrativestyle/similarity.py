"""Pairwise similarity and distance between sequences via substring profiles.

Cosine is computed from exact integer dot products, so a matrix entry is
bit-identical to the corresponding pairwise call. Pairwise calls use the union
vocabulary of the two profiles; matrices use one global sorted vocabulary.

Distance zero means identical profiles, not identical sequences: with
``max_len=1`` the sequences "am" and "ma" are at distance 0.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .patterns import SubstringProfile, frequency_matrix, profile_many, substrings, vocabulary

SQRT2 = math.sqrt(2.0)
METRICS = ("cosine", "euclidean", "jaccard")


def _profile(seq, min_len: int, max_len: int) -> SubstringProfile:
    return seq if isinstance(seq, SubstringProfile) else substrings(seq, min_len, max_len)


def _cosine_from_ints(dot: int, n1: int, n2: int) -> float:
    if n1 == 0 and n2 == 0:
        return 1.0
    if n1 == 0 or n2 == 0:
        return 0.0
    # clip guards the last ulp; counts are nonnegative so cos >= 0
    return min(1.0, float(dot) / (math.sqrt(float(n1)) * math.sqrt(float(n2))))


def cosine_similarity(s1, s2, min_len: int = 1, max_len: int = 3) -> float:
    """Cosine of the angle between overlapping-substring count vectors.

    Both empty gives 1, exactly one empty gives 0.

    >>> round(cosine_similarity("amvma", "amma", 1, 2), 3)
    0.836
    """
    p1, p2 = _profile(s1, min_len, max_len), _profile(s2, min_len, max_len)
    x, y = p1.counts, p2.counts
    dot = sum(n * y[k] for k, n in x.items() if k in y)
    return _cosine_from_ints(dot, sum(n * n for n in x.values()), sum(n * n for n in y.values()))


def jaccard_similarity(s1, s2, min_len: int = 1, max_len: int = 3) -> float:
    a = set(_profile(s1, min_len, max_len).counts)
    b = set(_profile(s2, min_len, max_len).counts)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def euclidean_distance(s1, s2, min_len: int = 1, max_len: int = 3, normalize: bool = False) -> float:
    """L2 distance between count vectors.

    With ``normalize`` each vector is scaled to unit length first, which makes
    the squared distance equal ``2 * (1 - cosine)``. An empty sequence maps to
    the zero vector; against a nonempty one the normalized distance is taken
    as sqrt(2), matching cosine 0.
    """
    x = _profile(s1, min_len, max_len).counts
    y = _profile(s2, min_len, max_len).counts
    keys = sorted(set(x) | set(y))
    if not normalize:
        return math.sqrt(sum((x.get(k, 0) - y.get(k, 0)) ** 2 for k in keys))
    nx = math.sqrt(sum(v * v for v in x.values()))
    ny = math.sqrt(sum(v * v for v in y.values()))
    if nx == 0 or ny == 0:
        return 0.0 if nx == ny else SQRT2
    return math.sqrt(sum((x.get(k, 0) / nx - y.get(k, 0) / ny) ** 2 for k in keys))


@dataclass
class DistanceMatrix:
    ids: list[str]
    values: np.ndarray
    metric: str = "cosine"

    def __post_init__(self):
        self._index = {k: i for i, k in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def index(self, rid: str) -> int:
        return self._index[rid]

    def get(self, a: str, b: str) -> float:
        return float(self.values[self._index[a], self._index[b]])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([""] + list(self.ids))
            for rid, row in zip(self.ids, self.values):
                writer.writerow([rid] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, metric: str = "cosine") -> "DistanceMatrix":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        ids = rows[0][1:]
        values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
        return cls(ids, values, metric)


def unit_rows(counts: np.ndarray) -> np.ndarray:
    """L2-normalize each row; all-zero rows stay zero."""
    norms = np.sqrt((counts.astype(np.float64) ** 2).sum(axis=1))
    out = np.zeros(counts.shape, dtype=np.float64)
    nz = norms > 0
    out[nz] = counts[nz] / norms[nz, None]
    return out


def _ids(records) -> list[str]:
    return [getattr(r, "id", None) or getattr(r, "sequence_id", None) or str(i) for i, r in enumerate(records)]


def distance_matrix(records: Sequence, metric: str = "cosine", min_len: int = 1, max_len: int = 3,
                    workers: int = 1) -> DistanceMatrix:
    """Symmetric distance matrix over ``records``.

    ``cosine`` gives 1 - cos, ``euclidean`` the distance between unit-length
    count vectors (the geometry Ward clustering runs on), ``jaccard`` gives
    1 - Jaccard similarity of presence sets. All lie in [0, 2].
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
    if len(records) < 1:
        raise ValueError("distance_matrix needs at least one record")
    profiles = profile_many(records, min_len, max_len, workers)
    vocab = vocabulary(profiles)
    counts = frequency_matrix(profiles, vocab)
    n = len(profiles)
    if metric == "cosine":
        gram = counts @ counts.T
        diag = np.diag(gram)
        vals = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                vals[i, j] = vals[j, i] = 1.0 - _cosine_from_ints(int(gram[i, j]), int(diag[i]), int(diag[j]))
    elif metric == "jaccard":
        pres = (counts > 0).astype(np.int64)
        inter = pres @ pres.T
        sizes = np.diag(inter)
        vals = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                union = int(sizes[i] + sizes[j] - inter[i, j])
                vals[i, j] = vals[j, i] = 0.0 if union == 0 else 1.0 - int(inter[i, j]) / union
    else:
        unit = unit_rows(counts)
        empty = ~unit.any(axis=1)
        vals = np.zeros((n, n))
        for i in range(n - 1):
            diff = unit[i + 1:] - unit[i]
            row = np.sqrt((diff * diff).sum(axis=1))
            row[empty[i + 1:] != empty[i]] = SQRT2
            vals[i, i + 1:] = row
            vals[i + 1:, i] = row
    return DistanceMatrix(_ids(records), vals, metric)
