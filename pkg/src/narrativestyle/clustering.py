"""Ward agglomerative clustering of sequences, cut selection and representatives.

Count vectors are scaled to unit length before Ward runs on Euclidean
distance, so the squared distance between two sequences is ``2 * (1 - cos)``.
This is how "Ward linkage with cosine similarity" is made well defined.

Tie rule (shared with the test oracle): each cluster is keyed by its smallest
leaf index; among pairs whose squared Ward distance is within
``TIE_TOL * max(1, minimum)`` of the minimum, the lexicographically smallest
key pair merges first.
"""
from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .patterns import frequency_matrix, profile_many, vocabulary
from .similarity import DistanceMatrix, _ids, unit_rows

TIE_TOL = 1e-9


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass
class Dendrogram:
    """Merge history. Leaves are nodes ``0..n-1``; merge ``t`` creates node ``n + t``."""

    ids: list[str]
    merges: list[Merge]

    @property
    def n(self) -> int:
        return len(self.ids)

    def heights(self) -> list[float]:
        return [m.height for m in self.merges]

    def linkage_matrix(self) -> np.ndarray:
        return np.array([[m.left, m.right, m.height, m.size] for m in self.merges], dtype=float).reshape(-1, 4)

    def write_merges(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# leaves {self.n}\n")
            for i, rid in enumerate(self.ids):
                fh.write(f"leaf\t{i}\t{rid}\n")
            for t, m in enumerate(self.merges):
                fh.write(f"merge\t{self.n + t}\t{m.left}\t{m.right}\t{m.height!r}\t{m.size}\n")

    def to_dot(self) -> str:
        lines = ["graph dendrogram {", "  node [shape=box, fontsize=10];"]
        for i, rid in enumerate(self.ids):
            lines.append(f'  n{i} [label="{rid}"];')
        for t, m in enumerate(self.merges):
            node = self.n + t
            lines.append(f'  n{node} [shape=point, xlabel="{m.height:.4f}"];')
            lines.append(f"  n{node} -- n{m.left};")
            lines.append(f"  n{node} -- n{m.right};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def ward_linkage(points: np.ndarray, ids: Sequence[str] | None = None) -> Dendrogram:
    """Ward clustering of the rows of ``points`` (Lance-Williams updates)."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n < 2:
        raise ValueError("clustering needs at least 2 records")
    ids = list(ids) if ids is not None else [str(i) for i in range(n)]
    full = np.empty((n, n))
    for i in range(n):
        diff = points - points[i]
        full[i] = (diff * diff).sum(axis=1)
    np.fill_diagonal(full, np.inf)
    # candidates are read from the strict upper triangle only
    upper = full.copy()
    upper[np.tril_indices(n)] = np.inf

    size = np.ones(n, dtype=np.int64)
    node = list(range(n))
    active = np.ones(n, dtype=bool)
    merges = []
    for step in range(n - 1):
        dmin = upper.min()
        flat = int(np.flatnonzero(upper <= dmin + TIE_TOL * max(1.0, dmin))[0])
        i, j = divmod(flat, n)
        ni, nj = size[i], size[j]
        merges.append(Merge(node[i], node[j], float(np.sqrt(max(dmin, 0.0))), int(ni + nj)))
        dij = full[i, j]
        others = np.flatnonzero(active)
        others = others[(others != i) & (others != j)]
        nk = size[others]
        new = ((nk + ni) * full[others, i] + (nk + nj) * full[others, j] - nk * dij) / (nk + ni + nj)
        active[j] = False
        full[others, i] = full[i, others] = new
        full[j, :] = full[:, j] = np.inf
        size[i] = ni + nj
        node[i] = n + step
        lo = others[others < i]
        hi = others[others > i]
        upper[lo, i] = full[lo, i]
        upper[i, hi] = full[i, hi]
        upper[j, :] = np.inf
        upper[:, j] = np.inf
    return Dendrogram(ids, merges)


def unit_vectors(records: Sequence, min_len: int = 1, max_len: int = 3) -> np.ndarray:
    profiles = profile_many(records, min_len, max_len)
    return unit_rows(frequency_matrix(profiles, vocabulary(profiles)))


def hac_ward(records: Sequence, min_len: int = 1, max_len: int = 3) -> Dendrogram:
    if len(records) < 2:
        raise ValueError("clustering needs at least 2 records")
    return ward_linkage(unit_vectors(records, min_len, max_len), _ids(records))


@dataclass
class ClusterCut:
    k: int
    assignment: dict[str, int]
    members: list[list[str]]

    @property
    def sizes(self) -> list[int]:
        return [len(m) for m in self.members]


def cut(dendrogram: Dendrogram, k: int) -> ClusterCut:
    """Flat clustering with ``k`` clusters: replay the first ``n - k`` merges.

    Cluster labels follow the smallest leaf index each cluster contains.
    """
    n = dendrogram.n
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t, m in enumerate(dendrogram.merges[: n - k]):
        parent[find(m.left)] = n + t
        parent[find(m.right)] = n + t
    groups: dict[int, list[int]] = {}
    for leaf in range(n):
        groups.setdefault(find(leaf), []).append(leaf)
    ordered = sorted(groups.values(), key=lambda g: g[0])
    members = [[dendrogram.ids[i] for i in g] for g in ordered]
    assignment = {rid: label for label, grp in enumerate(members) for rid in grp}
    return ClusterCut(k, assignment, members)


def silhouette_samples(cut_: ClusterCut, dmatrix: DistanceMatrix) -> dict[str, float]:
    """Per-sequence silhouette; singletons and a(i) = b(i) = 0 give 0."""
    if cut_.k < 2:
        raise ValueError("silhouette needs at least 2 clusters")
    idx = [[dmatrix.index(r) for r in grp] for grp in cut_.members]
    vals = dmatrix.values
    out = {}
    for label, grp in enumerate(idx):
        for i in grp:
            if len(grp) == 1:
                out[dmatrix.ids[i]] = 0.0
                continue
            a = vals[i, grp].sum() / (len(grp) - 1)
            b = min(vals[i, other].mean() for lab, other in enumerate(idx) if lab != label)
            denom = max(a, b)
            out[dmatrix.ids[i]] = 0.0 if denom == 0 else float((b - a) / denom)
    return out


@dataclass
class SilhouetteResult:
    mean: float
    per_cluster: list[float]
    samples: dict[str, float] = field(repr=False)


def silhouette_detail(cut_: ClusterCut, dmatrix: DistanceMatrix) -> SilhouetteResult:
    samples = silhouette_samples(cut_, dmatrix)
    per_cluster = [float(np.mean([samples[r] for r in grp])) for grp in cut_.members]
    return SilhouetteResult(float(np.mean(list(samples.values()))), per_cluster, samples)


def silhouette(cut_: ClusterCut, dmatrix: DistanceMatrix) -> float:
    return silhouette_detail(cut_, dmatrix).mean


def choose_cut(dendrogram: Dendrogram, dmatrix: DistanceMatrix, k_max: int = 10) -> tuple[int, dict[int, float]]:
    """k in [2, k_max] maximizing mean silhouette; ties go to the smallest k."""
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    if k_max > dendrogram.n:
        raise ValueError(f"k_max ({k_max}) exceeds the number of sequences ({dendrogram.n})")
    scores = {k: silhouette(cut(dendrogram, k), dmatrix) for k in range(2, k_max + 1)}
    best = max(scores, key=lambda k: (scores[k], -k))
    return best, scores


def select_by_coverage(cut_: ClusterCut, threshold: float = 0.8) -> list[int]:
    """Largest clusters first, the fewest covering ``threshold`` of all sequences."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    n = sum(cut_.sizes)
    order = sorted(range(cut_.k), key=lambda lab: (-cut_.sizes[lab], lab))
    chosen, covered = [], 0
    for lab in order:
        chosen.append(lab)
        covered += cut_.sizes[lab]
        if covered >= threshold * n:
            break
    return chosen


@dataclass
class Representative:
    cluster: int
    id: str
    sequence: str
    cluster_size: int
    mean_distance: float
    symbol_counts: dict[str, int]


def representative(members: Sequence, dmatrix: DistanceMatrix, cluster: int = 0) -> Representative:
    """Medoid: the member with the smallest mean distance to the other members."""
    if not members:
        raise ValueError("cluster is empty")
    idx = [dmatrix.index(r.id) for r in members]
    sub = dmatrix.values[np.ix_(idx, idx)]
    means = sub.sum(axis=1) / max(len(idx) - 1, 1)
    best = min(range(len(members)), key=lambda p: (means[p], members[p].id))
    rec = members[best]
    counts = dict(sorted(Counter(rec.codes).items()))
    return Representative(cluster, rec.id, rec.codes, len(members), float(means[best]), counts)


@dataclass
class ClusterReport:
    dendrogram: Dendrogram
    cut: ClusterCut
    scores: dict[int, float]
    silhouette: SilhouetteResult
    selected: list[int]
    representatives: list[Representative]
    metric: str


def cluster_records(records: Sequence, min_len: int = 1, max_len: int = 3, k: int | None = None,
                    k_max: int = 10, coverage: float = 0.8, metric: str = "euclidean") -> ClusterReport:
    """Full pipeline: Ward dendrogram, cut (given or silhouette-chosen), coverage, medoids.

    ``metric`` is the distance used for silhouette and medoids; the default
    is the unit-vector Euclidean distance Ward itself optimizes.
    """
    from .similarity import distance_matrix

    dend = hac_ward(records, min_len, max_len)
    dm = distance_matrix(records, metric, min_len, max_len)
    if k is None:
        k, scores = choose_cut(dend, dm, min(k_max, len(records)))
    else:
        scores = {k: silhouette(cut(dend, k), dm)} if k >= 2 else {}
    flat = cut(dend, k)
    sil = silhouette_detail(flat, dm) if k >= 2 else SilhouetteResult(0.0, [0.0], {})
    chosen = select_by_coverage(flat, coverage)
    by_id = {r.id: r for r in records}
    reps = [representative([by_id[m] for m in flat.members[lab]], dm, lab) for lab in chosen]
    return ClusterReport(dend, flat, scores, sil, chosen, reps, metric)


def write_assignments(report: ClusterReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "cluster", "silhouette"])
        for rid, lab in report.cut.assignment.items():
            writer.writerow([rid, lab, repr(report.silhouette.samples.get(rid, 0.0))])


def write_representatives(report: ClusterReport, path, alphabet_codes: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["cluster", "cluster_size", "representative_id", "sequence", "mean_distance"]
                        + [f"count_{c}" for c in alphabet_codes])
        for rep in report.representatives:
            writer.writerow([rep.cluster, rep.cluster_size, rep.id, rep.sequence, repr(rep.mean_distance)]
                            + [rep.symbol_counts.get(c, 0) for c in alphabet_codes])
