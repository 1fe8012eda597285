"""Run manifests and figure rendering for command outputs.

Figures are drawn with matplotlib's Agg backend. SVG ids are salted with a
fixed string and date metadata is dropped, so reruns are byte-identical.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import __version__  # noqa: E402
from .alphabet import Alphabet  # noqa: E402

plt.rcParams.update({
    "svg.hashsalt": "narrativestyle",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
})

BAR_COLOR_UP = "#d95f02"
BAR_COLOR_DOWN = "#1b9e77"
CLUSTER_COLORS = ["#ff7f0e", "#2ca02c", "#1f77b4", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    parameters: dict
    inputs: dict = field(default_factory=dict)
    tool_version: str = __version__
    outputs: list = field(default_factory=list)

    @classmethod
    def for_inputs(cls, command: str, parameters: dict, paths: Sequence) -> "RunManifest":
        inputs = {str(p): file_digest(p) for p in paths if p is not None}
        return cls(command, parameters, inputs)

    def write(self, directory) -> Path:
        path = Path(directory) / "manifest.json"
        self.outputs = sorted(set(self.outputs))
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
        return path


def pattern_label(pattern: str, alphabet: Alphabet | None) -> str:
    """``"vv"`` -> ``"verbal.verbal"`` when the alphabet is known."""
    if alphabet is None or any(ch not in alphabet for ch in pattern):
        return pattern
    return ".".join(alphabet.label_of(ch) for ch in pattern)


def _save(fig, path) -> Path:
    path = Path(path)
    fmt = path.suffix.lstrip(".").lower() or "svg"
    metadata = {"Date": None, "Creator": None} if fmt == "svg" else {"Software": None}
    fig.savefig(path, format=fmt, metadata=metadata, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return path


def odds_chart_rows(results, alphabet: Alphabet | None = None) -> list[dict]:
    return [{"pattern": r.pattern, "label": pattern_label(r.pattern, alphabet), "size": r.size,
             "odds_ratio": repr(r.odds_ratio), "p_adjusted": repr(r.p_adjusted)} for r in results]


def render_odds_chart(results, path, title: str = "", alphabet: Alphabet | None = None,
                      top: int | None = 20) -> Path:
    """Horizontal bars of odds ratios, largest first, on a log axis centred at 1."""
    rows = sorted(results, key=lambda r: (-r.odds_ratio, r.pattern))
    if top is not None and len(rows) > top:
        # keep both tails: strongest over- and under-represented patterns
        half = top // 2
        rows = rows[:top - half] + rows[-half:]
    fig, ax = plt.subplots(figsize=(6.0, 0.9 + 0.28 * max(len(rows), 3)))
    if not rows:
        ax.text(0.5, 0.5, "no significant substrings", ha="center", va="center", transform=ax.transAxes)
        ax.set_xticks([])
        ax.set_yticks([])
    else:
        labels = [pattern_label(r.pattern, alphabet) for r in rows]
        values = [r.odds_ratio for r in rows]
        colors = [BAR_COLOR_UP if v >= 1 else BAR_COLOR_DOWN for v in values]
        ypos = list(range(len(rows)))[::-1]
        ax.barh(ypos, [v - 1 for v in values], left=1, color=colors, height=0.7)
        ax.set_xscale("log")
        ax.axvline(1.0, color="black", linewidth=0.8)
        ax.set_yticks(ypos)
        ax.set_yticklabels(labels)
        ax.set_xlabel("odds ratio")
        for y, v in zip(ypos, values):
            ax.text(v, y, f" {v:.2f}", va="center", ha="left" if v >= 1 else "right", fontsize=7)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def _leaf_order(dendrogram) -> list[int]:
    n = dendrogram.n
    if n == 1:
        return [0]
    order, stack = [], [2 * n - 2]
    while stack:
        node = stack.pop()
        if node < n:
            order.append(node)
        else:
            m = dendrogram.merges[node - n]
            stack.extend([m.right, m.left])
    return order


def render_dendrogram(dendrogram, path, cut=None, title: str = "", show_labels: bool | None = None) -> Path:
    """Tree drawn with plain line segments; links inside a cut cluster share its colour."""
    n = dendrogram.n
    order = _leaf_order(dendrogram)
    xpos = {leaf: float(i) for i, leaf in enumerate(order)}
    ypos = {leaf: 0.0 for leaf in range(n)}
    leaves_of = {leaf: {leaf} for leaf in range(n)}
    color_of_leaf = {}
    if cut is not None:
        index = {rid: i for i, rid in enumerate(dendrogram.ids)}
        for rid, lab in cut.assignment.items():
            color_of_leaf[index[rid]] = CLUSTER_COLORS[lab % len(CLUSTER_COLORS)]
    fig, ax = plt.subplots(figsize=(min(2.0 + 0.12 * n, 16.0), 4.0))
    for t, m in enumerate(dendrogram.merges):
        node = n + t
        leaves_of[node] = leaves_of[m.left] | leaves_of[m.right]
        xpos[node] = (xpos[m.left] + xpos[m.right]) / 2
        ypos[node] = m.height
        colors = {color_of_leaf.get(x, "#555555") for x in leaves_of[node]}
        color = colors.pop() if len(colors) == 1 else "#555555"
        xl, xr = xpos[m.left], xpos[m.right]
        ax.plot([xl, xl, xr, xr], [ypos[m.left], m.height, m.height, ypos[m.right]], color=color, linewidth=0.8)
    if show_labels is None:
        show_labels = n <= 60
    ax.set_xlim(-1, n)
    if show_labels:
        ax.set_xticks(range(n))
        ax.set_xticklabels([dendrogram.ids[leaf] for leaf in order], rotation=90, fontsize=6)
    else:
        ax.set_xticks([])
    ax.set_ylabel("Ward distance")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def render_length_histogram(summaries: dict, path, title: str = "Sequence length by series") -> Path:
    names = [k for k in summaries if k != "*"]
    fig, axes = plt.subplots(len(names), 1, figsize=(6.0, 1.6 * max(len(names), 1) + 0.6), squeeze=False)
    for ax, name in zip(axes[:, 0], names):
        hist = summaries[name].histogram
        ax.bar(list(hist), list(hist.values()), width=1.0, color="#4c72b0")
        ax.set_ylabel(name)
    axes[-1, 0].set_xlabel("sequence length (clauses)")
    fig.suptitle(title)
    return _save(fig, path)


def render_silhouette_scores(scores: dict, path, chosen: int | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 3.0))
    ks = sorted(scores)
    ax.plot(ks, [scores[k] for k in ks], marker="o", color="#4c72b0")
    if chosen is not None and chosen in scores:
        ax.plot([chosen], [scores[chosen]], marker="o", color=BAR_COLOR_UP, markersize=9)
    ax.set_xlabel("clusters (k)")
    ax.set_ylabel("mean silhouette")
    return _save(fig, path)


def write_rows(rows: Sequence[dict], path, columns: Sequence[str] | None = None) -> Path:
    columns = list(columns) if columns is not None else (list(rows[0]) if rows else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return Path(path)
