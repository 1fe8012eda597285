import json

import pytest

from narrativestyle.clustering import cut, hac_ward
from narrativestyle.patterns import ContingencyTable
from narrativestyle.report import (RunManifest, file_digest, odds_chart_rows, pattern_label, render_dendrogram,
                                   render_length_histogram, render_odds_chart, render_silhouette_scores, write_rows)
from narrativestyle.corpus import length_stats, SeriesCorpus
from narrativestyle.stats import TestResult


def result(pattern, odds, sig=True):
    return TestResult(pattern, len(pattern), ContingencyTable(5, 5, 5, 5), odds, False, 0.01, 0.02, sig)


def test_pattern_label(alphabet):
    assert pattern_label("vv", alphabet) == "verbal.verbal"
    assert pattern_label("vx", alphabet) == "vx"
    assert pattern_label("vv", None) == "vv"


def test_odds_chart_is_deterministic(tmp_path, alphabet):
    rows = [result("v", 1.4), result("m", 0.6), result("vv", 2.0)]
    a = render_odds_chart(rows, tmp_path / "a.svg", "x vs y", alphabet)
    b = render_odds_chart(list(reversed(rows)), tmp_path / "b.svg", "x vs y", alphabet)
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text()
    assert text.startswith("<?xml") and "<svg" in text


def test_odds_chart_rows(alphabet):
    rows = odds_chart_rows([result("vv", 2.0)], alphabet)
    assert rows == [{"pattern": "vv", "label": "verbal.verbal", "size": 2, "odds_ratio": "2.0", "p_adjusted": "0.02"}]


def test_empty_chart_renders(tmp_path):
    path = render_odds_chart([], tmp_path / "e.svg")
    assert path.stat().st_size > 0
    png = render_odds_chart([], tmp_path / "e.png")
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_dendrogram_and_other_figures(tmp_path, records_factory, alphabet):
    recs = records_factory(["amv", "sss", "ssa", "vva"])
    dend = hac_ward(recs)
    p1 = render_dendrogram(dend, tmp_path / "d1.svg", cut(dend, 2), "t")
    p2 = render_dendrogram(dend, tmp_path / "d2.svg", cut(dend, 2), "t")
    assert p1.read_bytes() == p2.read_bytes()
    render_silhouette_scores({2: 0.5, 3: 0.4}, tmp_path / "s.svg", 2)
    render_length_histogram(length_stats(SeriesCorpus.from_records(alphabet, recs)), tmp_path / "h.svg")
    assert (tmp_path / "h.svg").exists()


def test_manifest(tmp_path):
    src = tmp_path / "in.txt"
    src.write_bytes(b"abc")
    m = RunManifest.for_inputs("mine", {"sizes": [1, 2]}, [src, None])
    m.outputs += ["b.csv", "a.csv", "a.csv"]
    data = json.loads(m.write(tmp_path).read_text())
    assert data["inputs"] == {str(src): "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"}
    assert data["outputs"] == ["a.csv", "b.csv"]
    assert file_digest(src) == data["inputs"][str(src)]


def test_write_rows_empty(tmp_path):
    write_rows([], tmp_path / "x.csv", ["a", "b"])
    assert (tmp_path / "x.csv").read_text() == "a,b\n"
