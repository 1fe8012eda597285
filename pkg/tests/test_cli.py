import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from narrativestyle.cli import main

from conftest import FIXTURES
from stub_model import StubServer

GOLD_CACHE = FIXTURES / "gold_cache"


def snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(Path(directory).iterdir()) if p.is_file()}


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def dark_room_annotations(tmp_path):
    from narrativestyle.annotator import gold_fixture_path
    lines = [line for line in gold_fixture_path().read_text().splitlines() if '"dark_room"' in line]
    path = tmp_path / "dark_room.jsonl"
    path.write_text("\n".join(lines) + "\n")
    return path


def test_encode_dark_room(tmp_path, dark_room_annotations):
    assert main(["encode", "--annotations", str(dark_room_annotations), "--out", str(tmp_path / "o")]) == 0
    row = json.loads((tmp_path / "o" / "sequences.jsonl").read_text())
    assert row == {"id": "dark_room", "series": "default", "sequence": "amv"}
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["command"] == "encode" and str(dark_room_annotations) in manifest["inputs"]


def test_mine(tmp_path, two_series_file):
    out = tmp_path / "m"
    assert main(["mine", "--input", str(two_series_file), "--sizes", "1-3", "--out", str(out)]) == 0
    distinct = read_csv(out / "distinct_substrings.csv")
    assert {(r["series"], r["size"]) for r in distinct} == {(s, str(k)) for s in ("act", "talk") for k in (1, 2, 3)}
    assert all(int(r["count"]) <= 4 ** int(r["size"]) for r in distinct)
    assert (out / "length_histogram.svg").exists()
    assert "length_histogram.svg" in json.loads((out / "manifest.json").read_text())["outputs"]


def test_compare_and_report(tmp_path, two_series_file):
    out = tmp_path / "c"
    argv = ["compare", "--a", str(two_series_file), "--series-a", "talk", "--b", str(two_series_file),
            "--series-b", "act", "--sizes", "1,2", "--out", str(out)]
    assert main(argv) == 0
    rows = read_csv(out / "compare.csv")
    verbal = next(r for r in rows if r["pattern"] == "v")
    assert float(verbal["odds_ratio"]) > 1 and verbal["significant"] == "1"
    assert (out / "odds_size1.svg").exists() and (out / "odds_size2.csv").exists()
    first = snapshot(out)
    assert main(argv) == 0
    assert snapshot(out) == first
    assert main(["report", "--compare", str(out / "compare.csv"), "--out", str(tmp_path / "r")]) == 0
    assert (tmp_path / "r" / "odds_size1.svg").exists()


def test_compare_empty_significant_set(tmp_path, two_series_file):
    out = tmp_path / "same"
    argv = ["compare", "--a", str(two_series_file), "--series-a", "act", "--b", str(two_series_file),
            "--series-b", "act", "--sizes", "1", "--significant-only", "--out", str(out)]
    assert main(argv) == 0
    assert read_csv(out / "compare.csv") == []
    assert (out / "odds_size1.svg").stat().st_size > 0


def test_compare_requires_series_choice(tmp_path, two_series_file, capsys):
    assert main(["compare", "--a", str(two_series_file), "--b", str(two_series_file), "--out", str(tmp_path)]) == 1
    assert "several" in capsys.readouterr().err


def test_cluster(tmp_path, two_series_file):
    out = tmp_path / "k"
    argv = ["cluster", "--input", str(two_series_file), "--series", "act", "--max-len", "3", "--cut", "auto", "--k-max", "6",
            "--out", str(out)]
    assert main(argv) == 0
    assignments = read_csv(out / "assignments.csv")
    assert len(assignments) == 40
    reps = read_csv(out / "representatives.csv")
    assert reps and all(int(r["count_a"]) + int(r["count_m"]) + int(r["count_v"]) + int(r["count_s"])
                        == len(r["sequence"]) for r in reps)
    assert (out / "dendrogram.dot").read_text().count("shape=point") == 39
    first = snapshot(out)
    assert main(argv) == 0
    assert snapshot(out) == first
    assert main(argv[:-2] + ["--cut", "3", "--no-figures", "--out", str(tmp_path / "k3")]) == 0
    assert not (tmp_path / "k3" / "dendrogram.svg").exists()


def test_complexity(tmp_path, two_series_file):
    assert main(["complexity", "--input", str(two_series_file), "--out", str(tmp_path)]) == 0
    assert [r["series"] for r in read_csv(tmp_path / "complexity_summary.csv")] == ["act", "talk"]
    assert len(read_csv(tmp_path / "complexity.csv")) == 80


def test_norm_is_seeded(tmp_path, two_series_file):
    runs = []
    for name, seed in (("n1", 3), ("n2", 3), ("n3", 4)):
        assert main(["norm", "--input", str(two_series_file), "--per-series", "5", "--seed", str(seed),
                     "--out", str(tmp_path / name)]) == 0
        runs.append((tmp_path / name / "norm.jsonl").read_bytes())
    assert runs[0] == runs[1] != runs[2]
    assert len(runs[0].splitlines()) == 10
    assert main(["norm", "--input", str(two_series_file), "--out", str(tmp_path / "x")]) == 1


def test_validate_offline_from_recorded_cache(tmp_path, capsys):
    assert main(["validate", "--cache", str(GOLD_CACHE), "--offline", "--out", str(tmp_path)]) == 0
    rows = {r["metric"]: float(r["value"]) for r in read_csv(tmp_path / "validation.csv")}
    assert rows["process_accuracy"] == 1.0 and rows["n_clauses"] == 30


def test_validate_offline_cache_miss_exits_2(tmp_path):
    assert main(["validate", "--cache", str(tmp_path / "empty"), "--offline", "--out", str(tmp_path / "o")]) == 2


def endpoint_ini(tmp_path, base_url, **extra):
    body = "".join(f"{k} = {v}\n" for k, v in {"base_url": base_url, "backoff": 0, **extra}.items())
    path = tmp_path / "endpoint.ini"
    path.write_text("[endpoint]\n" + body)
    return path


def narratives_file(tmp_path):
    path = tmp_path / "narratives.jsonl"
    rows = [{"id": "dark_room", "series": "dreamer",
             "text": "I wake in a dark room. I feel a cold wind. I tell myself to move."},
            {"id": "pool", "text": "There was a swimming pool. John is an interesting teacher."}]
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path


def test_annotate_against_live_stub(tmp_path):
    src = narratives_file(tmp_path)
    with StubServer() as server:
        ini = endpoint_ini(tmp_path, server.base_url)
        assert main(["--config", str(ini), "annotate", "--input", str(src), "--cache", str(tmp_path / "cache"),
                     "--out", str(tmp_path / "a")]) == 0
    seqs = {json.loads(line)["id"]: json.loads(line) for line in (tmp_path / "a" / "sequences.jsonl").open()}
    assert seqs["dark_room"]["sequence"] == "amv" and seqs["dark_room"]["series"] == "dreamer"
    assert seqs["pool"]["sequence"] == "ss" and seqs["pool"]["series"] == "default"
    # replay without a server
    assert main(["--config", str(ini), "annotate", "--input", str(src), "--cache", str(tmp_path / "cache"),
                 "--offline", "--out", str(tmp_path / "b")]) == 0
    for name in ("annotations.jsonl", "sequences.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_annotate_unreachable_exits_2(tmp_path):
    ini = endpoint_ini(tmp_path, "http://127.0.0.1:9/v1", retries=0, timeout=2)
    src = narratives_file(tmp_path)
    assert main(["--config", str(ini), "annotate", "--input", str(src), "--out", str(tmp_path / "o")]) == 2
    assert (tmp_path / "o" / "annotations.partial.jsonl").exists()


@pytest.mark.parametrize("argv", [
    ["mine", "--bogus"],
    ["cluster"],
    ["compare", "--a", "x", "--b", "y", "--alpha", "1.5", "--out", "o"],
    ["cluster", "--input", "x", "--cut", "zero", "--out", "o"],
    [],
])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert "usage" in capsys.readouterr().err


def test_missing_input_exits_1(tmp_path, capsys):
    assert main(["mine", "--input", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path)]) == 1
    assert "input error" in capsys.readouterr().err


def test_config_defaults(tmp_path, two_series_file):
    ini = tmp_path / "defaults.ini"
    ini.write_text("[defaults]\nmax_len = 2\nk_max = 4\nno_figures = yes\nseed = 11\n")
    assert main(["--config", str(ini), "cluster", "--input", str(two_series_file), "--series", "talk",
                 "--out", str(tmp_path / "c")]) == 0
    params = json.loads((tmp_path / "c" / "manifest.json").read_text())["parameters"]
    assert (params["max_len"], params["k_max"], params["no_figures"]) == (2, 4, True)
    # a required flag can come from the config file
    assert main(["--config", str(ini), "norm", "--input", str(two_series_file), "--out", str(tmp_path / "n")]) == 0
    assert json.loads((tmp_path / "n" / "manifest.json").read_text())["parameters"]["seed"] == 11


def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "narrativestyle.cli", "compare", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for flag in ("--sizes", "--alpha", "--pool-sizes", "--significant-only"):
        assert flag in proc.stdout
