"""Command-line entry point: ``narrativestyle <command> [flags]``.

Exit status: 0 success, 1 input or usage error, 2 language-model endpoint error.
Every command writes ``manifest.json`` next to its outputs.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .alphabet import default_alphabet, load_alphabet
from .errors import EndpointError, ValidationError

log = logging.getLogger("narrativestyle")

EXIT_OK, EXIT_INPUT, EXIT_ENDPOINT = 0, 1, 2

# --metric value -> similarity.distance_matrix metric
CLUSTER_METRICS = {"cosine": "euclidean", "cosine-distance": "cosine", "jaccard": "jaccard"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _int_list(text: str) -> list[int]:
    """``"1,2,3"`` or ``"1-9"`` (or a mix) -> sorted unique ints."""
    out: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.update(range(int(lo), int(hi) + 1))
        elif part:
            out.add(int(part))
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError(f"expected positive sizes, got {text!r}")
    return sorted(out)


def _fraction(text: str) -> float:
    val = float(text)
    if not 0 < val <= 1:
        raise argparse.ArgumentTypeError("must be in (0, 1]")
    return val


def _alpha(text: str) -> float:
    val = float(text)
    if not 0 < val < 1:
        raise argparse.ArgumentTypeError("must be in (0, 1)")
    return val


def _cut(text: str):
    if text == "auto":
        return "auto"
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'auto' or a positive integer") from None
    if k < 1:
        raise argparse.ArgumentTypeError("k must be >= 1")
    return k


# ---------------------------------------------------------------- helpers

def _alphabet(args):
    return load_alphabet(args.alphabet) if args.alphabet else default_alphabet()


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _select(corpus, series: str | None, path) -> tuple[str, list]:
    if series is not None:
        if series not in corpus.series:
            raise ValidationError(f"{path}: no series {series!r} (found {sorted(corpus.series)})")
        return series, corpus.series[series]
    if len(corpus.series) == 1:
        name = next(iter(corpus.series))
        return name, corpus.series[name]
    raise ValidationError(f"{path} holds several series {sorted(corpus.series)}; pick one with --series")


def _params(args, *skip) -> dict:
    drop = {"func", "config", "verbose", *skip}
    return {k: v for k, v in sorted(vars(args).items()) if k not in drop}


def _figure_path(out: Path, stem: str, args) -> Path | None:
    if args.no_figures:
        return None
    return out / f"{stem}.{args.figure_format}"


# ---------------------------------------------------------------- commands

def cmd_encode(args) -> int:
    from .annotator.pipeline import group_by_narrative, load_annotations, sequence_from_annotations
    from .corpus import NarrativeRecord, save_sequences
    from .report import RunManifest

    alphabet = _alphabet(args)
    groups = group_by_narrative(load_annotations(args.annotations))
    records = [NarrativeRecord(nid, args.series, sequence_from_annotations(anns, alphabet))
               for nid, anns in groups.items()]
    out = _outdir(args)
    save_sequences(records, out / "sequences.jsonl")
    manifest = RunManifest.for_inputs("encode", _params(args), [args.annotations, args.alphabet])
    manifest.outputs.append("sequences.jsonl")
    manifest.write(out)
    print(f"encoded {len(records)} narratives into {out / 'sequences.jsonl'}")
    return EXIT_OK


def cmd_norm(args) -> int:
    from .corpus import RNG_NAME, build_norm, load_sequences, save_sequences
    from .report import RunManifest

    corpus = load_sequences(args.input, _alphabet(args))
    norm = build_norm(corpus, args.per_series, args.seed)
    out = _outdir(args)
    save_sequences(norm, out / "norm.jsonl")
    params = _params(args)
    params["rng"] = RNG_NAME
    manifest = RunManifest.for_inputs("norm", params, [args.input, args.alphabet])
    manifest.outputs.append("norm.jsonl")
    manifest.write(out)
    print(f"norm: {len(norm)} records from {len(corpus.series)} series (seed {args.seed})")
    return EXIT_OK


def cmd_mine(args) -> int:
    from .corpus import length_stats, load_sequences
    from .patterns import distinct_substrings, inventory_rows, write_inventory
    from .report import RunManifest, render_length_histogram, write_rows

    corpus = load_sequences(args.input, _alphabet(args))
    names = [args.series] if args.series else sorted(corpus.series)
    out = _outdir(args)
    manifest = RunManifest.for_inputs("mine", _params(args), [args.input, args.alphabet])
    inv, distinct = [], []
    for name in names:
        _, recs = _select(corpus, name, args.input)
        inv.extend(inventory_rows(name, recs, args.sizes))
        for size in args.sizes:
            count, _ = distinct_substrings(recs, size)
            distinct.append({"series": name, "size": size, "count": count})
    write_inventory(inv, out / "inventory.csv")
    write_rows(distinct, out / "distinct_substrings.csv", ["series", "size", "count"])
    summaries = length_stats(corpus)
    write_rows([{"series": k, **v.as_row()} for k, v in summaries.items()], out / "length_stats.csv",
               ["series", "count", "min", "max", "mean", "median"])
    write_rows([{"series": k, "length": length, "count": c} for k, v in summaries.items() if k != "*"
                for length, c in v.histogram.items()], out / "length_histogram.csv", ["series", "length", "count"])
    manifest.outputs += ["inventory.csv", "distinct_substrings.csv", "length_stats.csv", "length_histogram.csv"]
    fig = _figure_path(out, "length_histogram", args)
    if fig is not None:
        render_length_histogram(summaries, fig)
        manifest.outputs.append(fig.name)
    manifest.write(out)
    for row in distinct:
        print(f"{row['series']}\tsize {row['size']}\t{row['count']} distinct")
    return EXIT_OK


def cmd_compare(args) -> int:
    from .corpus import load_sequences
    from .report import RunManifest, odds_chart_rows, render_odds_chart, write_rows
    from .stats import compare_series, significant_counts, write_report

    alphabet = _alphabet(args)
    name_a, recs_a = _select(load_sequences(args.a, alphabet), args.series_a, args.a)
    name_b, recs_b = _select(load_sequences(args.b, alphabet), args.series_b, args.b)
    results = compare_series(recs_a, recs_b, args.sizes, args.alpha, pool_sizes=args.pool_sizes)
    shown = [r for r in results if r.significant] if args.significant_only else results
    out = _outdir(args)
    manifest = RunManifest.for_inputs("compare", _params(args), [args.a, args.b, args.alphabet])
    write_report(shown, out / "compare.csv")
    manifest.outputs.append("compare.csv")
    counts = significant_counts(results)
    write_rows([{"series_a": name_a, "series_b": name_b, "size": s, "tested": sum(r.size == s for r in results),
                 "significant": c} for s, c in counts.items()], out / "significant_counts.csv")
    manifest.outputs.append("significant_counts.csv")
    for size in args.sizes:
        sig = [r for r in results if r.size == size and r.significant]
        write_rows(odds_chart_rows(sig, alphabet), out / f"odds_size{size}.csv",
                   ["pattern", "label", "size", "odds_ratio", "p_adjusted"])
        manifest.outputs.append(f"odds_size{size}.csv")
        fig = _figure_path(out, f"odds_size{size}", args)
        if fig is not None:
            render_odds_chart(sig, fig, f"{name_a} vs {name_b}, size {size}", alphabet, top=args.top)
            manifest.outputs.append(fig.name)
    manifest.write(out)
    for s, c in counts.items():
        print(f"size {s}: {c} significant of {sum(r.size == s for r in results)}")
    return EXIT_OK


def cmd_cluster(args) -> int:
    from .clustering import cluster_records, write_assignments, write_representatives
    from .corpus import load_sequences
    from .report import RunManifest, render_dendrogram, render_silhouette_scores, write_rows

    if args.linkage != "ward":
        raise ValidationError("only --linkage ward is supported")
    alphabet = _alphabet(args)
    name, recs = _select(load_sequences(args.input, alphabet), args.series, args.input)
    metric = CLUSTER_METRICS[args.metric]
    k = None if args.cut == "auto" else args.cut
    report = cluster_records(recs, args.min_len, args.max_len, k, args.k_max, args.coverage, metric)
    out = _outdir(args)
    manifest = RunManifest.for_inputs("cluster", _params(args), [args.input, args.alphabet])
    report.dendrogram.write_merges(out / "dendrogram.tsv")
    (out / "dendrogram.dot").write_text(report.dendrogram.to_dot(), encoding="utf-8")
    write_assignments(report, out / "assignments.csv")
    write_rows([{"k": k_, "silhouette": repr(v)} for k_, v in sorted(report.scores.items())],
               out / "silhouette.csv", ["k", "silhouette"])
    write_representatives(report, out / "representatives.csv", alphabet.codes)
    manifest.outputs += ["dendrogram.tsv", "dendrogram.dot", "assignments.csv", "silhouette.csv",
                         "representatives.csv"]
    fig = _figure_path(out, "dendrogram", args)
    if fig is not None:
        render_dendrogram(report.dendrogram, fig, report.cut, f"{name}: Ward, lengths {args.min_len}-{args.max_len}")
        manifest.outputs.append(fig.name)
        if report.scores:
            fig2 = _figure_path(out, "silhouette", args)
            render_silhouette_scores(report.scores, fig2, report.cut.k)
            manifest.outputs.append(fig2.name)
    manifest.write(out)
    print(f"{name}: k={report.cut.k} sizes={report.cut.sizes} silhouette={report.silhouette.mean:.4f}")
    for rep in report.representatives:
        print(f"cluster {rep.cluster} ({rep.cluster_size}): {rep.id} {rep.sequence} {rep.symbol_counts}")
    return EXIT_OK


def cmd_complexity(args) -> int:
    from .complexity import complexity_profile, write_complexity
    from .corpus import load_sequences
    from .report import RunManifest, write_rows

    alphabet = _alphabet(args)
    corpus = load_sequences(args.input, alphabet)
    names = [args.series] if args.series else sorted(corpus.series)
    out = _outdir(args)
    reports, summary_rows = [], []
    for name in names:
        _, recs = _select(corpus, name, args.input)
        summary, reps = complexity_profile(recs, len(alphabet))
        reports.extend(reps)
        summary_rows.append({"series": name, "count": summary.count, "mean": repr(summary.mean),
                             "median": repr(summary.median), "min": repr(summary.minimum),
                             "max": repr(summary.maximum)})
    write_complexity(reports, out / "complexity.csv")
    write_rows(summary_rows, out / "complexity_summary.csv")
    manifest = RunManifest.for_inputs("complexity", _params(args), [args.input, args.alphabet])
    manifest.outputs += ["complexity.csv", "complexity_summary.csv"]
    manifest.write(out)
    for row in summary_rows:
        print(f"{row['series']}: mean normalized LZ76 {float(row['mean']):.4f} over {row['count']} sequences")
    return EXIT_OK


def _client(args):
    from .annotator.client import ChatClient, EndpointConfig, ResponseCache

    config = EndpointConfig.load(args.config)
    if args.concurrency:
        config = EndpointConfig(**{**config.__dict__, "max_concurrency": args.concurrency})
    cache = ResponseCache(args.cache) if args.cache else None
    return ChatClient(config, cache, offline=args.offline)


def cmd_annotate(args) -> int:
    from .annotator.pipeline import annotate_narratives, group_by_narrative, save_annotations, sequence_from_annotations
    from .corpus import NarrativeRecord, save_sequences
    from .report import RunManifest

    alphabet = _alphabet(args)
    narratives = []
    with open(args.input, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                narratives.append((str(row["id"]), str(row["text"]), str(row.get("series", args.series))))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValidationError(f"{args.input}:{lineno}: malformed narrative record ({exc})") from exc
    out = _outdir(args)
    series_of = {nid: s for nid, _, s in narratives}
    with _client(args) as client:
        try:
            anns = annotate_narratives([(nid, text) for nid, text, _ in narratives], client)
        except EndpointError as exc:
            save_annotations(exc.partial, out / "annotations.partial.jsonl")
            raise
    save_annotations(anns, out / "annotations.jsonl")
    records, skipped = [], []
    for nid, group in group_by_narrative(anns).items():
        try:
            records.append(NarrativeRecord(nid, series_of[nid], sequence_from_annotations(group, alphabet)))
        except ValidationError as exc:
            skipped.append(nid)
            log.warning("narrative %s not encoded: %s", nid, exc)
    save_sequences(records, out / "sequences.jsonl")
    manifest = RunManifest.for_inputs("annotate", _params(args), [args.input, args.alphabet])
    manifest.parameters["model"] = client.config.model
    manifest.outputs += ["annotations.jsonl", "sequences.jsonl"]
    manifest.write(out)
    print(f"annotated {len(anns)} clauses in {len(narratives)} narratives; {len(skipped)} not encoded")
    return EXIT_OK


def cmd_validate(args) -> int:
    from .annotator import gold_fixture_path
    from .annotator.pipeline import annotate_clause, load_annotations
    from .report import RunManifest, write_rows

    gold_path = args.gold or gold_fixture_path()
    gold = load_annotations(gold_path)
    if args.predicted:
        predicted = load_annotations(args.predicted)
    else:
        with _client(args) as client:
            predicted = [annotate_clause(g.clause_text, client, g.narrative_id, g.clause_index) for g in gold]
    from .annotator.validation import validate

    report = validate(gold, predicted)
    out = _outdir(args)
    write_rows([{"metric": k, "value": v} for k, v in report.summary_rows()], out / "validation.csv")
    write_rows([{"gold": g, **row} for g, row in report.confusion.items()], out / "confusion.csv")
    manifest = RunManifest.for_inputs("validate", _params(args, "gold"), [gold_path, args.predicted])
    manifest.outputs += ["validation.csv", "confusion.csv"]
    manifest.write(out)
    for k, v in report.summary_rows():
        print(f"{k}\t{v}")
    return EXIT_OK


def cmd_report(args) -> int:
    """Re-render figures from a compare.csv produced earlier."""
    from .patterns import ContingencyTable
    from .report import render_odds_chart
    from .stats import TestResult

    alphabet = _alphabet(args)
    rows = []
    with open(args.compare, newline="", encoding="utf-8") as fh:
        import csv

        for row in csv.DictReader(fh):
            table = ContingencyTable(int(row["a"]), int(row["b"]), int(row["c"]), int(row["d"]))
            rows.append(TestResult(row["pattern"], int(row["size"]), table, float(row["odds_ratio"]),
                                   bool(int(row["corrected"])), float(row["p_raw"]), float(row["p_adjusted"]),
                                   bool(int(row["significant"]))))
    out = _outdir(args)
    for size in sorted({r.size for r in rows}) or [1]:
        sig = [r for r in rows if r.size == size and r.significant]
        render_odds_chart(sig, out / f"odds_size{size}.{args.figure_format}", f"size {size}", alphabet, args.top)
    print(f"rendered odds charts for {len({r.size for r in rows})} sizes into {out}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="narrativestyle",
                     description="Mine, compare and cluster narratives encoded as sequences of linguistic choices.",
                     epilog="Exit status: 0 success, 1 input or usage error, 2 model endpoint error.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="INI file: [defaults] for flag defaults, [endpoint] for the model server")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def common(p, out=True, figures=False):
        p.add_argument("--alphabet", help="alphabet INI file (default: shipped process alphabet a/m/v/s)")
        if out:
            p.add_argument("--out", required=True, help="output directory")
        if figures:
            p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
            p.add_argument("--figure-format", choices=("svg", "png"), default="svg")

    def lengths(p):
        p.add_argument("--min-len", type=int, default=1, help="shortest substring length (default 1)")
        p.add_argument("--max-len", type=int, default=3,
                       help="longest substring length (default 3: sizes one to three)")

    def endpoint(p):
        p.add_argument("--cache", help="response cache directory (requests are replayed from it)")
        p.add_argument("--offline", action="store_true", help="never call the endpoint; cache misses fail")
        p.add_argument("--concurrency", type=int, help="max concurrent requests (default from config, 4)")

    p = sub.add_parser("encode", help="annotations -> sequence file")
    p.add_argument("--annotations", required=True, help="annotations JSONL (one clause per line)")
    p.add_argument("--series", default="default", help="series name for the encoded records")
    common(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("norm", help="sample a norm series from every series")
    p.add_argument("--input", required=True, help="sequence file (JSONL or CSV)")
    p.add_argument("--per-series", type=int, default=10, help="narratives drawn per series (default 10)")
    p.add_argument("--seed", type=int, required=True, help="seed for the PCG64 generator (required)")
    common(p)
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("mine", help="substring inventories, distinct counts, length statistics")
    p.add_argument("--input", required=True)
    p.add_argument("--series", help="restrict to one series")
    p.add_argument("--sizes", type=_int_list, default=list(range(1, 10)),
                   help="substring sizes, e.g. 1-9 or 1,2,3 (default 1-9)")
    common(p, figures=True)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("compare", help="Fisher exact tests of substring presence, A vs B")
    p.add_argument("--a", required=True, help="sequence file of series A (e.g. one dreamer)")
    p.add_argument("--b", required=True, help="sequence file of series B (e.g. the norm)")
    p.add_argument("--series-a", help="series to use from --a when it holds several")
    p.add_argument("--series-b", help="series to use from --b when it holds several")
    p.add_argument("--sizes", type=_int_list, default=[1, 2, 3], help="substring sizes (default 1,2,3)")
    p.add_argument("--alpha", type=_alpha, default=0.05, help="family-wise significance level (default 0.05)")
    p.add_argument("--correction", choices=("holm",), default="holm", help="multiple-comparison correction")
    p.add_argument("--pool-sizes", action="store_true",
                   help="one Holm family over all sizes instead of one per size")
    p.add_argument("--significant-only", action="store_true", help="write only significant rows to compare.csv")
    p.add_argument("--top", type=int, default=20, help="bars per odds chart (default 20)")
    common(p, figures=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("cluster", help="Ward clustering, silhouette cut, coverage, representatives")
    p.add_argument("--input", required=True)
    p.add_argument("--series", help="series to cluster when the file holds several")
    lengths(p)
    p.add_argument("--cut", type=_cut, default="auto", help="number of clusters or 'auto' (best silhouette)")
    p.add_argument("--k-max", type=int, default=10, help="largest k tried by --cut auto (default 10)")
    p.add_argument("--coverage", type=_fraction, default=0.8,
                   help="fraction of sequences the selected clusters must cover (default 0.8)")
    p.add_argument("--metric", choices=tuple(CLUSTER_METRICS), default="cosine",
                   help="distance for silhouette and medoids: cosine = Euclidean between unit-length "
                        "count vectors, the geometry Ward merges on (default); cosine-distance = 1 - cos; "
                        "jaccard = 1 - Jaccard of presence sets")
    p.add_argument("--linkage", choices=("ward",), default="ward")
    common(p, figures=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("complexity", help="LZ76 complexity per sequence and per series")
    p.add_argument("--input", required=True)
    p.add_argument("--series", help="restrict to one series")
    common(p)
    p.set_defaults(func=cmd_complexity)

    p = sub.add_parser("annotate", help="narratives -> clauses -> annotations -> sequences via a model endpoint")
    p.add_argument("--input", required=True, help="JSONL with id, text and optional series")
    p.add_argument("--series", default="default", help="series for records without one")
    endpoint(p)
    common(p)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("validate", help="score annotations against gold clauses")
    p.add_argument("--gold", help="gold annotations JSONL (default: shipped textbook clauses)")
    p.add_argument("--predicted", help="predicted annotations; omitted means annotate the gold clauses now")
    endpoint(p)
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="re-render odds charts from a compare.csv")
    p.add_argument("--compare", required=True)
    p.add_argument("--top", type=int, default=20)
    p.add_argument("--figure-format", choices=("svg", "png"), default="svg")
    common(p)
    p.set_defaults(func=cmd_report)
    return parser


def _apply_config_defaults(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = configparser.ConfigParser(interpolation=None)
    with open(known.config, encoding="utf-8") as fh:
        cfg.read_file(fh)
    if not cfg.has_section("defaults"):
        return
    values = dict(cfg["defaults"])
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in subparsers.choices.values():
        updates = {}
        for action in sp._actions:
            key = action.dest
            if key in values:
                raw = values[key]
                if isinstance(action, argparse._StoreTrueAction):
                    updates[key] = raw.strip().lower() in ("1", "true", "yes", "on")
                else:
                    updates[key] = action.type(raw) if action.type else raw
                action.required = False
        sp.set_defaults(**updates)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_defaults(parser, argv)
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    except (OSError, configparser.Error, ValueError, argparse.ArgumentTypeError) as exc:
        print(f"narrativestyle: config error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except EndpointError as exc:
        print(f"narrativestyle: endpoint error: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT
    except (ValidationError, ValueError, OSError) as exc:
        print(f"narrativestyle: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
