"""Record the response cache used by the offline gold-validation test.

By default the replies come from the scripted stub in tests/stub_model.py,
so the cache can be rebuilt anywhere. Pass --base-url to record against a
live chat-completion endpoint instead.

    python scripts/record_gold_cache.py [--base-url URL] [--model ID] [--out DIR]
"""
import argparse
import shutil
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from narrativestyle.annotator import (ChatClient, EndpointConfig, ResponseCache, annotate_clause,  # noqa: E402
                                      gold_fixture_path, load_annotations, validate)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--base-url")
    ap.add_argument("--model")
    ap.add_argument("--out", default=str(ROOT / "tests" / "fixtures" / "gold_cache"))
    args = ap.parse_args()

    transport = None
    overrides = {}
    if args.base_url:
        overrides["base_url"] = args.base_url
    else:
        from stub_model import mock_transport
        transport = mock_transport()
    if args.model:
        overrides["model"] = args.model
    config = EndpointConfig(**overrides)

    shutil.rmtree(args.out, ignore_errors=True)
    gold = load_annotations(gold_fixture_path())
    with ChatClient(config, ResponseCache(args.out), transport=transport) as client:
        predicted = [annotate_clause(g.clause_text, client, g.narrative_id, g.clause_index) for g in gold]
    report = validate(gold, predicted)
    for name, value in report.summary_rows():
        print(f"{name}\t{value}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
