import json
import os
import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from narrativestyle.alphabet import default_alphabet  # noqa: E402
from narrativestyle.corpus import NarrativeRecord  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"
RELEASED_DIR = os.environ.get("NARRATIVESTYLE_RELEASED_DIR")


@pytest.fixture(scope="session")
def alphabet():
    return default_alphabet()


def make_records(seqs, series="s", alphabet=None):
    alphabet = alphabet or default_alphabet()
    return [NarrativeRecord(f"{series}{i:03d}", series, alphabet.sequence(s)) for i, s in enumerate(seqs)]


@pytest.fixture
def records_factory(alphabet):
    def factory(seqs, series="s"):
        return make_records(seqs, series, alphabet)
    return factory


def random_sequences(rng, count, min_len=1, max_len=30, letters="amvs"):
    return ["".join(rng.choice(letters) for _ in range(rng.randint(min_len, max_len))) for _ in range(count)]


@pytest.fixture
def two_series_file(tmp_path):
    """Synthetic corpus: 'act' leans on action, 'talk' on verbal runs."""
    rng = random.Random(7)
    rows = []
    for i in range(40):
        rows.append({"id": f"act{i:02d}", "series": "act",
                     "sequence": "".join(rng.choice("aaaams") for _ in range(rng.randint(5, 25)))})
    for i in range(40):
        rows.append({"id": f"talk{i:02d}", "series": "talk",
                     "sequence": "".join(rng.choice("vvvams") for _ in range(rng.randint(5, 25)))})
    path = tmp_path / "corpus.jsonl"
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path
