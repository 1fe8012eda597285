import json
import random

import httpx
import pytest

from narrativestyle.alphabet import default_alphabet
from narrativestyle.annotator import (ChatClient, ClauseAnnotation, EndpointConfig, ResponseCache, Span,
                                      annotate_clause, annotate_narratives, gold_fixture_path, load_annotations,
                                      save_annotations, segment_clauses, sequence_from_annotations,
                                      split_sentences, validate)
from narrativestyle.annotator.schema import parse_annotation, parse_clauses
from narrativestyle.errors import EndpointError, ValidationError

from stub_model import SEGMENTS, mock_transport

FAST = EndpointConfig(base_url="http://stub.invalid/v1", backoff=0.0)


def client(tmp_path=None, calls=None, fail_first=0, config=FAST):
    cache = ResponseCache(tmp_path) if tmp_path is not None else None
    return ChatClient(config, cache=cache, transport=mock_transport(calls, fail_first))


@pytest.fixture(scope="module")
def gold():
    return load_annotations(gold_fixture_path())


# ---- schema ----------------------------------------------------------------

def test_parse_maps_synonyms_and_role_case():
    ann = parse_annotation('{"process": "material", "participants": [{"role": "actor", "text": "I"}],'
                           ' "circumstances": [{"type": "place", "text": "in a dark room"}]}',
                           "n", 0, "I wake in a dark room")
    assert ann.process_type == "action"
    assert ann.participants == [Span("Actor", "I")]
    assert ann.circumstances == [Span("Place", "in a dark room")]


@pytest.mark.parametrize("label,expected", [("relational", "state"), ("existential", "state"),
                                            ("Mental", "mental"), ("saying", "verbal")])
def test_process_synonyms(label, expected):
    assert parse_annotation(json.dumps({"process": label}), "n", 0, "x").process_type == expected


def test_parse_tolerates_code_fence():
    reply = '```json\n{"process": "mental", "participants": [{"role": "Senser", "text": "I"}]}\n```'
    assert parse_annotation(reply, "n", 0, "I feel").process_type == "mental"


@pytest.mark.parametrize("reply", [
    "not json at all",
    '{"process": "dancing"}',
    '{"process": "mental", "participants": [{"role": "Actor", "text": "I"}]}',
    '{"process": "action", "circumstances": [{"type": "Weather", "text": "rain"}]}',
    '{"process": "action", "participants": [{"text": "I"}]}',
])
def test_parse_rejects(reply):
    with pytest.raises(ValidationError):
        parse_annotation(reply, "n", 0, "x")


def test_parse_clauses():
    assert parse_clauses('{"clauses": ["a b", " c "]}') == ["a b", "c"]
    for bad in ('{"clauses": []}', '{"clauses": "a"}', '{"other": 1}'):
        with pytest.raises(ValidationError):
            parse_clauses(bad)


def test_gold_fixture_is_consistent(gold):
    assert len(gold) == 30
    assert len({(g.narrative_id, g.clause_index) for g in gold}) == 30
    by_text = {g.clause_text: g for g in gold}
    pool = by_text["There was a swimming pool"]
    assert pool.process_type == "state" and pool.participants == [Span("Existent", "a swimming pool")]
    assert [p.label for p in by_text["I feel a cold wind"].participants] == ["Senser", "Phenomenon"]


def test_annotation_roundtrip(tmp_path, gold):
    save_annotations(gold, tmp_path / "g.jsonl")
    assert load_annotations(tmp_path / "g.jsonl") == gold


def test_load_rejects_incompatible_role(tmp_path):
    row = {"narrative_id": "n", "clause_index": 0, "text": "x", "process": "verbal",
           "participants": [{"role": "Senser", "text": "I"}]}
    (tmp_path / "bad.jsonl").write_text(json.dumps(row) + "\n")
    with pytest.raises(ValidationError, match=":1:"):
        load_annotations(tmp_path / "bad.jsonl")


# ---- segmentation ---------------------------------------------------------

def test_split_sentences():
    text = "I wake in a dark room. I feel a cold wind. I tell myself to move."
    assert split_sentences(text) == ["I wake in a dark room.", "I feel a cold wind.", "I tell myself to move."]
    assert split_sentences("Dr. smith came.  Then? Yes!") == ["Dr. smith came.", "Then?", "Yes!"]
    assert split_sentences("   ") == []


def test_segment_three_sentences():
    text = "I wake in a dark room. I feel a cold wind. I tell myself to move."
    assert len(segment_clauses(text, client())) == 3


def test_segment_splits_compound_sentence():
    sentence = next(iter(SEGMENTS))
    clauses = segment_clauses(sentence, client())
    assert clauses == SEGMENTS[sentence]
    assert "".join(clauses).replace(" ", "") == sentence.replace(" ", "")


def test_segment_single_clause_and_empty():
    assert segment_clauses("I ran.", client()) == ["I ran."]
    with pytest.raises(ValidationError):
        segment_clauses("  ", client())


def reply_transport(content):
    def handler(request):
        return httpx.Response(200, json={"choices": [{"message": {"content": content}}]})
    return httpx.MockTransport(handler)


def test_segment_keeps_sentence_when_clauses_do_not_reassemble():
    c = ChatClient(FAST, transport=reply_transport('{"clauses": ["I ran", "home fast"]}'))
    assert segment_clauses("I ran home.", c) == ["I ran home."]


def test_segment_keeps_sentence_when_unparseable():
    c = ChatClient(FAST, transport=reply_transport("sorry, I cannot"))
    assert segment_clauses("I ran home.", c) == ["I ran home."]


# ---- annotation -----------------------------------------------------------

@pytest.mark.parametrize("text,process", [("I wake in a dark room", "action"), ("I feel a cold wind", "mental"),
                                          ("There was a swimming pool", "state")])
def test_annotate_examples(text, process, gold):
    ann = annotate_clause(text, client())
    assert ann.process_type == process
    expected = next(g for g in gold if g.clause_text == text)
    assert ann.participants == expected.participants
    assert ann.circumstances == expected.circumstances


def test_reformat_retry_recovers():
    calls = []
    ann = annotate_clause("He acted as the spokesperson", client(calls=calls))
    assert ann.process_type == "action"
    assert len(calls) == 2
    assert calls[1]["messages"][2]["role"] == "assistant"


def test_unusable_output_is_flagged_unknown():
    c = ChatClient(FAST, transport=reply_transport('{"process": "dreaming"}'))
    ann = annotate_clause("I float", c)
    assert ann.process_type == "unknown"
    assert ann.flags and ann.flags[0].startswith("unparsed")
    with pytest.raises(ValidationError):
        annotate_clause(" ", c)


def test_retries_transient_errors():
    calls = []
    ann = annotate_clause("I feel a cold wind", client(calls=calls, fail_first=2))
    assert ann.process_type == "mental"
    assert len(calls) == 3


def test_gives_up_after_retries():
    cfg = EndpointConfig(base_url="http://stub.invalid/v1", backoff=0.0, retries=1)
    with pytest.raises(EndpointError):
        annotate_clause("I feel a cold wind", client(fail_first=5, config=cfg))


def test_unreachable_endpoint_carries_partial_results():
    state = {"n": 0}

    def handler(request):
        state["n"] += 1
        if state["n"] > 4:
            raise httpx.ConnectError("refused")
        from stub_model import completion_body
        return httpx.Response(200, json=completion_body(json.loads(request.content)))

    cfg = EndpointConfig(base_url="http://stub.invalid/v1", backoff=0.0, retries=1, max_concurrency=1)
    c = ChatClient(cfg, transport=httpx.MockTransport(handler))
    text = "I wake in a dark room. I feel a cold wind. I tell myself to move."
    with pytest.raises(EndpointError) as info:
        annotate_narratives([("dark_room", text)], c)
    # three segment calls, then one annotation before the endpoint dies
    assert [a.clause_text for a in info.value.partial] == ["I wake in a dark room."]


def test_http_client_error_is_not_retried():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(401, text="no")

    with pytest.raises(EndpointError, match="401"):
        ChatClient(FAST, transport=httpx.MockTransport(handler)).complete([{"role": "user", "content": "x"}])
    assert len(calls) == 1


def test_offline_replay_is_byte_identical(tmp_path):
    narratives = [("dark_room", "I wake in a dark room. I feel a cold wind. I tell myself to move."),
                  ("wake", "I woke up and I saw my father.")]
    first = annotate_narratives(narratives, client(tmp_path / "cache"))
    save_annotations(first, tmp_path / "a.jsonl")
    offline = ChatClient(FAST, cache=ResponseCache(tmp_path / "cache"), offline=True)
    again = annotate_narratives(narratives, offline)
    save_annotations(again, tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    with pytest.raises(EndpointError):
        annotate_clause("A clause never seen", offline)
    with pytest.raises(ValueError):
        ChatClient(FAST, offline=True)


def test_concurrent_results_are_ordered(gold):
    by_nid = {}
    for g in gold:
        by_nid.setdefault(g.narrative_id, []).append(g.clause_text + ".")
    narratives = [(nid, " ".join(t[0].upper() + t[1:] for t in texts)) for nid, texts in by_nid.items()]
    random.Random(0).shuffle(narratives)
    cfg = EndpointConfig(base_url="http://stub.invalid/v1", backoff=0.0, max_concurrency=3)
    out = annotate_narratives(narratives, client(config=cfg))
    keys = [(a.narrative_id, a.clause_index) for a in out]
    assert keys == sorted(keys)
    assert len(out) == 30


def test_endpoint_config_env_override(tmp_path):
    ini = tmp_path / "e.ini"
    ini.write_text("[endpoint]\nbase_url = http://a/v1\nmodel = m1\nmax_concurrency = 2\ntimeout = 5\n")
    cfg = EndpointConfig.load(ini, env={"NARRATIVESTYLE_MODEL": "m2", "NARRATIVESTYLE_API_KEY": "k"})
    assert (cfg.base_url, cfg.model, cfg.max_concurrency, cfg.timeout, cfg.api_key) == ("http://a/v1", "m2", 2, 5.0, "k")
    with pytest.raises(ValueError):
        EndpointConfig(max_concurrency=0)


# ---- sequences and validation --------------------------------------------

def test_sequence_from_dark_room(gold):
    dark_room = [g for g in gold if g.narrative_id == "dark_room"]
    alpha = default_alphabet()
    seq = sequence_from_annotations(dark_room, alpha)
    assert seq.codes == "amv"
    assert sequence_from_annotations([], alpha).codes == ""
    assert sequence_from_annotations(dark_room[::-1], alpha).codes == "vma"


def test_sequence_rejects_unknown(gold):
    anns = [g for g in gold if g.narrative_id == "dark_room"]
    anns.append(ClauseAnnotation("dark_room", 3, "x", "unknown"))
    with pytest.raises(ValidationError, match=r"\[3\]"):
        sequence_from_annotations(anns, default_alphabet())


def fifty(gold):
    return [ClauseAnnotation("n", i, g.clause_text, g.process_type, list(g.participants), list(g.circumstances))
            for i, g in enumerate((gold * 2)[:50])]


def test_validate_identity_and_single_flip(gold):
    g = fifty(gold)
    rep = validate(g, fifty(gold))
    assert (rep.process_accuracy, rep.participant_accuracy, rep.circumstance_accuracy) == (1.0, 1.0, 1.0)
    flipped = fifty(gold)
    flipped[7].process_type = "verbal" if flipped[7].process_type != "verbal" else "mental"
    rep = validate(g, flipped)
    assert rep.process_accuracy == pytest.approx(0.98)
    assert rep.mismatches == [("n", 7)]
    assert sum(sum(row.values()) for row in rep.confusion.values()) == 50


def test_validate_errors(gold):
    g = fifty(gold)
    with pytest.raises(ValidationError):
        validate([], [])
    with pytest.raises(ValidationError):
        validate(g, g[:-1])
    shifted = [ClauseAnnotation("m", a.clause_index, a.clause_text, a.process_type) for a in g]
    with pytest.raises(ValidationError):
        validate(g, shifted)


def test_span_match_ignores_case_and_spacing():
    g = [ClauseAnnotation("n", 0, "x", "action", [Span("Actor", "The  Man")])]
    p = [ClauseAnnotation("n", 0, "x", "action", [Span("Actor", "the man")])]
    assert validate(g, p).participant_accuracy == 1.0
