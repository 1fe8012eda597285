"""Narratives -> clauses -> annotations -> symbol sequences."""
from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from string import Template
from typing import Iterable, Sequence

from ..alphabet import Alphabet, SymbolSequence, encode
from ..errors import EndpointError, ValidationError
from .client import ChatClient
from .schema import UNKNOWN, ClauseAnnotation, parse_annotation, parse_clauses

log = logging.getLogger(__name__)

_SENTENCE_END = re.compile(r"(?<=[.!?])[\"')\]]*\s+(?=[\"'(\[]?[A-Z0-9])")


def load_template(name: str) -> tuple[str, Template]:
    """Return (system prompt, user-message template) for a versioned template id."""
    text = (resources.files("narrativestyle") / "annotator" / "prompts" / f"{name}.txt").read_text("utf-8")
    system, _, user = text.partition("\n---\n")
    return system.strip(), Template(user.strip())


def split_sentences(text: str) -> list[str]:
    """Rule-based split on terminal punctuation followed by a capitalized start."""
    text = " ".join(text.split())
    if not text:
        return []
    parts, start = [], 0
    for m in _SENTENCE_END.finditer(text):
        parts.append(text[start:m.end()].strip())
        start = m.end()
    parts.append(text[start:].strip())
    return [p for p in parts if p]


def _squash(s: str) -> str:
    return "".join(s.split())


def _ask(client: ChatClient, template: str, parse, **fields):
    """One request plus at most one reformat retry; returns parse() or raises ValidationError."""
    system, user = load_template(template)
    messages = [{"role": "system", "content": system}, {"role": "user", "content": user.substitute(**fields)}]
    reply = client.complete(messages)
    try:
        return parse(reply)
    except ValidationError as exc:
        retry = messages + [
            {"role": "assistant", "content": reply},
            {"role": "user", "content": f"That reply was rejected ({exc}). Answer again with only the JSON object."},
        ]
        return parse(client.complete(retry))


def segment_clauses(narrative_text: str, client: ChatClient) -> list[str]:
    """Sentence split, then model-proposed clause boundaries per sentence.

    A sentence whose proposed clauses do not reassemble into it (modulo
    whitespace), or whose reply cannot be parsed, is kept whole.
    """
    if not narrative_text or not narrative_text.strip():
        raise ValidationError("narrative text is empty")
    clauses: list[str] = []
    for sentence in split_sentences(narrative_text):
        try:
            proposed = _ask(client, client.config.segment_template, parse_clauses, sentence=sentence)
        except ValidationError as exc:
            log.warning("unparseable segmentation for %r: %s; keeping sentence whole", sentence, exc)
            proposed = [sentence]
        except EndpointError as exc:
            raise EndpointError(str(exc), partial=clauses) from exc
        if _squash("".join(proposed)) != _squash(sentence):
            log.warning("clauses do not reassemble %r; keeping sentence whole", sentence)
            proposed = [sentence]
        clauses.extend(proposed)
    return clauses


def annotate_clause(clause_text: str, client: ChatClient, narrative_id: str = "", clause_index: int = 0) -> ClauseAnnotation:
    """Annotate one clause. Unusable output yields process ``unknown`` with a flag."""
    if not clause_text.strip():
        raise ValidationError("clause text is empty")

    def parse(reply):
        return parse_annotation(reply, narrative_id, clause_index, clause_text)

    try:
        return _ask(client, client.config.annotate_template, parse, clause=clause_text)
    except ValidationError as exc:
        log.warning("clause %s/%d left unannotated: %s", narrative_id, clause_index, exc)
        return ClauseAnnotation(narrative_id, clause_index, clause_text, UNKNOWN, flags=[f"unparsed: {exc}"])


def annotate_narrative(narrative_id: str, text: str, client: ChatClient) -> list[ClauseAnnotation]:
    out: list[ClauseAnnotation] = []
    try:
        for idx, clause in enumerate(segment_clauses(text, client)):
            out.append(annotate_clause(clause, client, narrative_id, idx))
    except EndpointError as exc:
        raise EndpointError(f"narrative {narrative_id}: {exc}", partial=out) from exc
    return out


def annotate_narratives(narratives: Iterable[tuple[str, str]], client: ChatClient) -> list[ClauseAnnotation]:
    """Annotate many narratives with at most ``max_concurrency`` in flight.

    Output is ordered by (narrative_id, clause_index) whatever the completion
    order. If the endpoint fails, the error's ``partial`` holds every
    annotation finished so far.
    """
    items = list(narratives)
    done: list[ClauseAnnotation] = []
    failure: EndpointError | None = None
    with ThreadPoolExecutor(max_workers=client.config.max_concurrency) as pool:
        futures = [pool.submit(annotate_narrative, nid, text, client) for nid, text in items]
        for fut in futures:
            try:
                done.extend(fut.result())
            except EndpointError as exc:
                done.extend(exc.partial)
                failure = failure or exc
    done.sort(key=lambda a: (a.narrative_id, a.clause_index))
    if failure is not None:
        raise EndpointError(str(failure), partial=done)
    return done


def sequence_from_annotations(annotations: Sequence[ClauseAnnotation], alphabet: Alphabet) -> SymbolSequence:
    """One symbol per clause, in clause order."""
    bad = [a.clause_index for a in annotations if not alphabet.has_label(a.process_type)]
    if bad:
        raise ValidationError(f"clauses with unknown process type: {bad}")
    return encode([a.process_type for a in annotations], alphabet)


def group_by_narrative(annotations: Iterable[ClauseAnnotation]) -> dict[str, list[ClauseAnnotation]]:
    groups: dict[str, list[ClauseAnnotation]] = {}
    for ann in annotations:
        groups.setdefault(ann.narrative_id, []).append(ann)
    for nid, anns in groups.items():
        anns.sort(key=lambda a: a.clause_index)
        if [a.clause_index for a in anns] != list(range(len(anns))):
            raise ValidationError(f"narrative {nid!r}: clause indices are not contiguous from 0")
    return groups


def load_annotations(path) -> list[ClauseAnnotation]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: malformed line ({exc.msg})") from exc
            try:
                out.append(ClauseAnnotation.from_json(row))
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    return out


def save_annotations(annotations: Iterable[ClauseAnnotation], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ann in annotations:
            fh.write(json.dumps(ann.to_json(), ensure_ascii=False) + "\n")
