"""Clause annotations for the transitivity system and their strict parsing."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import ValidationError

PROCESS_TYPES = ("action", "mental", "verbal", "state")
UNKNOWN = "unknown"

# Range is used for action clauses such as "I give her a chance".
ROLES_BY_PROCESS = {
    "action": frozenset({"Actor", "Affected", "Result", "Recipient", "Range"}),
    "mental": frozenset({"Senser", "Phenomenon"}),
    "verbal": frozenset({"Sayer", "Verbiage", "Recipient"}),
    "state": frozenset({"Existent", "Carrier", "Attribute", "Possessor", "Possessed"}),
}
ROLES = frozenset().union(*ROLES_BY_PROCESS.values())
CIRCUMSTANCE_TYPES = ("Time", "Place", "Manner", "Cause", "Accompaniment", "Matter", "Role")

PROCESS_SYNONYMS = {
    "action": "action", "material": "action", "event": "action",
    "mental": "mental", "cognition": "mental", "cognitive": "mental", "perception": "mental",
    "perceptive": "mental", "affection": "mental", "affective": "mental", "emotive": "mental",
    "verbal": "verbal", "saying": "verbal", "communication": "verbal",
    "state": "state", "states": "state", "relational": "state", "existential": "state",
    "attributive": "state", "possessive": "state", "being": "state", "having": "state",
}
ROLE_SYNONYMS = {"goal": "Affected", "beneficiary": "Recipient", "client": "Recipient",
                 "token": "Carrier", "value": "Attribute", "receiver": "Recipient"}


@dataclass(frozen=True)
class Span:
    label: str
    text: str

    def key(self) -> tuple[str, str]:
        return (self.label, " ".join(self.text.lower().split()))


@dataclass
class ClauseAnnotation:
    narrative_id: str
    clause_index: int
    clause_text: str
    process_type: str
    participants: list[Span] = field(default_factory=list)
    circumstances: list[Span] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        row = {
            "narrative_id": self.narrative_id,
            "clause_index": self.clause_index,
            "text": self.clause_text,
            "process": self.process_type,
            "participants": [{"role": p.label, "text": p.text} for p in self.participants],
            "circumstances": [{"type": c.label, "text": c.text} for c in self.circumstances],
        }
        if self.flags:
            row["flags"] = list(self.flags)
        return row

    @classmethod
    def from_json(cls, row: dict) -> "ClauseAnnotation":
        try:
            ann = cls(
                narrative_id=str(row["narrative_id"]),
                clause_index=int(row["clause_index"]),
                clause_text=str(row["text"]),
                process_type=str(row["process"]),
                participants=[Span(p["role"], p["text"]) for p in row.get("participants", [])],
                circumstances=[Span(c["type"], c["text"]) for c in row.get("circumstances", [])],
                flags=list(row.get("flags", [])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed annotation record: {exc}") from exc
        if ann.process_type != UNKNOWN:
            check_annotation(ann)
        return ann


def check_annotation(ann: ClauseAnnotation) -> None:
    """Raise when the process type or any role/circumstance is outside the closed sets."""
    if ann.process_type not in PROCESS_TYPES:
        raise ValidationError(f"clause {ann.clause_index}: unknown process type {ann.process_type!r}")
    allowed = ROLES_BY_PROCESS[ann.process_type]
    for p in ann.participants:
        if p.label not in allowed:
            raise ValidationError(
                f"clause {ann.clause_index}: role {p.label!r} not allowed with {ann.process_type} process")
    for c in ann.circumstances:
        if c.label not in CIRCUMSTANCE_TYPES:
            raise ValidationError(f"clause {ann.clause_index}: unknown circumstance type {c.label!r}")


def normalize_process(label: str) -> str | None:
    return PROCESS_SYNONYMS.get(str(label).strip().lower())


def _normalize_role(label: str) -> str:
    raw = str(label).strip()
    if raw.lower() in ROLE_SYNONYMS:
        return ROLE_SYNONYMS[raw.lower()]
    return raw[:1].upper() + raw[1:].lower()


def _extract_json(content: str) -> dict:
    text = content.strip()
    if text.startswith("```"):
        text = text.strip("`")
        text = text[text.find("\n") + 1:] if "\n" in text else text
    start, end = text.find("{"), text.rfind("}")
    if start < 0 or end < start:
        raise ValidationError("no JSON object in model output")
    try:
        obj = json.loads(text[start:end + 1])
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON in model output: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise ValidationError("model output is not a JSON object")
    return obj


def parse_annotation(content: str, narrative_id: str, clause_index: int, clause_text: str) -> ClauseAnnotation:
    """Parse one model reply into a checked annotation, or raise ValidationError."""
    obj = _extract_json(content)
    process = normalize_process(obj.get("process", ""))
    if process is None:
        raise ValidationError(f"out-of-vocabulary process {obj.get('process')!r}")
    try:
        participants = [Span(_normalize_role(p["role"]), str(p["text"])) for p in obj.get("participants") or []]
        circumstances = [Span(str(c["type"]).strip().capitalize(), str(c["text"]))
                         for c in obj.get("circumstances") or []]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed participant or circumstance entry: {exc}") from exc
    ann = ClauseAnnotation(narrative_id, clause_index, clause_text, process, participants, circumstances)
    check_annotation(ann)
    return ann


def parse_clauses(content: str) -> list[str]:
    obj = _extract_json(content)
    clauses = obj.get("clauses")
    if not isinstance(clauses, list) or not clauses or not all(isinstance(c, str) and c.strip() for c in clauses):
        raise ValidationError("expected a nonempty 'clauses' list of strings")
    return [c.strip() for c in clauses]
