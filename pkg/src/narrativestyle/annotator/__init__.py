"""Language-model annotation of narratives into process sequences."""
from .client import ChatClient, EndpointConfig, ResponseCache
from .pipeline import (annotate_clause, annotate_narratives, load_annotations, save_annotations,
                       segment_clauses, sequence_from_annotations, split_sentences)
from .schema import ClauseAnnotation, Span
from .validation import ValidationReport, validate

__all__ = [
    "ChatClient", "ClauseAnnotation", "EndpointConfig", "ResponseCache", "Span", "ValidationReport",
    "annotate_clause", "annotate_narratives", "load_annotations", "save_annotations", "segment_clauses",
    "sequence_from_annotations", "split_sentences", "validate", "gold_fixture_path",
]


def gold_fixture_path():
    """Path of the shipped gold clause annotations (textbook examples)."""
    from importlib import resources
    return resources.files("narrativestyle") / "data" / "gold_clauses.jsonl"
