"""HNote: fixed 32-unit-measure hexadecimal music notation tools."""

__version__ = "0.1.0"

from .core import (
    DURATION_UNITS,
    UNITS_PER_MEASURE,
    ErrorCategory,
    Note,
    Position,
    Score,
    ValidationError,
    ValidationReport,
    assemble_notes,
    check_text,
    continuation,
    continuation_of,
    emit_tokens,
    is_continuation,
    is_onset,
    parse_score,
    pitch_name,
    serialize,
    tokenize,
    validate,
)
from .errors import HNoteError

__all__ = [
    "DURATION_UNITS",
    "UNITS_PER_MEASURE",
    "ErrorCategory",
    "HNoteError",
    "Note",
    "Position",
    "Score",
    "ValidationError",
    "ValidationReport",
    "assemble_notes",
    "check_text",
    "continuation",
    "continuation_of",
    "emit_tokens",
    "is_continuation",
    "is_onset",
    "parse_score",
    "pitch_name",
    "serialize",
    "tokenize",
    "validate",
]
