"""HNote domain types, tokenizer, validator and serializer.

An HNote stream is a sequence of byte-valued units.  Values ``0x00``-``0x7F``
are onsets (the value is the pitch index, ``0x00`` is a rest) and
``0x80``-``0xFF`` continue the onset ``value - 0x80`` by one more unit.
Every measure holds exactly 32 units (4/4, quarter note = 8 units).

Canonical text form::

    3C BC BC BC BC BC BC BC 3E BE ... | 40 C0 ...
    43 C3 ...

Tokens are two uppercase hex digits separated by single spaces, measures are
joined with ``" | "`` and each musical line is one text line.  The reader also
accepts the quoted style ``"3C", "BC", "BC"``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .errors import DurationOverflow, InvalidScore, TokenizeError

UNITS_PER_MEASURE = 32
UNITS_PER_QUARTER = 8
REST = 0x00
CONTINUATION_OFFSET = 0x80

# Note values in units; every one is an exact integer because the measure is 32.
DURATION_UNITS = {
    "whole": 32,
    "dotted-half": 24,
    "half": 16,
    "dotted-quarter": 12,
    "quarter": 8,
    "dotted-eighth": 6,
    "eighth": 4,
    "sixteenth": 2,
    "thirty-second": 1,
}

_PITCH_CLASSES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")


def is_onset(code: int) -> bool:
    return 0x00 <= code <= 0x7F


def is_continuation(code: int) -> bool:
    return 0x80 <= code <= 0xFF


def continuation_of(code: int) -> int:
    """Return the onset that continuation ``code`` extends."""
    if not is_continuation(code):
        raise ValueError(f"0x{code:02X} is not a continuation code")
    return code - CONTINUATION_OFFSET


def continuation(onset: int) -> int:
    """Return the continuation code for ``onset`` (``0x3C`` -> ``0xBC``)."""
    if not is_onset(onset):
        raise ValueError(f"0x{onset:02X} is not an onset code")
    return onset + CONTINUATION_OFFSET


def format_code(code: int) -> str:
    if not 0 <= code <= 0xFF:
        raise ValueError(f"token value out of range: {code}")
    return f"{code:02X}"


def pitch_name(code: int) -> str:
    """Scientific pitch name on the ladder ``0 = C-1``; ``0x3C`` is ``"C4"``.

    Code 0 is displayed as ``C-1`` even though HNote reads it as a rest.
    """
    if not isinstance(code, int) or not 0 <= code <= 0x7F:
        raise ValueError(f"pitch code must be in [0, 127], got {code!r}")
    octave, pc = divmod(code, 12)
    return f"{_PITCH_CLASSES[pc]}{octave - 1}"


class ErrorCategory(str, Enum):
    INVALID_TOKEN = "InvalidToken"
    INCOMPLETE_MEASURE = "IncompleteMeasure"
    ORPHAN_CONTINUATION = "OrphanContinuation"
    EMPTY_LINE = "EmptyLine"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, slots=True)
class Position:
    """Location of a unit: line index, measure index within the line, unit offset 0-31."""

    line: int
    measure: int
    unit: int

    @classmethod
    def at(cls, line: int, index: int) -> "Position":
        measure, unit = divmod(index, UNITS_PER_MEASURE)
        return cls(line, measure, unit)

    def __str__(self) -> str:
        return f"line {self.line}, measure {self.measure}, unit {self.unit}"


@dataclass(frozen=True, slots=True)
class ValidationError:
    position: Position | None  # None means end of stream
    category: ErrorCategory
    message: str

    def __str__(self) -> str:
        where = str(self.position) if self.position is not None else "end of stream"
        return f"{where}: {self.category}: {self.message}"


@dataclass(frozen=True, slots=True)
class ValidationReport:
    errors: tuple[ValidationError, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.errors

    def categories(self) -> set[ErrorCategory]:
        return {e.category for e in self.errors}


@dataclass(frozen=True, slots=True)
class Note:
    """One onset plus its continuation run.  ``pitch == 0`` is a rest."""

    pitch: int
    duration_units: int
    start: tuple[int, int, int] = (0, 0, 0)

    def __post_init__(self):
        if not 0 <= self.pitch <= 0x7F:
            raise ValueError(f"pitch must be in [0, 127], got {self.pitch}")
        if self.duration_units < 1:
            raise ValueError(f"duration_units must be >= 1, got {self.duration_units}")

    @property
    def is_rest(self) -> bool:
        return self.pitch == REST

    @property
    def line(self) -> int:
        return self.start[0]


Measure = tuple[int, ...]
Line = tuple[Measure, ...]


@dataclass(frozen=True)
class Score:
    """Lines of 32-unit measures.

    Construction enforces the structural invariants (measure length, non-empty
    lines, every line opening on an onset).  Continuation chaining inside a
    line is *not* enforced here so that raw generator output can still be
    held and reported on; use :func:`validate` for the full grammar.
    """

    lines: tuple[Line, ...]
    _flat: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lines = tuple(tuple(tuple(m) for m in line) for line in self.lines)
        object.__setattr__(self, "lines", lines)
        for i, line in enumerate(lines):
            if not line:
                raise InvalidScore(None, f"line {i} has no measures")
            for j, measure in enumerate(line):
                if len(measure) != UNITS_PER_MEASURE:
                    raise InvalidScore(
                        None, f"line {i} measure {j} has {len(measure)} units, expected 32"
                    )
                for code in measure:
                    if not 0 <= code <= 0xFF:
                        raise InvalidScore(None, f"token value out of range: {code}")
            if not is_onset(line[0][0]):
                raise InvalidScore(None, f"line {i} starts with a continuation")
        flat = tuple(tuple(u for m in line for u in m) for line in lines)
        object.__setattr__(self, "_flat", flat)

    @classmethod
    def from_units(cls, lines: Iterable[Sequence[int]]) -> "Score":
        """Build a score from flat per-line unit lists (length a multiple of 32)."""
        out = []
        for i, units in enumerate(lines):
            units = list(units)
            if not units or len(units) % UNITS_PER_MEASURE:
                raise InvalidScore(
                    None, f"line {i} has {len(units)} units, not a positive multiple of 32"
                )
            out.append(
                tuple(
                    tuple(units[k : k + UNITS_PER_MEASURE])
                    for k in range(0, len(units), UNITS_PER_MEASURE)
                )
            )
        return cls(tuple(out))

    @classmethod
    def from_tokens(cls, tokens: Iterable[tuple[int, int]]) -> "Score":
        """Build a score from ``(line, code)`` pairs after full validation."""
        tokens = list(tokens)
        report = validate(tokens)
        if not report.valid:
            raise InvalidScore(report)
        return cls.from_units(_group_lines(tokens))

    def line_units(self, index: int) -> tuple[int, ...]:
        return self._flat[index]

    def iter_lines(self):
        return iter(self._flat)

    def tokens(self) -> list[tuple[int, int]]:
        return [(i, code) for i, units in enumerate(self._flat) for code in units]

    @property
    def measure_count(self) -> int:
        return sum(len(line) for line in self.lines)

    @property
    def unit_count(self) -> int:
        return sum(len(units) for units in self._flat)

    def __len__(self) -> int:
        return len(self.lines)


# --- text codec -------------------------------------------------------------

_LEXEME = re.compile(r"[^\s,|\"'\[\]]+")
_HEX_PAIR = re.compile(r"[0-9A-Fa-f]{2}")


def tokenize(text: str) -> list[tuple[int, int]]:
    """Split an HNote document into ``(line index, code)`` pairs.

    Measure bars, commas, quotes and brackets are separators.  Raises
    :class:`TokenizeError` listing every lexeme that is not a hex pair.
    """
    tokens: list[tuple[int, int]] = []
    bad: list[ValidationError] = []
    for line_no, raw in enumerate(text.split("\n")):
        count = 0
        for m in _LEXEME.finditer(raw.rstrip("\r")):
            lexeme = m.group()
            if _HEX_PAIR.fullmatch(lexeme):
                tokens.append((line_no, int(lexeme, 16)))
            else:
                bad.append(
                    ValidationError(
                        Position.at(line_no, count),
                        ErrorCategory.INVALID_TOKEN,
                        f"not a two-digit hex token: {lexeme!r} at column {m.start() + 1}",
                    )
                )
            count += 1
    if bad:
        raise TokenizeError(bad)
    return tokens


def serialize(score: Score) -> str:
    """Canonical text: uppercase hex, single spaces, ``" | "`` bars, final newline."""
    rows = []
    for line in score.lines:
        rows.append(" | ".join(" ".join(f"{u:02X}" for u in m) for m in line))
    return "\n".join(rows) + "\n"


def _group_lines(tokens: Sequence[tuple[int, int]]) -> list[list[int]]:
    if not tokens:
        return []
    by_line: dict[int, list[int]] = {}
    for line, code in tokens:
        by_line.setdefault(line, []).append(code)
    return [by_line.get(i, []) for i in range(max(by_line) + 1)]


def validate(tokens: Iterable[tuple[int, int]]) -> ValidationReport:
    """Check a token stream against the fixed-measure grammar.

    All failures are collected in document order; nothing is raised.
    Continuations may cross measure bars (ties) but not line breaks.
    """
    lines = _group_lines(list(tokens))
    errors: list[ValidationError] = []
    if not lines:
        errors.append(ValidationError(None, ErrorCategory.EMPTY_LINE, "document has no lines"))
        return ValidationReport(tuple(errors))

    for li, units in enumerate(lines):
        if not units:
            errors.append(
                ValidationError(Position(li, 0, 0), ErrorCategory.EMPTY_LINE, "line is empty")
            )
            continue
        prev = None
        for ui, code in enumerate(units):
            if not 0 <= code <= 0xFF:
                errors.append(
                    ValidationError(
                        Position.at(li, ui),
                        ErrorCategory.INVALID_TOKEN,
                        f"token value out of range: {code}",
                    )
                )
            elif is_continuation(code):
                onset = code - CONTINUATION_OFFSET
                if prev is None:
                    errors.append(
                        ValidationError(
                            Position.at(li, ui),
                            ErrorCategory.ORPHAN_CONTINUATION,
                            f"line starts with continuation {code:02X}",
                        )
                    )
                elif prev != onset and prev != code:
                    errors.append(
                        ValidationError(
                            Position.at(li, ui),
                            ErrorCategory.ORPHAN_CONTINUATION,
                            f"continuation {code:02X} follows {prev:02X}, "
                            f"expected onset {onset:02X} or {code:02X}",
                        )
                    )
            prev = code
        if len(units) % UNITS_PER_MEASURE:
            full, extra = divmod(len(units), UNITS_PER_MEASURE)
            errors.append(
                ValidationError(
                    Position(li, full, extra),
                    ErrorCategory.INCOMPLETE_MEASURE,
                    f"line has {len(units)} units; measure {full} holds {extra} of 32",
                )
            )
    return ValidationReport(tuple(errors))


def check_text(text: str) -> ValidationReport:
    """Tokenize and validate in one step; tokenizer failures become report entries."""
    try:
        tokens = tokenize(text)
    except TokenizeError as exc:
        return ValidationReport(exc.errors)
    return validate(tokens)


def parse_score(text: str) -> Score:
    """Parse and fully validate an HNote document."""
    tokens = tokenize(text)
    return Score.from_tokens(tokens)


# --- notes ------------------------------------------------------------------


def assemble_notes(score: Score) -> list[Note]:
    """Group each onset and its continuation run into a :class:`Note`."""
    report = validate(score.tokens())
    if not report.valid:
        raise InvalidScore(report)
    notes = []
    for li, units in enumerate(score.iter_lines()):
        i = 0
        while i < len(units):
            onset = units[i]
            cont = onset + CONTINUATION_OFFSET
            j = i + 1
            while j < len(units) and units[j] == cont:
                j += 1
            notes.append(Note(onset, j - i, (li,) + divmod(i, UNITS_PER_MEASURE)))
            i = j
    return notes


def note_units(note: Note) -> list[int]:
    return [note.pitch] + [note.pitch + CONTINUATION_OFFSET] * (note.duration_units - 1)


def emit_tokens(notes: Iterable[Note]) -> Score:
    """Inverse of :func:`assemble_notes`.

    Notes are grouped by ``start[0]`` (line index); measure and unit offsets
    are recomputed from the running total.
    """
    by_line: dict[int, list[int]] = {}
    for note in notes:
        by_line.setdefault(note.line, []).extend(note_units(note))
    if not by_line:
        raise DurationOverflow("no notes to emit")
    lines = []
    for li in sorted(by_line):
        units = by_line[li]
        if len(units) % UNITS_PER_MEASURE:
            raise DurationOverflow(
                f"line {li} totals {len(units)} units, not a multiple of 32"
            )
        lines.append(units)
    return Score.from_units(lines)
