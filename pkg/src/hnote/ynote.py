"""YNote reader/writer and the lossless YNote <-> HNote conversion.

A YNote token is four characters ``PPDD``: ``PP`` is the same two-hex-digit
pitch index HNote uses for onsets (``00`` is a rest) and ``DD`` is a duration
code resolved through a :class:`DurationTable`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from .core import (
    CONTINUATION_OFFSET,
    UNITS_PER_MEASURE,
    Score,
    assemble_notes,
)
from .errors import (
    BadConfig,
    DurationOverflow,
    MalformedToken,
    UnknownDurationCode,
    UnrepresentableDuration,
)

_CODE = re.compile(r"[0-9A-Za-z]{2}")
_PITCH = re.compile(r"[0-7][0-9A-Fa-f]")


class DurationTable:
    """Immutable, injective map from two-character duration codes to unit counts."""

    ANCHOR = ("02", 16)

    def __init__(self, entries: Mapping[str, int]):
        entries = dict(entries)
        seen: dict[int, str] = {}
        for code, units in entries.items():
            if not isinstance(code, str) or not _CODE.fullmatch(code):
                raise BadConfig(f"duration code must be two alphanumerics: {code!r}")
            if not isinstance(units, int) or not 1 <= units <= UNITS_PER_MEASURE:
                raise BadConfig(f"duration for {code!r} must be in [1, 32]: {units!r}")
            if units in seen:
                raise BadConfig(
                    f"codes {seen[units]!r} and {code!r} both map to {units} units"
                )
            seen[units] = code
        code, units = self.ANCHOR
        if entries.get(code) != units:
            raise BadConfig(f"table must map {code!r} to {units} units")
        self._units = MappingProxyType(entries)
        self._codes = MappingProxyType(seen)

    @classmethod
    def parse(cls, text: str) -> "DurationTable":
        """Read ``CODE=UNITS`` lines; blank lines and ``#`` comments are skipped."""
        entries: dict[str, int] = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            code, sep, units = (part.strip() for part in line.partition("="))
            if not sep or not units.isdigit():
                raise BadConfig(f"line {n}: expected CODE=UNITS, got {raw!r}")
            if code in entries:
                raise BadConfig(f"line {n}: duplicate code {code!r}")
            entries[code] = int(units)
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path) -> "DurationTable":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def dump(self) -> str:
        return "".join(f"{c}={u}\n" for c, u in sorted(self._units.items()))

    def units(self, code: str) -> int:
        try:
            return self._units[code]
        except KeyError:
            raise UnknownDurationCode(f"unknown duration code {code!r}") from None

    def code_for(self, units: int) -> str | None:
        return self._codes.get(units)

    def values(self) -> list[int]:
        return sorted(self._codes, reverse=True)

    def __contains__(self, code) -> bool:
        return code in self._units

    def __iter__(self):
        return iter(self._units)

    def __len__(self) -> int:
        return len(self._units)

    def __eq__(self, other) -> bool:
        return isinstance(other, DurationTable) and dict(self._units) == dict(other._units)

    def __hash__(self) -> int:
        return hash(frozenset(self._units.items()))

    def __repr__(self) -> str:
        return f"DurationTable({dict(self._units)!r})"


# 01-04 are beat counts (8 units per beat); the rest cover sub-beat and dotted values.
DEFAULT_TABLE = DurationTable(
    {"01": 8, "02": 16, "03": 24, "04": 32, "05": 4, "06": 2, "07": 1, "08": 12, "09": 6}
)


@dataclass(frozen=True, slots=True)
class YNoteToken:
    pitch: int
    code: str
    units: int

    @property
    def text(self) -> str:
        return f"{self.pitch:02X}{self.code}"

    def __str__(self) -> str:
        return self.text


def parse_token(text: str, table: DurationTable = DEFAULT_TABLE) -> YNoteToken:
    if len(text) != 4:
        raise MalformedToken(f"YNote token must be 4 characters: {text!r}")
    pitch, code = text[:2], text[2:]
    if not _PITCH.fullmatch(pitch):
        raise MalformedToken(f"bad pitch field in {text!r} (expected hex 00-7F)")
    if not _CODE.fullmatch(code):
        raise MalformedToken(f"bad duration field in {text!r}")
    if code not in table:
        raise UnknownDurationCode(f"unknown duration code {code!r} in {text!r}")
    return YNoteToken(int(pitch, 16), code, table.units(code))


def parse_ynote(
    text: str, table: DurationTable = DEFAULT_TABLE
) -> list[tuple[int, YNoteToken]]:
    """Split a YNote document into ``(line, token)`` pairs.

    Each non-blank text line is one musical line; line indices count only
    non-blank lines.  Tokens may be run together or whitespace separated.
    """
    out = []
    line_index = 0
    for n, raw in enumerate(text.splitlines(), 1):
        chunks = raw.split()
        if not chunks:
            continue
        for chunk in chunks:
            if len(chunk) % 4:
                raise MalformedToken(
                    f"line {n}: {chunk!r} is not a whole number of 4-character tokens"
                )
            for k in range(0, len(chunk), 4):
                try:
                    out.append((line_index, parse_token(chunk[k : k + 4], table)))
                except (MalformedToken, UnknownDurationCode) as exc:
                    raise type(exc)(f"line {n}: {exc}") from None
        line_index += 1
    return out


def serialize_ynote(tokens: Iterable[tuple[int, YNoteToken]]) -> str:
    rows: dict[int, list[str]] = {}
    for line, tok in tokens:
        rows.setdefault(line, []).append(tok.text)
    return "".join(" ".join(rows[i]) + "\n" for i in sorted(rows))


def ynote_to_hnote(
    tokens: Sequence[tuple[int, YNoteToken]], merge_ties: bool = False
) -> Score:
    """Expand each token into one onset plus ``units - 1`` continuations.

    With ``merge_ties`` adjacent same-pitch tokens in a line become one
    sustained note.  That form cannot be converted back token-for-token.
    """
    lines: dict[int, list[int]] = {}
    for line, tok in tokens:
        units = lines.setdefault(line, [])
        cont = tok.pitch + CONTINUATION_OFFSET
        if merge_ties and units and units[-1] in (tok.pitch, cont):
            units.extend([cont] * tok.units)
        else:
            units.append(tok.pitch)
            units.extend([cont] * (tok.units - 1))
    if not lines:
        raise DurationOverflow("no YNote tokens to convert")
    ordered = []
    for i in sorted(lines):
        units = lines[i]
        if len(units) % UNITS_PER_MEASURE:
            raise DurationOverflow(
                f"line {i} totals {len(units)} units, not a multiple of 32"
            )
        ordered.append(units)
    return Score.from_units(ordered)


def decompose(units: int, table: DurationTable) -> list[int]:
    """Greedy longest-first split of ``units`` into table values."""
    if table.code_for(units) is not None:
        return [units]
    parts = []
    remaining = units
    for value in table.values():
        while value <= remaining:
            parts.append(value)
            remaining -= value
    if remaining:
        raise UnrepresentableDuration(
            f"{units} units cannot be split into table values {table.values()}"
        )
    return parts


def hnote_to_ynote(
    score: Score, table: DurationTable = DEFAULT_TABLE
) -> list[tuple[int, YNoteToken]]:
    """Convert back to YNote; notes longer than any table entry are split greedily."""
    out = []
    for note in assemble_notes(score):
        for part in decompose(note.duration_units, table):
            out.append((note.line, YNoteToken(note.pitch, table.code_for(part), part)))
    return out
