"""Standard MIDI File (format 0) export of a validated HNote score."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

from .core import UNITS_PER_MEASURE, UNITS_PER_QUARTER, Score, assemble_notes
from .errors import BadConfig

NOTE_OFF = 0x80
NOTE_ON = 0x90
PROGRAM_CHANGE = 0xC0


@dataclass(frozen=True, slots=True)
class ExportConfig:
    ppq: int = 480
    tempo_us_per_beat: int = 1_000_000
    channel: int = 0
    velocity: int = 90
    program: int = 0

    def __post_init__(self):
        if self.ppq <= 0 or self.ppq % UNITS_PER_QUARTER or self.ppq > 0x7FFF:
            raise BadConfig(f"ppq must be a positive multiple of 8 below 32768, got {self.ppq}")
        if not 0 < self.tempo_us_per_beat < 1 << 24:
            raise BadConfig(f"tempo out of range: {self.tempo_us_per_beat}")
        if not 0 <= self.channel <= 15:
            raise BadConfig(f"channel must be 0-15, got {self.channel}")
        if not 1 <= self.velocity <= 127:
            raise BadConfig(f"velocity must be 1-127, got {self.velocity}")
        if not 0 <= self.program <= 127:
            raise BadConfig(f"program must be 0-127, got {self.program}")

    @classmethod
    def from_bpm(cls, bpm: float, **kwargs) -> "ExportConfig":
        if bpm <= 0:
            raise BadConfig(f"tempo must be positive, got {bpm}")
        return cls(tempo_us_per_beat=round(60_000_000 / bpm), **kwargs)

    @property
    def ticks_per_unit(self) -> int:
        return self.ppq // UNITS_PER_QUARTER


def var_len(value: int) -> bytes:
    """MIDI variable-length quantity: 7 bits per byte, high bit set on all but the last."""
    if value < 0 or value > 0x0FFFFFFF:
        raise ValueError(f"delta time out of range: {value}")
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def _chunk(tag: bytes, data: bytes) -> bytes:
    return tag + struct.pack(">I", len(data)) + data


def export_midi(score: Score, config: ExportConfig = ExportConfig()) -> bytes:
    """Render ``score`` as format-0 SMF bytes; lines play back to back.

    Note-off falls exactly at the end of each note's duration.  Rests emit
    no events but still advance time.
    """
    notes = assemble_notes(score)  # raises InvalidScore
    tpu = config.ticks_per_unit
    line_offsets = []
    offset = 0
    for units in score.iter_lines():
        line_offsets.append(offset)
        offset += len(units)
    total_ticks = offset * tpu

    events: list[tuple[int, int, bytes]] = []
    for note in notes:
        if note.is_rest:
            continue
        line, measure, unit = note.start
        start = line_offsets[line] + measure * UNITS_PER_MEASURE + unit
        on_tick = start * tpu
        off_tick = (start + note.duration_units) * tpu
        # note-offs sort before note-ons on the same tick
        events.append((on_tick, 1, bytes([NOTE_ON | config.channel, note.pitch, config.velocity])))
        events.append((off_tick, 0, bytes([NOTE_OFF | config.channel, note.pitch, 0])))
    events.sort(key=lambda e: (e[0], e[1]))

    track = bytearray()
    track += b"\x00\xff\x51\x03" + config.tempo_us_per_beat.to_bytes(3, "big")
    track += b"\x00\xff\x58\x04\x04\x02\x18\x08"  # 4/4, 24 clocks/click, 8 32nds/quarter
    track += bytes([0x00, PROGRAM_CHANGE | config.channel, config.program])
    now = 0
    for tick, _, msg in events:
        track += var_len(tick - now) + msg
        now = tick
    track += var_len(total_ticks - now) + b"\xff\x2f\x00"

    header = struct.pack(">HHH", 0, 1, config.ppq)
    return _chunk(b"MThd", header) + _chunk(b"MTrk", bytes(track))


def write_midi(score: Score, path: str | Path, config: ExportConfig = ExportConfig()) -> None:
    Path(path).write_bytes(export_midi(score, config))
