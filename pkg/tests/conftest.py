import random
import sys
from pathlib import Path

import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from hnote.core import Score  # noqa: E402
from hnote.ynote import DEFAULT_TABLE  # noqa: E402

ACCEPTANCE_LINES: list[str] = []

# note lengths that keep generated lines readable; any 1..32 is legal
NOTE_LENGTHS = (1, 2, 4, 6, 8, 12, 16, 24, 32)


def random_line_units(rng: random.Random, measures: int, pitches=None, max_len=40) -> list[int]:
    """Random valid line: notes of random pitch/length, ties across bars allowed."""
    total = measures * 32
    units: list[int] = []
    while len(units) < total:
        pitch = rng.choice(pitches) if pitches else rng.choice([0] + list(range(36, 90)))
        length = min(rng.randint(1, max_len), total - len(units))
        units.append(pitch)
        units.extend([pitch + 0x80] * (length - 1))
    return units


def random_score(rng: random.Random, max_lines=3, max_measures=3, **kw) -> Score:
    lines = [
        random_line_units(rng, rng.randint(1, max_measures), **kw)
        for _ in range(rng.randint(1, max_lines))
    ]
    return Score.from_units(lines)


def random_ynote_text(rng: random.Random, max_lines=4, max_measures=3) -> str:
    """Random parseable, bar-aligned YNote document in canonical form."""
    codes = sorted(DEFAULT_TABLE, key=DEFAULT_TABLE.units)
    rows = []
    for _ in range(rng.randint(1, max_lines)):
        remaining = 32 * rng.randint(1, max_measures)
        toks = []
        while remaining:
            fits = [c for c in codes if DEFAULT_TABLE.units(c) <= remaining]
            code = rng.choice(fits)
            pitch = rng.choice([0x00] + list(range(0x30, 0x50)))
            toks.append(f"{pitch:02X}{code}")
            remaining -= DEFAULT_TABLE.units(code)
        rows.append(" ".join(toks))
    return "\n".join(rows) + "\n"


@st.composite
def scores(draw, max_lines=3, max_measures=3):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_score(random.Random(seed), max_lines, max_measures)


@pytest.fixture
def rng():
    return random.Random(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
