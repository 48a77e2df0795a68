"""Order-k Markov baseline over HNote units with first/last-note line constraints.

The model sees each line as ``<s>``-padded units with ``|`` inserted at
measure bars and ``</s>`` at the end.  Generation samples raw units (no
note-level checking), so its output can fail validation the same way a
language model's can.
"""

from __future__ import annotations

import bisect
import itertools
import random
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .core import (
    CONTINUATION_OFFSET,
    UNITS_PER_MEASURE,
    Score,
    is_onset,
    serialize,
    validate,
)
from .corpus import LinePrompt, PromptSpec
from .errors import EmptyCorpus, InvalidScore

BOL = -1
BAR = -2
EOL = -3
_SENTINEL_TEXT = {BOL: "<s>", BAR: "|", EOL: "</s>"}
_TEXT_SENTINEL = {v: k for k, v in _SENTINEL_TEXT.items()}

FORMAT_HEADER = "#hnote-ngram v1"

DEFAULT_ORDER = 3
DEFAULT_ALPHA = 0.1
DEFAULT_MAX_RETRIES = 64


def symbol_text(sym: int) -> str:
    return _SENTINEL_TEXT.get(sym) or f"{sym:02X}"


def parse_symbol(text: str) -> int:
    if text in _TEXT_SENTINEL:
        return _TEXT_SENTINEL[text]
    value = int(text, 16)
    if len(text) != 2 or not 0 <= value <= 0xFF:
        raise ValueError(f"bad symbol {text!r}")
    return value


def line_symbols(units: Sequence[int]) -> list[int]:
    """Units of one line with bar sentinels between measures and ``</s>`` appended."""
    out = []
    for i, u in enumerate(units):
        if i and i % UNITS_PER_MEASURE == 0:
            out.append(BAR)
        out.append(u)
    out.append(EOL)
    return out


def count_ngrams(sequences: Iterable[Sequence[int]], order: int) -> dict[tuple, Counter]:
    """Counts of next symbol for every context of length ``0..order-1``.

    Each sequence is left-padded with ``order - 1`` start sentinels.
    """
    counts: dict[tuple, Counter] = {}
    pad = [BOL] * (order - 1)
    for seq in sequences:
        padded = pad + list(seq)
        for i in range(len(pad), len(padded)):
            nxt = padded[i]
            for j in range(order):
                ctx = tuple(padded[i - j : i])
                counts.setdefault(ctx, Counter())[nxt] += 1
    return counts


@dataclass(frozen=True)
class NgramModel:
    order: int
    alpha: float
    counts: Mapping[tuple, Mapping[int, int]]

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        counts = {ctx: dict(c) for ctx, c in self.counts.items() if sum(c.values()) > 0}
        object.__setattr__(self, "counts", counts)
        vocab = sorted({s for c in counts.values() for s in c})
        object.__setattr__(self, "_vocab", tuple(vocab))
        object.__setattr__(self, "_units", tuple(s for s in vocab if s >= 0))

    @property
    def vocabulary(self) -> tuple[int, ...]:
        """Every symbol that can follow a context (units, ``|`` and ``</s>``)."""
        return self._vocab

    @property
    def unit_vocabulary(self) -> tuple[int, ...]:
        return self._units

    @property
    def onsets(self) -> tuple[int, ...]:
        return tuple(u for u in self._units if is_onset(u))

    def _lookup(self, context: Sequence[int], units_only: bool) -> tuple[tuple, Mapping[int, int]]:
        ctx = tuple(context[max(len(context) - (self.order - 1), 0):]) if self.order > 1 else ()
        while True:
            table = self.counts.get(ctx)
            if table is not None:
                has_units = any(s >= 0 for s in table)
                if not units_only or has_units or self.alpha > 0:
                    return ctx, table
            if not ctx:
                # the empty context always exists after training
                return ctx, self.counts.get((), {})
            ctx = ctx[1:]

    def distribution(self, context: Sequence[int]) -> dict[int, float]:
        """Smoothed next-symbol probabilities over :attr:`vocabulary`; sums to 1."""
        _, table = self._lookup(context, units_only=False)
        return self._normalize(table, self._vocab)

    def unit_distribution(self, context: Sequence[int]) -> dict[int, float]:
        """Like :meth:`distribution` but conditioned on the next symbol being a unit."""
        _, table = self._lookup(context, units_only=True)
        return self._normalize(table, self._units)

    def _normalize(self, table: Mapping[int, int], support: Sequence[int]) -> dict[int, float]:
        weights = [table.get(s, 0) + self.alpha for s in support]
        total = sum(weights)
        return {s: w / total for s, w in zip(support, weights)}

    def sample_unit(self, context: Sequence[int], rng: random.Random) -> int:
        _, table = self._lookup(context, units_only=True)
        weights = [table.get(s, 0) + self.alpha for s in self._units]
        cum = list(itertools.accumulate(weights))
        r = rng.random() * cum[-1]
        return self._units[min(bisect.bisect_right(cum, r), len(cum) - 1)]

    def nearest_onset(self, code: int) -> int:
        return min(self.onsets, key=lambda o: (abs(o - code), o))

    # --- persistence ---

    def dumps(self) -> str:
        rows = [f"{FORMAT_HEADER} order={self.order} alpha={self.alpha!r}"]
        for ctx in sorted(self.counts, key=lambda c: (len(c), c)):
            ctx_text = " ".join(symbol_text(s) for s in ctx)
            for nxt in sorted(self.counts[ctx]):
                rows.append(f"{ctx_text}\t{symbol_text(nxt)}\t{self.counts[ctx][nxt]}")
        return "\n".join(rows) + "\n"

    @classmethod
    def loads(cls, text: str) -> "NgramModel":
        lines = text.splitlines()
        if not lines or not lines[0].startswith(FORMAT_HEADER):
            raise ValueError("not an hnote n-gram model file")
        fields = dict(kv.split("=", 1) for kv in lines[0][len(FORMAT_HEADER):].split())
        counts: dict[tuple, dict[int, int]] = {}
        for n, row in enumerate(lines[1:], 2):
            if not row:
                continue
            parts = row.split("\t")
            if len(parts) != 3:
                raise ValueError(f"line {n}: expected 3 tab-separated fields")
            ctx = tuple(parse_symbol(s) for s in parts[0].split())
            counts.setdefault(ctx, {})[parse_symbol(parts[1])] = int(parts[2])
        return cls(int(fields["order"]), float(fields["alpha"]), counts)


def train(
    corpus: Iterable[Score], order: int = DEFAULT_ORDER, alpha: float = DEFAULT_ALPHA
) -> NgramModel:
    sequences = []
    for i, score in enumerate(corpus):
        report = validate(score.tokens())
        if not report.valid:
            raise InvalidScore(report, f"corpus piece {i} does not validate")
        sequences.extend(line_symbols(units) for units in score.iter_lines())
    if not sequences:
        raise EmptyCorpus("cannot train on an empty corpus")
    return NgramModel(order, alpha, count_ngrams(sequences, order))


@dataclass(frozen=True, slots=True)
class LineReport:
    first_ok: bool
    last_ok_before_patch: bool
    last_ok: bool
    retries: int
    patched: bool
    fallback: bool


@dataclass(frozen=True)
class Generation:
    score: Score
    lines: tuple[LineReport, ...]

    @property
    def text(self) -> str:
        return serialize(self.score)


class _LineSampler:
    def __init__(self, model: NgramModel, rng: random.Random, head: int):
        self.model = model
        self.rng = rng
        self.head = head  # symbol the model sees for unit 0
        self.units: list[int] = []
        self.history: list[int] = []

    def reset(self, units: Sequence[int]) -> None:
        self.units = []
        self.history = [BOL] * max(self.model.order - 1, 0)
        for u in units:
            self._push(u)

    def _push(self, u: int) -> None:
        n = len(self.units)
        if n and n % UNITS_PER_MEASURE == 0:
            self.history.append(BAR)
        self.units.append(u)
        self.history.append(self.head if n == 0 else u)

    def fill(self, total: int) -> None:
        while len(self.units) < total:
            self._push(self.model.sample_unit(self.history, self.rng))


def last_onset_index(units: Sequence[int]) -> int:
    for i in range(len(units) - 1, -1, -1):
        if is_onset(units[i]):
            return i
    return -1


def _patch_last(units: list[int], last: int) -> None:
    i = last_onset_index(units)
    if i <= 0:
        units[-1] = last
        return
    old_cont = units[i] + CONTINUATION_OFFSET
    units[i] = last
    j = i + 1
    while j < len(units) and units[j] == old_cont:
        units[j] = last + CONTINUATION_OFFSET
        j += 1


def generate_line(
    model: NgramModel, prompt: LinePrompt, rng: random.Random, max_retries: int
) -> tuple[list[int], LineReport]:
    total = prompt.measures * UNITS_PER_MEASURE
    onsets = model.onsets
    fallback = bool(onsets) and (
        prompt.first_onset not in onsets or prompt.last_onset not in onsets
    )
    head = prompt.first_onset
    if onsets and head not in onsets:
        head = model.nearest_onset(head)
    sampler = _LineSampler(model, rng, head)
    sampler.reset([prompt.first_onset])
    sampler.fill(total)
    units = sampler.units

    def last_ok(us):
        return us[last_onset_index(us)] == prompt.last_onset

    ok_before = last_ok(units)
    retries = 0
    if not ok_before and prompt.last_onset in onsets:
        start = max(last_onset_index(units), 1)
        prefix = units[:start]
        while retries < max_retries:
            retries += 1
            sampler.reset(prefix)
            sampler.fill(total)
            units = sampler.units
            if last_ok(units):
                break
    units = list(units)
    patched = False
    if not last_ok(units):
        _patch_last(units, prompt.last_onset)
        patched = True
    report = LineReport(
        first_ok=units[0] == prompt.first_onset,
        last_ok_before_patch=ok_before,
        last_ok=last_ok(units),
        retries=retries,
        patched=patched,
        fallback=fallback,
    )
    return units, report


def generate(
    model: NgramModel,
    prompt: PromptSpec,
    seed: int | str = 0,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> Generation:
    """Sample one piece that follows ``prompt`` line by line.

    The first unit of each line is the prompt's first onset.  If the sampled
    line does not end on a note starting with the prompt's last onset, the
    final note is resampled up to ``max_retries`` times and then overwritten.
    """
    rng = random.Random(seed)
    lines, reports = [], []
    for lp in prompt.lines:
        units, report = generate_line(model, lp, rng, max_retries)
        lines.append(units)
        reports.append(report)
    return Generation(Score.from_units(lines), tuple(reports))


def synthetic_truncation(score: Score, rng: random.Random) -> str:
    """Serialize ``score`` cut after a random number of units.

    Produces SYNTHETIC incomplete sequences for exercising the validator; it
    is not a model of how any real decoder stops.
    """
    tokens = score.tokens()
    # cut points that leave the final kept line short of a full measure
    cuts = []
    seen: Counter = Counter()
    for k, (line, _) in enumerate(tokens[:-1], 1):
        seen[line] += 1
        if seen[line] % UNITS_PER_MEASURE:
            cuts.append(k)
    keep = rng.choice(cuts)
    rows: dict[int, list[str]] = {}
    for line, code in tokens[:keep]:
        rows.setdefault(line, []).append(f"{code:02X}")
    return "".join(" ".join(rows[i]) + "\n" for i in sorted(rows))
