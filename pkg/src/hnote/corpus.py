"""Dataset construction, prompt extraction and scoring of generated pieces."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import random
import re
import tempfile
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .core import (
    Score,
    assemble_notes,
    check_text,
    parse_score,
    pitch_name,
    serialize,
    tokenize,
)
from .errors import HNoteError, MissingReference
from .metrics import (
    CorrectnessReport,
    MetricScores,
    correctness_rate,
    score_pair,
)
from .ynote import DEFAULT_TABLE, DurationTable, parse_ynote, ynote_to_hnote

log = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class LinePrompt:
    first_onset: int
    last_onset: int
    measures: int


@dataclass(frozen=True, slots=True)
class PromptSpec:
    lines: tuple[LinePrompt, ...]

    @property
    def line_measure_counts(self) -> tuple[int, ...]:
        return tuple(p.measures for p in self.lines)

    def render(self) -> str:
        return "\n".join(
            f"L{i}: first={p.first_onset:02X} last={p.last_onset:02X} measures={p.measures}"
            for i, p in enumerate(self.lines)
        )


_PROMPT_LINE = re.compile(
    r"L(\d+): first=([0-7][0-9A-F]) last=([0-7][0-9A-F]) measures=([1-9]\d*)"
)


def parse_prompt(text: str) -> PromptSpec:
    lines = []
    for i, raw in enumerate(text.strip().splitlines()):
        m = _PROMPT_LINE.fullmatch(raw.strip())
        if m is None or int(m.group(1)) != i:
            raise ValueError(f"bad prompt line {i}: {raw!r}")
        lines.append(LinePrompt(int(m.group(2), 16), int(m.group(3), 16), int(m.group(4))))
    if not lines:
        raise ValueError("empty prompt")
    return PromptSpec(tuple(lines))


def extract_prompts(score: Score) -> PromptSpec:
    """First and last note onset of each line plus its measure count."""
    notes = assemble_notes(score)
    per_line: dict[int, list[int]] = {}
    for note in notes:
        per_line.setdefault(note.line, []).append(note.pitch)
    return PromptSpec(
        tuple(
            LinePrompt(per_line[i][0], per_line[i][-1], len(line))
            for i, line in enumerate(score.lines)
        )
    )


# --- file helpers -------------------------------------------------------------


def write_atomic(path: Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: list[str], rows: Iterable[Iterable]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


# --- dataset -----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class DatasetRecord:
    id: str
    prompt: str
    completion: str

    def to_json(self) -> str:
        return json.dumps(
            {"id": self.id, "prompt": self.prompt, "completion": self.completion},
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "DatasetRecord":
        obj = json.loads(line)
        return cls(obj["id"], obj["prompt"], obj["completion"])


def make_record(piece_id: str, score: Score) -> DatasetRecord:
    return DatasetRecord(piece_id, extract_prompts(score).render(), serialize(score))


def read_jsonl(path: str | Path) -> list[DatasetRecord]:
    text = Path(path).read_text(encoding="utf-8")
    return [DatasetRecord.from_json(line) for line in text.splitlines() if line.strip()]


@dataclass
class PieceStats:
    id: str
    lines: int
    measures: int
    units: int
    notes: int
    source_units: int | None = None
    split: str = ""


@dataclass
class CorpusStats:
    pieces: list[PieceStats] = field(default_factory=list)
    pitch_histogram: Counter = field(default_factory=Counter)
    rejects: list[tuple[str, str]] = field(default_factory=list)

    def add(self, piece_id: str, score: Score, source_units: int | None = None) -> PieceStats:
        notes = assemble_notes(score)
        self.pitch_histogram.update(n.pitch for n in notes)
        ps = PieceStats(
            piece_id, len(score.lines), score.measure_count, score.unit_count, len(notes), source_units
        )
        self.pieces.append(ps)
        return ps

    @property
    def totals(self) -> dict[str, int]:
        return {
            "pieces": len(self.pieces),
            "lines": sum(p.lines for p in self.pieces),
            "measures": sum(p.measures for p in self.pieces),
            "units": sum(p.units for p in self.pieces),
            "notes": sum(p.notes for p in self.pieces),
            "rejects": len(self.rejects),
        }

    def to_text(self) -> str:
        t = self.totals
        out = [f"{k}: {v}" for k, v in t.items()]
        out.append("pitch histogram:")
        for pitch in sorted(self.pitch_histogram):
            label = "rest" if pitch == 0 else pitch_name(pitch)
            out.append(f"  {pitch:02X} {label:>4} {self.pitch_histogram[pitch]}")
        for rid, reason in self.rejects:
            out.append(f"reject {rid}: {reason}")
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        header = ["id", "split", "lines", "measures", "units", "notes", "source_units"]
        rows = (
            [p.id, p.split, p.lines, p.measures, p.units, p.notes,
             "" if p.source_units is None else p.source_units]
            for p in self.pieces
        )
        return _csv_text(header, rows)

    def histogram_csv(self) -> str:
        rows = (
            [f"{p:02X}", "rest" if p == 0 else pitch_name(p), self.pitch_histogram[p]]
            for p in sorted(self.pitch_histogram)
        )
        return _csv_text(["code", "pitch", "notes"], rows)


@dataclass
class DatasetResult:
    train: list[DatasetRecord]
    eval: list[DatasetRecord]
    stats: CorpusStats


def split_counts(n: int, ratios: tuple[float, float]) -> tuple[int, int]:
    n_train = int(round(n * ratios[0]))
    return n_train, n - n_train


def _check_ratios(ratios) -> tuple[float, float]:
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 2 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split must be two non-negative ratios summing to 1: {ratios}")
    return ratios


def build_dataset(
    corpus_dir: str | Path,
    out_dir: str | Path | None = None,
    table: DurationTable = DEFAULT_TABLE,
    split: tuple[float, float] = (0.9, 0.1),
    seed: int = 0,
) -> DatasetResult:
    """Convert every ``*.ynote`` file and write train/eval JSONL plus reports.

    Files are read in sorted name order and shuffled with ``seed`` before the
    whole-piece split, so output is a pure function of the inputs.
    """
    split = _check_ratios(split)
    files = sorted(Path(corpus_dir).glob("*.ynote"))
    if not files:
        raise FileNotFoundError(f"no .ynote files in {corpus_dir}")
    stats = CorpusStats()
    records = []
    for path in files:
        try:
            tokens = parse_ynote(path.read_text(encoding="utf-8"), table)
            score = ynote_to_hnote(tokens)
        except (HNoteError, UnicodeDecodeError) as exc:
            stats.rejects.append((path.name, str(exc)))
            log.warning("rejected %s: %s", path.name, exc)
            continue
        record = make_record(path.stem, score)
        ps = stats.add(path.stem, score, sum(t.units for _, t in tokens))
        records.append((record, ps))

    order = list(range(len(records)))
    random.Random(seed).shuffle(order)
    n_train, _ = split_counts(len(records), split)
    train_idx = set(order[:n_train])
    train, evals = [], []
    for i, (record, ps) in enumerate(records):
        if i in train_idx:
            ps.split = "train"
            train.append(record)
        else:
            ps.split = "eval"
            evals.append(record)

    if out_dir is not None:
        out = Path(out_dir)
        write_atomic(out / "train.jsonl", "".join(r.to_json() + "\n" for r in train))
        write_atomic(out / "eval.jsonl", "".join(r.to_json() + "\n" for r in evals))
        write_atomic(out / "stats.txt", stats.to_text())
        write_atomic(out / "stats.csv", stats.to_csv())
        write_atomic(out / "pitch_histogram.csv", stats.histogram_csv())
        write_atomic(out / "rejects.csv", _csv_text(["file", "error"], stats.rejects))
    return DatasetResult(train, evals, stats)


def corpus_stats(directory: str | Path, table: DurationTable = DEFAULT_TABLE) -> CorpusStats:
    """Statistics over every ``.hnote`` and ``.ynote`` file in ``directory``."""
    stats = CorpusStats()
    paths = sorted(
        p for p in Path(directory).iterdir() if p.suffix in (".hnote", ".ynote") and p.is_file()
    )
    for path in paths:
        try:
            text = path.read_text(encoding="utf-8")
            if path.suffix == ".ynote":
                tokens = parse_ynote(text, table)
                stats.add(path.name, ynote_to_hnote(tokens), sum(t.units for _, t in tokens))
            else:
                stats.add(path.name, parse_score(text))
        except (HNoteError, UnicodeDecodeError) as exc:
            stats.rejects.append((path.name, str(exc)))
    return stats


# --- scoring generated output --------------------------------------------------


@dataclass
class ScoreReport:
    correctness: CorrectnessReport
    rows: list[tuple[str, MetricScores]]
    invalid: list[tuple[str, list[str]]] = field(default_factory=list)
    missing: list[str] = field(default_factory=list)

    def tables_text(self) -> str:
        """Two aligned tables: BLEU 1-4 and ROUGE-1/2/L(F1), one row per sample."""
        out = [self.correctness.summary()]
        if self.correctness.error_histogram:
            out.append(
                "errors: "
                + ", ".join(f"{c}={n}" for c, n in self.correctness.error_histogram.items())
            )
        width = max([len("sample")] + [len(i) for i, _ in self.rows])
        out.append("")
        out.append("BLEU")
        out.append(f"{'sample':<{width}}  1-gram  2-gram  3-gram  4-gram")
        for pid, s in self.rows:
            out.append(f"{pid:<{width}}  " + "  ".join(f"{v:6.3f}" for v in s.bleu))
        out.append("")
        out.append("ROUGE")
        out.append(f"{'sample':<{width}}  1-gram  2-gram  ROUGE-L")
        for pid, s in self.rows:
            vals = (*s.rouge_n, s.rouge_l.f1)
            out.append(f"{pid:<{width}}  {vals[0]:6.3f}  {vals[1]:6.3f}  {vals[2]:7.3f}")
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        header = [
            "id", "bleu1", "bleu2", "bleu3", "bleu4", "brevity_penalty",
            "rouge1", "rouge2", "rougeL_p", "rougeL_r", "rougeL_f1",
        ]
        rows = []
        for pid, s in self.rows:
            row = s.as_row()
            rows.append([pid] + [f"{row[h]:.6f}" for h in header[1:]])
        return _csv_text(header, rows)


def resolve_reference(piece_id: str, references: Mapping[str, Path]) -> Path | None:
    """Exact id match, else the part before ``__`` (``song__g3`` -> ``song``)."""
    if piece_id in references:
        return references[piece_id]
    base = piece_id.split("__", 1)[0]
    return references.get(base)


def reference_map(directory: str | Path) -> dict[str, Path]:
    return {p.stem: p for p in sorted(Path(directory).glob("*.hnote"))}


def score_generated(
    generated_dir: str | Path,
    references: Mapping[str, Path] | str | Path,
    mode: str = "individual",
    strict: bool = True,
) -> ScoreReport:
    """Validate every ``<id>.hnote`` and score the valid ones against references.

    Invalid pieces only count toward the correctness rate.  With ``strict``,
    any valid piece lacking a reference raises :class:`MissingReference`;
    otherwise the ids are listed in ``report.missing``.
    """
    if not isinstance(references, Mapping):
        references = reference_map(references)
    reports = []
    rows = []
    invalid = []
    missing = []
    for path in sorted(Path(generated_dir).glob("*.hnote")):
        text = path.read_text(encoding="utf-8")
        report = check_text(text)
        reports.append(report)
        if not report.valid:
            invalid.append((path.stem, [str(e) for e in report.errors]))
            continue
        ref_path = resolve_reference(path.stem, references)
        if ref_path is None:
            missing.append(path.stem)
            continue
        cand = [c for _, c in tokenize(text)]
        ref = [c for _, c in tokenize(Path(ref_path).read_text(encoding="utf-8"))]
        rows.append((path.stem, score_pair(cand, ref, mode)))
    if missing and strict:
        raise MissingReference(missing)
    return ScoreReport(correctness_rate(reports), rows, invalid, missing)

