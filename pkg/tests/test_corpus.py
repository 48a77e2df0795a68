import json
import random

import pytest

from conftest import random_score, random_ynote_text
from oracles import note_runs

from hnote.core import ErrorCategory, Note, Score, emit_tokens, parse_score, serialize, validate
from hnote.corpus import (
    DatasetRecord,
    LinePrompt,
    PromptSpec,
    build_dataset,
    corpus_stats,
    extract_prompts,
    parse_prompt,
    read_jsonl,
    score_generated,
    write_atomic,
)
from hnote.errors import InvalidScore, MissingReference
from hnote.ynote import parse_ynote


def make_corpus(path, n, seed=0, bad=()):
    path.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    for i in range(n):
        text = random_ynote_text(rng)
        if i in bad:
            text = "3C01\n"  # not bar aligned
        (path / f"song{i:03d}.ynote").write_text(text)
    return path


def test_prompt_three_c_one_g():
    score = emit_tokens([Note(60, 8)] * 3 + [Note(67, 8)])
    spec = extract_prompts(score)
    runs = note_runs(score.line_units(0))
    assert (runs[0][0], runs[-1][0]) == (0x3C, 0x43)
    assert spec.lines == (LinePrompt(0x3C, 0x43, 1),)
    assert spec.render() == "L0: first=3C last=43 measures=1"


def test_prompt_single_whole_note():
    spec = extract_prompts(emit_tokens([Note(0x45, 32)]))
    assert spec.lines[0].first_onset == spec.lines[0].last_onset == 0x45


def test_prompt_last_note_tied_into_final_measure():
    score = emit_tokens([Note(60, 24), Note(64, 16), Note(67, 24)])
    assert note_runs(score.line_units(0))[-1] == (67, 24)
    spec = extract_prompts(score)
    assert spec.lines[0] == LinePrompt(0x3C, 0x43, 2)


def test_prompt_multi_line_and_rest():
    score = emit_tokens([Note(0, 16, (0, 0, 0)), Note(60, 16, (0, 0, 0)), Note(62, 64, (1, 0, 0))])
    spec = extract_prompts(score)
    assert spec.render() == "L0: first=00 last=3C measures=1\nL1: first=3E last=3E measures=2"
    assert parse_prompt(spec.render()) == spec
    assert spec.line_measure_counts == (1, 2)


def test_prompt_invalid_score():
    with pytest.raises(InvalidScore):
        extract_prompts(Score.from_units([[0x3C] + [0xC0] * 31]))


@pytest.mark.parametrize("bad", ["", "L1: first=3C last=3C measures=1", "L0: first=3c last=3C measures=1",
                                 "L0: first=3C last=3C measures=0", "L0: first=8C last=3C measures=1"])
def test_parse_prompt_rejects(bad):
    with pytest.raises(ValueError):
        parse_prompt(bad)


def test_build_dataset_split_and_determinism(tmp_path):
    corpus = make_corpus(tmp_path / "corpus", 10)
    a = build_dataset(corpus, tmp_path / "a", split=(0.8, 0.2), seed=7)
    b = build_dataset(corpus, tmp_path / "b", split=(0.8, 0.2), seed=7)
    assert (len(a.train), len(a.eval)) == (8, 2)
    for name in ("train.jsonl", "eval.jsonl", "stats.txt", "stats.csv", "rejects.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ids = {r.id for r in a.train} | {r.id for r in a.eval}
    assert len(ids) == 10
    assert not list(tmp_path.glob("a/.*.tmp"))


def test_build_dataset_rejects(tmp_path):
    corpus = make_corpus(tmp_path / "corpus", 6, bad={2})
    result = build_dataset(corpus, tmp_path / "out", split=(0.5, 0.5))
    assert len(result.train) + len(result.eval) == 5
    assert [name for name, _ in result.stats.rejects] == ["song002.ynote"]
    rejects = (tmp_path / "out" / "rejects.csv").read_text().splitlines()
    assert rejects[0] == "file,error" and rejects[1].startswith("song002.ynote,")


def test_dataset_records_self_consistent(tmp_path):
    corpus = make_corpus(tmp_path / "corpus", 12, seed=3)
    build_dataset(corpus, tmp_path / "out", split=(0.75, 0.25), seed=1)
    records = read_jsonl(tmp_path / "out" / "train.jsonl") + read_jsonl(tmp_path / "out" / "eval.jsonl")
    assert len(records) == 12
    for raw in (tmp_path / "out" / "train.jsonl").read_text().splitlines():
        assert list(json.loads(raw)) == ["id", "prompt", "completion"]
    for rec in records:
        score = parse_score(rec.completion)
        assert validate(score.tokens()).valid
        assert extract_prompts(score).render() == rec.prompt
        assert serialize(score) == rec.completion


def test_unit_conservation_through_pipeline(tmp_path):
    corpus = make_corpus(tmp_path / "corpus", 5, seed=9)
    result = build_dataset(corpus, tmp_path / "out", split=(0.6, 0.4))
    records = {r.id: r for r in result.train + result.eval}
    for ps in result.stats.pieces:
        source = sum(t.units for _, t in parse_ynote((corpus / f"{ps.id}.ynote").read_text()))
        assert ps.source_units == source == ps.units
        assert parse_score(records[ps.id].completion).unit_count == source
    totals = result.stats.totals
    assert totals["units"] == sum(p.units for p in result.stats.pieces)
    assert sum(result.stats.pitch_histogram.values()) == totals["notes"]


def test_build_dataset_bad_inputs(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(FileNotFoundError):
        build_dataset(tmp_path / "empty")
    corpus = make_corpus(tmp_path / "c", 2)
    with pytest.raises(ValueError):
        build_dataset(corpus, split=(0.5, 0.6))


def test_corpus_stats_mixed_dir(tmp_path):
    d = tmp_path / "d"
    d.mkdir()
    (d / "a.hnote").write_text(serialize(emit_tokens([Note(60, 32)])))
    (d / "b.ynote").write_text("4002 4202\n")
    (d / "c.hnote").write_text("3C BC\n")
    (d / "notes.txt").write_text("ignored")
    stats = corpus_stats(d)
    assert stats.totals["pieces"] == 2
    assert stats.totals["measures"] == 2
    assert [r for r, _ in stats.rejects] == ["c.hnote"]
    assert stats.pitch_histogram == {60: 1, 0x40: 1, 0x42: 1}
    assert "3C   C4 1" in stats.to_text()


def test_write_atomic_replaces(tmp_path):
    target = tmp_path / "sub" / "f.txt"
    write_atomic(target, "one")
    write_atomic(target, "two")
    assert target.read_text() == "two"
    assert [p.name for p in target.parent.iterdir()] == ["f.txt"]


def test_record_json_round_trip():
    rec = DatasetRecord("x", "L0: first=3C last=3C measures=1", "3C\n")
    assert DatasetRecord.from_json(rec.to_json()) == rec


# --- scoring -------------------------------------------------------------------


def _write(path, score_or_text):
    path.write_text(score_or_text if isinstance(score_or_text, str) else serialize(score_or_text))


def test_score_generated_identity_and_invalid(tmp_path):
    gen, ref = tmp_path / "gen", tmp_path / "ref"
    gen.mkdir()
    ref.mkdir()
    rng = random.Random(2)
    pieces = {f"p{i}": random_score(rng) for i in range(3)}
    for pid, score in pieces.items():
        _write(ref / f"{pid}.hnote", score)
    _write(gen / "p0.hnote", pieces["p0"])
    _write(gen / "p1__g0.hnote", pieces["p2"])
    _write(gen / "p2.hnote", "3C BC BC\n")
    report = score_generated(gen, ref)
    assert report.correctness.summary() == "2/3 valid (66.7%)"
    assert report.correctness.error_histogram == {ErrorCategory.INCOMPLETE_MEASURE: 1}
    rows = dict(report.rows)
    assert set(rows) == {"p0", "p1__g0"}
    s = rows["p0"]
    assert s.bleu == (1.0,) * 4 and s.rouge_n == (1.0, 1.0) and s.rouge_l.f1 == 1.0
    assert [pid for pid, _ in report.invalid] == ["p2"]
    text = report.tables_text()
    assert text.splitlines()[0] == "2/3 valid (66.7%)"
    assert "1-gram  2-gram  3-gram  4-gram" in text and "ROUGE-L" in text
    csv_lines = report.to_csv().splitlines()
    assert csv_lines[0].startswith("id,bleu1,bleu2,bleu3,bleu4,brevity_penalty,rouge1")
    assert csv_lines[1].startswith("p0,1.000000")


def test_score_generated_missing_reference(tmp_path):
    gen, ref = tmp_path / "gen", tmp_path / "ref"
    gen.mkdir()
    ref.mkdir()
    _write(gen / "lonely.hnote", emit_tokens([Note(60, 32)]))
    with pytest.raises(MissingReference) as info:
        score_generated(gen, ref)
    assert info.value.ids == ("lonely",)
    report = score_generated(gen, ref, strict=False)
    assert report.missing == ["lonely"] and report.rows == []


def test_score_generated_empty(tmp_path):
    (tmp_path / "gen").mkdir()
    report = score_generated(tmp_path / "gen", {})
    assert report.correctness.total == 0 and not report.correctness.defined
    assert report.tables_text().startswith("0/0 valid (n/a)")


def test_score_generated_908_of_1100(tmp_path):
    gen, ref = tmp_path / "gen", tmp_path / "ref"
    gen.mkdir()
    ref.mkdir()
    good = serialize(emit_tokens([Note(60, 32)]))
    _write(ref / "r.hnote", good)
    for i in range(1100):
        _write(gen / f"r__g{i:04d}.hnote", good if i < 908 else "3C BC\n")
    report = score_generated(gen, ref)
    assert report.correctness.summary() == "908/1100 valid (82.5%)"
    assert len(report.rows) == 908


def test_prompt_spec_is_value_type():
    assert PromptSpec((LinePrompt(1, 2, 3),)) == PromptSpec((LinePrompt(1, 2, 3),))
