import random
import subprocess
import sys

import pytest

from conftest import random_ynote_text

from hnote.cli import run
from hnote.core import Note, emit_tokens, serialize

WHOLE = serialize(emit_tokens([Note(60, 32)]))


@pytest.fixture
def whole_file(tmp_path):
    p = tmp_path / "whole.hnote"
    p.write_text(WHOLE)
    return p


def test_validate_whole_note(whole_file, capsys):
    assert run(["validate", str(whole_file)]) == 0
    out = capsys.readouterr().out
    assert "1/1 valid (100.0%)" in out


def test_validate_failure_exit_1(tmp_path, whole_file, capsys):
    bad = tmp_path / "bad.hnote"
    bad.write_text("BC BC\n")
    assert run(["validate", str(whole_file), str(bad)]) == 1
    out = capsys.readouterr().out
    assert "1/2 valid (50.0%)" in out
    assert "OrphanContinuation" in out and "IncompleteMeasure" in out


def test_validate_csv(tmp_path, whole_file, capsys):
    bad = tmp_path / "bad.hnote"
    bad.write_text("3C XX\n")
    assert run(["--format", "csv", "validate", str(bad), str(whole_file)]) == 1
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "file,valid,errors,categories"
    assert lines[1].endswith(",0,1,InvalidToken")
    assert lines[2].endswith(",1,0,")


def test_usage_errors(capsys):
    assert run([]) == 2
    assert run(["validate"]) == 2
    assert run(["--bogus", "stats", "."]) == 2
    assert run(["convert", "x", "--from", "abc", "--to", "hnote"]) == 2
    assert run(["dataset", "build", "--corpus", "a", "--out", "b", "--split", "0.5,0.7"]) == 2
    err = capsys.readouterr().err
    assert "usage:" in err


def test_convert_round_trip(tmp_path, capsys):
    src = tmp_path / "song.ynote"
    src.write_text(random_ynote_text(random.Random(4)))
    hn = tmp_path / "song.hnote"
    back = tmp_path / "back.ynote"
    assert run(["convert", "--from", "ynote", "--to", "hnote", str(src), "-o", str(hn)]) == 0
    assert run(["convert", "--from", "hnote", "--to", "ynote", str(hn), "-o", str(back)]) == 0
    assert back.read_bytes() == src.read_bytes()
    assert run(["convert", "--from", "ynote", "--to", "hnote", str(src)]) == 0
    assert capsys.readouterr().out == hn.read_text()


def test_convert_merge_ties_and_errors(tmp_path, capsys):
    src = tmp_path / "t.ynote"
    src.write_text("3C04 3C04\n")
    assert run(["convert", "--from", "ynote", "--to", "hnote", "--merge-ties", str(src)]) == 0
    out = capsys.readouterr().out
    assert " | BC " in out and "3C" not in out.split("|")[1]
    src.write_text("3C01\n")
    assert run(["convert", "--from", "ynote", "--to", "hnote", str(src)]) == 1
    assert "multiple of 32" in capsys.readouterr().err


def test_duration_table_flag(tmp_path, capsys):
    table = tmp_path / "table.txt"
    table.write_text("02=16\nAA=32\n")
    src = tmp_path / "t.ynote"
    src.write_text("40AA\n")
    assert run(["--duration-table", str(table), "convert", "--from", "ynote", "--to", "hnote", str(src)]) == 0
    assert capsys.readouterr().out.startswith("40 C0")
    # globals are accepted after the subcommand too
    assert run(["convert", "--from", "ynote", "--to", "hnote", str(src), "--duration-table", str(table)]) == 0


def _corpus(path, n, seed=0):
    path.mkdir()
    rng = random.Random(seed)
    for i in range(n):
        (path / f"s{i:02d}.ynote").write_text(random_ynote_text(rng))
    return path


def test_full_pipeline(tmp_path, capsys):
    corpus = _corpus(tmp_path / "corpus", 10)
    data = tmp_path / "data"
    assert run(["--seed", "3", "dataset", "build", "--corpus", str(corpus), "--out", str(data),
                "--split", "0.8,0.2"]) == 0
    assert len((data / "train.jsonl").read_text().splitlines()) == 8
    model = tmp_path / "model.txt"
    assert run(["ngram", "train", "--corpus", str(data / "train.jsonl"), "--out", str(model)]) == 0
    gen = tmp_path / "gen"
    assert run(["--seed", "1", "ngram", "generate", "--model", str(model), "--prompts",
                str(data / "eval.jsonl"), "--out", str(gen), "--per-prompt", "3"]) == 0
    assert len(list(gen.glob("*.hnote"))) == 6
    assert (gen / "constraints.csv").read_text().startswith("id,line,first_ok")
    refs = tmp_path / "refs"
    refs.mkdir()
    for line in (corpus).glob("*.ynote"):
        assert run(["convert", "--from", "ynote", "--to", "hnote", str(line),
                    "-o", str(refs / f"{line.stem}.hnote")]) == 0
    capsys.readouterr()
    assert run(["score", "--generated", str(gen), "--references", str(refs),
                "--out", str(tmp_path / "report")]) == 0
    out = capsys.readouterr().out
    assert "/6 valid (" in out.splitlines()[0]
    assert (tmp_path / "report" / "scores.csv").exists()
    assert run(["--format", "csv", "score", "--generated", str(gen), "--references", str(refs)]) == 0
    assert capsys.readouterr().out.startswith("id,bleu1")
    assert run(["stats", str(refs)]) == 0
    assert "pieces: 10" in capsys.readouterr().out


def test_generate_deterministic_with_seed(tmp_path):
    corpus = _corpus(tmp_path / "corpus", 6)
    data = tmp_path / "data"
    run(["dataset", "build", "--corpus", str(corpus), "--out", str(data), "--split", "0.5,0.5"])
    model = tmp_path / "m.txt"
    run(["ngram", "train", "--corpus", str(corpus), "--out", str(model)])
    outs = []
    for name in ("a", "b"):
        run(["--seed", "9", "--quiet", "ngram", "generate", "--model", str(model), "--prompts",
             str(data / "eval.jsonl"), "--out", str(tmp_path / name), "--truncate-rate", "0.5"])
        outs.append({p.name: p.read_bytes() for p in sorted((tmp_path / name).iterdir())})
    assert outs[0] == outs[1]


def test_score_missing_reference(tmp_path, whole_file, capsys):
    gen = whole_file.parent
    refs = tmp_path / "refs"
    refs.mkdir()
    assert run(["score", "--generated", str(gen), "--references", str(refs)]) == 1
    assert "missing reference for whole" in capsys.readouterr().err


def test_score_header_line(tmp_path, capsys):
    gen, refs = tmp_path / "gen", tmp_path / "refs"
    gen.mkdir()
    refs.mkdir()
    (refs / "r.hnote").write_text(WHOLE)
    for i in range(1100):
        (gen / f"r__g{i:04d}.hnote").write_text(WHOLE if i < 908 else "3C\n")
    assert run(["score", "--generated", str(gen), "--references", str(refs)]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "908/1100 valid (82.5%)"


def test_export_midi(tmp_path, whole_file):
    out = tmp_path / "o.mid"
    assert run(["export-midi", str(whole_file), "-o", str(out), "--ppq", "96", "--tempo-bpm", "120"]) == 0
    data = out.read_bytes()
    assert data[:4] == b"MThd" and data[12:14] == b"\x00\x60"
    assert run(["export-midi", str(whole_file), "-o", str(out), "--ppq", "100"]) == 1


def test_stats_csv_and_rejects(tmp_path, whole_file, capsys):
    (tmp_path / "bad.hnote").write_text("3C\n")
    assert run(["--format", "csv", "stats", str(tmp_path)]) == 1
    assert capsys.readouterr().out.startswith("id,split,lines,measures,units,notes,source_units\n")


def test_module_entry_point(whole_file):
    proc = subprocess.run([sys.executable, "-m", "hnote", "validate", str(whole_file)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "1/1 valid (100.0%)" in proc.stdout
