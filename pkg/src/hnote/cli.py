"""``hnote`` command-line entry point.

Exit codes: 0 success, 1 validation or data failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import random
import sys
from pathlib import Path

from . import __version__
from .core import check_text, parse_score, serialize
from .corpus import (
    _csv_text,
    build_dataset,
    corpus_stats,
    parse_prompt,
    read_jsonl,
    extract_prompts,
    score_generated,
    write_atomic,
)
from .errors import HNoteError
from .metrics import BLEU_MODES, correctness_rate
from .midi import ExportConfig, export_midi
from .ngram import (
    DEFAULT_ALPHA,
    DEFAULT_MAX_RETRIES,
    DEFAULT_ORDER,
    NgramModel,
    generate,
    synthetic_truncation,
    train,
)
from .ynote import DEFAULT_TABLE, DurationTable, hnote_to_ynote, parse_ynote, serialize_ynote, ynote_to_hnote

log = logging.getLogger("hnote")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _split(text: str) -> tuple[float, float]:
    try:
        parts = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad split {text!r}") from None
    if len(parts) != 2 or any(p < 0 for p in parts) or abs(sum(parts) - 1) > 1e-9:
        raise argparse.ArgumentTypeError("split must be two ratios summing to 1, e.g. 0.9,0.1")
    return parts


def _add_globals(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # subcommands repeat the globals with SUPPRESS so they never clobber a value
    # given before the subcommand name
    def default(value):
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--seed", type=int, default=default(0))
    parser.add_argument("--duration-table", type=Path, metavar="PATH", default=default(None))
    parser.add_argument("--quiet", action="store_true", default=default(False))
    parser.add_argument("--format", choices=("text", "csv"), default=default("text"))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hnote", description="HNote codec, converter and evaluation tools")
    _add_globals(p, suppress=False)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="validate .hnote files")
    v.add_argument("files", nargs="+", type=Path)

    c = sub.add_parser("convert", help="convert between YNote and HNote")
    c.add_argument("input", type=Path)
    c.add_argument("--from", dest="src", choices=("ynote", "hnote"), required=True)
    c.add_argument("--to", dest="dst", choices=("ynote", "hnote"), required=True)
    c.add_argument("-o", "--output", type=Path)
    c.add_argument("--merge-ties", action="store_true",
                   help="sustain repeated same-pitch tokens (one-way)")

    d = sub.add_parser("dataset", help="dataset construction")
    dsub = d.add_subparsers(dest="action", required=True, parser_class=_Parser)
    db = dsub.add_parser("build")
    db.add_argument("--corpus", type=Path, required=True)
    db.add_argument("--out", type=Path, required=True)
    db.add_argument("--split", type=_split, default=(0.9, 0.1))

    n = sub.add_parser("ngram", help="n-gram baseline generator")
    nsub = n.add_subparsers(dest="action", required=True, parser_class=_Parser)
    nt = nsub.add_parser("train")
    nt.add_argument("--corpus", type=Path, required=True,
                    help="directory of .hnote/.ynote files or a dataset .jsonl")
    nt.add_argument("--out", type=Path, required=True)
    nt.add_argument("--order", type=int, default=DEFAULT_ORDER)
    nt.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    ng = nsub.add_parser("generate")
    ng.add_argument("--model", type=Path, required=True)
    ng.add_argument("--prompts", type=Path, required=True,
                    help="dataset .jsonl or directory of reference .hnote files")
    ng.add_argument("--out", type=Path, required=True)
    ng.add_argument("--per-prompt", type=int, default=1)
    ng.add_argument("--max-retries", type=int, default=DEFAULT_MAX_RETRIES)
    ng.add_argument("--truncate-rate", type=float, default=0.0,
                    help="fraction of outputs cut short (synthetic incomplete sequences)")

    s = sub.add_parser("score", help="validate and score generated pieces")
    s.add_argument("--generated", type=Path, required=True)
    s.add_argument("--references", type=Path, required=True)
    s.add_argument("--bleu-mode", choices=BLEU_MODES, default="individual")
    s.add_argument("--out", type=Path, help="also write report.txt and scores.csv here")

    m = sub.add_parser("export-midi", help="render an .hnote file to MIDI")
    m.add_argument("input", type=Path)
    m.add_argument("-o", "--output", type=Path, required=True)
    m.add_argument("--ppq", type=int, default=480)
    m.add_argument("--tempo-bpm", type=float, default=60.0)
    m.add_argument("--velocity", type=int, default=90)
    m.add_argument("--channel", type=int, default=0)
    m.add_argument("--program", type=int, default=0)

    st = sub.add_parser("stats", help="corpus statistics")
    st.add_argument("directory", type=Path)

    for sp in (v, c, db, nt, ng, s, m, st):
        _add_globals(sp, suppress=True)
    return p


def _emit(text: str, out: Path | None = None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        write_atomic(out, text)


def _table(args) -> DurationTable:
    return DurationTable.load(args.duration_table) if args.duration_table else DEFAULT_TABLE


def cmd_validate(args) -> int:
    reports = []
    rows = []
    for path in sorted(args.files):
        try:
            report = check_text(path.read_text(encoding="utf-8"))
        except (OSError, UnicodeDecodeError) as exc:
            print(f"{path}: cannot read: {exc}", file=sys.stderr)
            return EXIT_INVALID
        reports.append(report)
        rows.append((path, report))
    summary = correctness_rate(reports)
    if args.format == "csv":
        _emit(_csv_text(
            ["file", "valid", "errors", "categories"],
            ([str(p), int(r.valid), len(r.errors), ";".join(sorted(map(str, r.categories())))]
             for p, r in rows),
        ))
    else:
        out = []
        for path, report in rows:
            if report.valid:
                if not args.quiet:
                    out.append(f"{path}: ok")
            else:
                out.append(f"{path}: INVALID ({len(report.errors)} errors)")
                if not args.quiet:
                    out.extend(f"  {e}" for e in report.errors)
        out.append(summary.summary())
        for cat, count in summary.error_histogram.items():
            out.append(f"  {cat}: {count}")
        _emit("\n".join(out) + "\n")
    return EXIT_OK if summary.valid == summary.total else EXIT_INVALID


def cmd_convert(args) -> int:
    table = _table(args)
    text = args.input.read_text(encoding="utf-8")
    if args.src == args.dst:
        if args.src == "hnote":
            result = serialize(parse_score(text))
        else:
            result = serialize_ynote(parse_ynote(text, table))
    elif args.src == "ynote":
        result = serialize(ynote_to_hnote(parse_ynote(text, table), merge_ties=args.merge_ties))
    else:
        result = serialize_ynote(hnote_to_ynote(parse_score(text), table))
    _emit(result, args.output)
    return EXIT_OK


def cmd_dataset(args) -> int:
    result = build_dataset(args.corpus, args.out, _table(args), args.split, args.seed)
    stats = result.stats
    if not args.quiet:
        print(f"train: {len(result.train)}  eval: {len(result.eval)}  rejects: {len(stats.rejects)}")
    for name, reason in stats.rejects:
        print(f"rejected {name}: {reason}", file=sys.stderr)
    return EXIT_INVALID if stats.rejects else EXIT_OK


def _load_corpus(path: Path, table: DurationTable):
    if path.is_file() and path.suffix == ".jsonl":
        return [parse_score(r.completion) for r in read_jsonl(path)]
    scores = []
    for p in sorted(path.iterdir()):
        if p.suffix == ".hnote":
            scores.append(parse_score(p.read_text(encoding="utf-8")))
        elif p.suffix == ".ynote":
            scores.append(ynote_to_hnote(parse_ynote(p.read_text(encoding="utf-8"), table)))
    return scores


def _load_prompts(path: Path):
    if path.is_file() and path.suffix == ".jsonl":
        return [(r.id, parse_prompt(r.prompt)) for r in read_jsonl(path)]
    return [
        (p.stem, extract_prompts(parse_score(p.read_text(encoding="utf-8"))))
        for p in sorted(path.glob("*.hnote"))
    ]


def cmd_ngram(args) -> int:
    if args.action == "train":
        model = train(_load_corpus(args.corpus, _table(args)), args.order, args.alpha)
        write_atomic(args.out, model.dumps())
        if not args.quiet:
            print(f"trained order-{model.order} model, {len(model.counts)} contexts")
        return EXIT_OK

    model = NgramModel.loads(args.model.read_text(encoding="utf-8"))
    prompts = _load_prompts(args.prompts)
    trunc_rng = random.Random(f"{args.seed}:truncate")
    rows = []
    for pid, spec in prompts:
        for k in range(args.per_prompt):
            name = pid if args.per_prompt == 1 else f"{pid}__g{k}"
            gen = generate(model, spec, seed=f"{args.seed}:{name}", max_retries=args.max_retries)
            text = gen.text
            truncated = args.truncate_rate > 0 and trunc_rng.random() < args.truncate_rate
            if truncated:
                text = synthetic_truncation(gen.score, trunc_rng)
            write_atomic(args.out / f"{name}.hnote", text)
            for i, lr in enumerate(gen.lines):
                rows.append([name, i, int(lr.first_ok), int(lr.last_ok_before_patch),
                             int(lr.last_ok), lr.retries, int(lr.patched), int(lr.fallback),
                             int(truncated)])
    write_atomic(args.out / "constraints.csv", _csv_text(
        ["id", "line", "first_ok", "last_ok_before_patch", "last_ok", "retries",
         "patched", "fallback", "synthetic_truncation"], rows))
    if not args.quiet:
        n = len(rows)
        pre = sum(r[3] for r in rows)
        print(f"generated {len(prompts) * args.per_prompt} pieces; "
              f"last-note constraint met before patching on {pre}/{n} lines")
    return EXIT_OK


def cmd_score(args) -> int:
    report = score_generated(args.generated, args.references, args.bleu_mode, strict=False)
    text = report.to_csv() if args.format == "csv" else report.tables_text()
    _emit(text)
    if args.out:
        write_atomic(args.out / "report.txt", report.tables_text())
        write_atomic(args.out / "scores.csv", report.to_csv())
    for pid in report.missing:
        print(f"missing reference for {pid}", file=sys.stderr)
    return EXIT_INVALID if report.missing else EXIT_OK


def cmd_export_midi(args) -> int:
    config = ExportConfig.from_bpm(args.tempo_bpm, ppq=args.ppq, velocity=args.velocity,
                                   channel=args.channel, program=args.program)
    score = parse_score(args.input.read_text(encoding="utf-8"))
    data = export_midi(score, config)
    args.output.parent.mkdir(parents=True, exist_ok=True)
    args.output.write_bytes(data)
    return EXIT_OK


def cmd_stats(args) -> int:
    stats = corpus_stats(args.directory, _table(args))
    _emit(stats.to_csv() if args.format == "csv" else stats.to_text())
    return EXIT_INVALID if stats.rejects else EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "convert": cmd_convert,
    "dataset": cmd_dataset,
    "ngram": cmd_ngram,
    "score": cmd_score,
    "export-midi": cmd_export_midi,
    "stats": cmd_stats,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (HNoteError, ValueError) as exc:
        print(f"hnote: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"hnote: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
