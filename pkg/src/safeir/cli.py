"""Command-line interface.

    safeir parse FILE
    safeir print FILE [-o OUT]
    safeir instrument FILE [--mode MODE] [-o OUT] [--stats JSON]
    safeir run FILE [--mode MODE] [--entry NAME] [--json [OUT]]
    safeir stats FILE [--entry NAME] [--json]
    safeir gen-corpus --out DIR
    safeir evaluate [--corpus DIR] [--modes a,b,c] [--history DB]
    safeir history DB [--run ID [--mode MODE] | --case ID --mode MODE] [--limit N]
    safeir nofree-db compute FILE... [--save] | show | merge OTHER...

FILE is a path or ``fixture:NAME`` for a shipped fixture.

Exit codes: 0 success, 1 violation / diagnostics / failed acceptance bar,
2 usage or pipeline error, 3 interpreter timeout.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .analysis.dealloc_graph import compile_units, load_nofree_db, save_nofree_db
from .constants import (
    DEFAULT_GRANULE,
    INSTRUMENT_MODES,
    MODE_NONE,
    MODE_SAFEFFI,
    RUN_MODES,
    SIR_SUFFIX,
)
from .database import get_nofree_db_path
from .exceptions import SafeIRError
from .fixtures import fixture_text
from .harness import (
    collect_stats,
    evaluate_parity,
    format_stats,
    gen_corpus,
    load_corpus,
    write_corpus,
)
from .ir.module import ProgramModule
from .ir.validate import validate_module
from .parsers import ModuleValidationError, parse_module, print_module
from .passes import instrument
from .runtime import RuntimeConfig, Verdict, execute
from .utils.db_helpers import AnnotationStore, open_nofree_db

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_ERROR = 2
EXIT_TIMEOUT = 3

FIXTURE_PREFIX = "fixture:"
DEFAULT_EVAL_MODES = ",".join(INSTRUMENT_MODES)


# ============================================================================
# Helpers
# ============================================================================

def _read_source(spec: str) -> tuple[str, str]:
    """(text, filename) for a path, ``-`` (stdin) or ``fixture:NAME``."""
    if spec.startswith(FIXTURE_PREFIX):
        name = spec[len(FIXTURE_PREFIX):]
        try:
            return fixture_text(name), f"{name}{SIR_SUFFIX}"
        except KeyError as e:
            raise SafeIRError(e.args[0]) from None
    if spec == "-":
        return sys.stdin.read(), "<stdin>"
    path = Path(spec)
    try:
        return path.read_text(encoding="utf-8"), path.name
    except OSError as e:
        raise SafeIRError(f"cannot read {spec}: {e.strerror}") from None


def _load(spec: str, validate: bool = True) -> ProgramModule:
    text, filename = _read_source(spec)
    return parse_module(text, filename=filename, validate=validate)


def _write(text: str, output: str | None):
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _write_json(data: dict, output: str):
    Path(output).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def _config(args: argparse.Namespace) -> RuntimeConfig:
    config = RuntimeConfig(granule=args.granule)
    if getattr(args, "max_steps", None):
        config.max_steps = args.max_steps
    return config


def _nofree_path(args: argparse.Namespace) -> Path:
    return get_nofree_db_path(args.nofree_db)


def _parse_modes(text: str) -> list[str]:
    modes = [m.strip() for m in text.split(",") if m.strip()]
    unknown = [m for m in modes if m not in RUN_MODES]
    if unknown:
        raise SafeIRError(
            f"unknown mode(s) {', '.join(unknown)} (expected {', '.join(RUN_MODES)})"
        )
    return modes


# ============================================================================
# Commands
# ============================================================================

def cmd_parse(args: argparse.Namespace) -> int:
    m = _load(args.file, validate=False)
    diagnostics = validate_module(m)
    for d in diagnostics:
        print(d, file=sys.stderr)
    defined = len(m.defined_functions())
    print(f"{m.name}: {defined} defined functions, {m.instruction_count()} instructions, "
          f"{len(diagnostics)} diagnostics")
    return EXIT_FAILED if diagnostics else EXIT_OK


def cmd_print(args: argparse.Namespace) -> int:
    _write(print_module(_load(args.file)), args.output)
    return EXIT_OK


def cmd_instrument(args: argparse.Namespace) -> int:
    db = open_nofree_db(_nofree_path(args))
    out, stats = instrument(_load(args.file), args.mode, db)
    _write(print_module(out), args.output)
    if args.stats:
        _write_json(stats.to_dict(), args.stats)
    total = stats.aggregate
    print(
        f"{args.mode}: baseline={total.baseline} elided={total.elided} "
        f"added={total.added_total} remaining={total.remaining}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    m = _load(args.file)
    if args.mode != MODE_NONE:
        m, _ = instrument(m, args.mode, open_nofree_db(_nofree_path(args)))
    outcome = execute(m, args.entry, _config(args))
    if args.json == "-":
        print(json.dumps({"mode": args.mode, **outcome.to_dict()}, indent=2))
    else:
        if args.json:
            _write_json({"mode": args.mode, **outcome.to_dict()}, args.json)
        print(f"{outcome.verdict.value} (exit code {outcome.exit_code}, "
              f"{outcome.checks_executed} checks, {outcome.ensures} ensures, "
              f"{outcome.instructions_retired} instructions)")
        if outcome.violation is not None:
            print(outcome.violation, file=sys.stderr)
    if outcome.verdict is Verdict.VIOLATION:
        return EXIT_FAILED
    if outcome.verdict is Verdict.TIMEOUT:
        return EXIT_TIMEOUT
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    report = collect_stats(
        _load(args.file),
        db=open_nofree_db(_nofree_path(args)),
        entry=args.entry,
        config=_config(args),
    )
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(format_stats(report))
    return EXIT_OK


def cmd_gen_corpus(args: argparse.Namespace) -> int:
    cases = gen_corpus()
    manifest = write_corpus(cases, args.out)
    print(f"wrote {len(cases)} cases to {args.out} ({manifest.name})")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    modes = _parse_modes(args.modes)
    corpus = load_corpus(args.corpus) if args.corpus else gen_corpus()
    logger.info("evaluating %d cases in modes %s", len(corpus), ", ".join(modes))
    report = evaluate_parity(corpus, modes, _config(args))
    print(json.dumps(report.to_dict(), indent=2))
    print(report.table(), file=sys.stderr)
    if args.history:
        run_id = AnnotationStore(args.history).record_evaluation(
            report, str(args.corpus or "<generated>"), args.granule
        )
        print(f"recorded run {run_id} in {args.history}", file=sys.stderr)
    return report.exit_code


def cmd_history(args: argparse.Namespace) -> int:
    if not Path(args.db).exists():
        raise SafeIRError(f"no evaluation history at {args.db}")
    store = AnnotationStore(args.db)
    if args.case:
        if not args.mode:
            raise SafeIRError("--case needs --mode")
        for verdict in store.case_history(args.case, args.mode):
            print(verdict)
        return EXIT_OK
    if args.run is not None:
        data = store.describe_run(args.run, args.mode)
        if data is None:
            raise SafeIRError(f"no evaluation run {args.run} in {args.db}")
        print(json.dumps(data, indent=2))
        for regression in data["regressions"]:
            print(f"regression: {regression}", file=sys.stderr)
        return EXIT_FAILED if data["regressions"] else EXIT_OK
    for run in store.list_runs(args.limit):
        status = "PASS" if run.passed else "FAIL"
        print(f"{run.id}\t{run.started_at:%Y-%m-%d %H:%M:%S}\t{status}\t{run.case_count} cases"
              f"\t{','.join(run.mode_list)}\t{run.corpus}")
    return EXIT_OK


def _print_db(db) -> None:
    for name, entry in db.items():
        print(f"{name}\t{entry.verdict.value}\t{entry.unit}")


def cmd_nofree_compute(args: argparse.Namespace) -> int:
    path = _nofree_path(args)
    units = [_load(spec) for spec in args.files]
    db = compile_units(units, open_nofree_db(path))
    _print_db(db)
    if args.save:
        save_nofree_db(db, path)
        print(f"saved {len(db)} entries to {path}", file=sys.stderr)
    return EXIT_OK


def cmd_nofree_show(args: argparse.Namespace) -> int:
    _print_db(open_nofree_db(_nofree_path(args)))
    return EXIT_OK


def cmd_nofree_merge(args: argparse.Namespace) -> int:
    path = _nofree_path(args)
    db = open_nofree_db(path)
    for other in args.others:
        db = db.merge(load_nofree_db(other))
    save_nofree_db(db, path)
    _print_db(db)
    return EXIT_OK


# ============================================================================
# Argument parsing
# ============================================================================

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safeir",
        description="Sanitizer check hoisting on the .sir mini-IR.",
    )
    parser.add_argument("--version", action="version", version=f"safeir {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for INFO, -vv for DEBUG logging on stderr")
    parser.add_argument("--granule", type=int, default=DEFAULT_GRANULE,
                        help=f"tag granule in bytes (default {DEFAULT_GRANULE})")
    parser.add_argument("--nofree-db", default=None,
                        help="nofree database (default $SAFEIR_NOFREE_DB or ~/.safeir/nofree.tsv)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse and validate a module")
    p.add_argument("file")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("print", help="print a module in normalized form")
    p.add_argument("file")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_print)

    p = sub.add_parser("instrument", help="instrument a module")
    p.add_argument("file")
    p.add_argument("--mode", choices=INSTRUMENT_MODES, default=MODE_SAFEFFI)
    p.add_argument("-o", "--output")
    p.add_argument("--stats", default=None, metavar="JSON",
                   help="write per-function check statistics to this file")
    p.set_defaults(func=cmd_instrument)

    p = sub.add_parser("run", help="instrument and execute a module")
    p.add_argument("file")
    p.add_argument("--mode", choices=RUN_MODES, default=MODE_SAFEFFI)
    p.add_argument("--entry", default="main")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--json", nargs="?", const="-", default=None, metavar="OUT",
                   help="outcome as JSON, to OUT or (without OUT) to stdout")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("stats", help="check statistics for every mode")
    p.add_argument("file")
    p.add_argument("--entry", default=None, help="also execute from this function")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gen-corpus", help="write the FFI test corpus")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("evaluate", help="detection parity over the corpus")
    p.add_argument("--corpus", default=None, help="corpus directory (default: generate)")
    p.add_argument("--modes", default=DEFAULT_EVAL_MODES)
    p.add_argument("--history", default=None, help="SQLite database to append the run to")
    p.add_argument("--max-steps", type=int, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("history", help="read back recorded evaluation runs")
    p.add_argument("db", help="SQLite database written by evaluate --history")
    p.add_argument("--run", type=int, default=None, help="show one run with its case verdicts")
    p.add_argument("--case", default=None, help="verdicts of one case across runs")
    p.add_argument("--mode", choices=RUN_MODES, default=None)
    p.add_argument("--limit", type=int, default=20)
    p.set_defaults(func=cmd_history)

    p = sub.add_parser("nofree-db", help="inspect and update the nofree database")
    db_sub = p.add_subparsers(dest="db_command", required=True)
    q = db_sub.add_parser("compute", help="analyse one or more units")
    q.add_argument("files", nargs="+")
    q.add_argument("--save", action="store_true")
    q.set_defaults(func=cmd_nofree_compute)
    q = db_sub.add_parser("show", help="list stored verdicts")
    q.set_defaults(func=cmd_nofree_show)
    q = db_sub.add_parser("merge", help="merge other databases into this one")
    q.add_argument("others", nargs="+")
    q.set_defaults(func=cmd_nofree_merge)

    return parser


def _parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    return _build_parser().parse_args(argv)


def _configure_logging(verbosity: int):
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    args = _parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return args.func(args)
    except ModuleValidationError as e:
        for d in e.diagnostics:
            print(d, file=sys.stderr)
        return EXIT_ERROR
    except SafeIRError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
