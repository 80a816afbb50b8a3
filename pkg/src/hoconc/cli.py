"""Command-line front end: ``hoconc test FILE`` and ``hoconc corpus DIR``."""

from __future__ import annotations

import argparse
import re
import shlex
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .canonical import print_inputs
from .engine import DEFAULT_FUEL
from .export import JsonlWriter, PathTree, Tee
from .interp import BugKind
from .lang import ParseError, parse_program
from .search import BugFound, BudgetExceeded, SearchConfig, run
from .smt import ProtocolError, SolverConfig, SolverSpawnError, default_flags

EXIT_NO_BUG, EXIT_BUG, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3

_EXPECT = re.compile(r"^\s*;+\s*expect:\s*(bug|no-bug)\s*$", re.MULTILINE)


def _positive(kind):
    def conv(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    defaults = SearchConfig()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--solver", help="solver command (default: z3, or $HOCONC_SOLVER)")
    common.add_argument("--solver-timeout", type=_positive(float), default=defaults.solver.timeout,
                        help="seconds per solver query")
    common.add_argument("--max-iters", type=_positive(int), default=defaults.max_iterations)
    common.add_argument("--timeout", type=_positive(float), default=defaults.wall_clock,
                        help="wall-clock budget per program, in seconds")
    common.add_argument("--fuel", type=_positive(int), default=DEFAULT_FUEL, help="step budget per run")
    common.add_argument("--seed", type=int, default=defaults.seed,
                        help="0 starts numbers at 0; other values randomize starting numbers")
    common.add_argument("--verify-predictions", action="store_true",
                        help="check each solver-backed candidate's predicted path")
    common.add_argument("--count-stuck-as-bug", action="store_true",
                        help="also report runs that get stuck (e.g. applying a number)")

    parser = argparse.ArgumentParser(prog="hoconc", description="Concolic tester for higher-order programs.")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", parents=[common], help="search one program for an (error)")
    t.add_argument("file")
    t.add_argument("--trace", metavar="OUT.jsonl", help="write one JSON record per iteration")
    t.add_argument("--dot", metavar="OUT.dot", help="write the explored path tree")
    t.add_argument("--stats", action="store_true", help="print search counters")

    c = sub.add_parser("corpus", parents=[common], help="run every annotated program in a directory")
    c.add_argument("dir")
    c.add_argument("--jobs", type=_positive(int), default=1)
    c.add_argument("--trace-dir", metavar="DIR", help="write NAME.jsonl per program")
    c.add_argument("--timings", action="store_true", help="add a seconds column (not reproducible)")
    return parser


def config_from_args(args) -> SearchConfig:
    command = ()
    if args.solver:
        command = tuple(shlex.split(args.solver))
        if len(command) == 1:
            command += default_flags(command[0])
    return SearchConfig(
        max_iterations=args.max_iters,
        wall_clock=args.timeout,
        fuel=args.fuel,
        seed=args.seed,
        solver=SolverConfig(command, args.solver_timeout),
        verify_predictions=args.verify_predictions,
        count_stuck_as_bug=args.count_stuck_as_bug,
    )


def describe(report, p) -> list:
    if isinstance(report, BugFound):
        what = "error" if report.kind is BugKind.EXPLICIT_ERROR else "stuck state"
        lines = [f"bug found: {what} after {report.iterations} iterations"
                 f" (replay {'confirmed' if report.replay_confirmed else 'NOT confirmed'})"]
        lines += ["  " + line for line in print_inputs(report.store, p.input_names)]
        if report.trail:
            lines.append("trail: " + " ; ".join(" + ".join(step) for step in report.trail))
        return lines
    if isinstance(report, BudgetExceeded):
        return [f"no bug found: {report.reason} budget reached after {report.iterations} iterations"]
    return [f"no bug found: search exhausted after {report.iterations} iterations"]


def _stats_lines(s) -> list:
    return [
        f"solver calls {s.solver_calls}, cache hits {s.cache_hits}, sat {s.sat}, unsat {s.unsat}, unknown {s.unknown}",
        f"duplicates {s.duplicates}, pruned {s.pruned}",
        f"prediction violations {len(s.prediction_violations)}/{s.prediction_checks}, "
        f"model violations {len(s.model_violations)}/{s.model_checks}, "
        f"improper stores {len(s.properness_violations)}/{s.properness_checks}",
    ]


def _load(path: Path):
    text = path.read_text()
    return text, parse_program(text)


def cmd_test(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    path = Path(args.file)
    try:
        _, p = _load(path)
    except OSError as exc:
        print(f"hoconc: {exc}", file=err)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"hoconc: {path}: {exc}", file=err)
        return EXIT_USAGE
    cfg = config_from_args(args)
    tree = PathTree() if args.dot else None
    trace_fh = None
    try:
        if args.trace:
            trace_fh = open(args.trace, "w")
        observer = Tee(JsonlWriter(trace_fh) if trace_fh else None, tree)
        report = run(p, cfg, observer)
    except (SolverSpawnError, ProtocolError) as exc:
        print(f"hoconc: solver error: {exc}", file=err)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"hoconc: {exc}", file=err)
        return EXIT_USAGE
    finally:
        if trace_fh:
            trace_fh.close()
    if tree is not None:
        Path(args.dot).write_text(tree.to_dot())
    for line in describe(report, p):
        print(line, file=out)
    if args.stats:
        for line in _stats_lines(report.stats):
            print(line, file=out)
    return EXIT_BUG if isinstance(report, BugFound) else EXIT_NO_BUG


@dataclass
class Row:
    name: str
    expect: str | None
    verdict: str  # bug | no-bug | parse-error | solver-error
    iterations: int = 0
    seconds: float = 0.0
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.expect is not None and self.verdict == self.expect


def expectation(text: str) -> str | None:
    m = _EXPECT.search(text)
    return m.group(1) if m else None


def run_one(path: Path, cfg: SearchConfig, trace_dir: str | None = None) -> Row:
    start = time.perf_counter()
    try:
        text, p = _load(path)
    except (OSError, ParseError) as exc:
        return Row(path.name, None, "parse-error", detail=str(exc))
    expect = expectation(text)
    fh = open(Path(trace_dir) / (path.stem + ".jsonl"), "w") if trace_dir else None
    try:
        report = run(p, cfg, JsonlWriter(fh) if fh else None)
    except (SolverSpawnError, ProtocolError) as exc:
        return Row(path.name, expect, "solver-error", detail=str(exc))
    finally:
        if fh:
            fh.close()
    verdict = "bug" if isinstance(report, BugFound) else "no-bug"
    detail = ""
    if isinstance(report, BugFound):
        detail = ", ".join(print_inputs(report.store, p.input_names))
        if not report.replay_confirmed:
            verdict, detail = "unconfirmed", detail + " (replay failed)"
    elif isinstance(report, BudgetExceeded):
        detail = f"{report.reason} budget"
    return Row(path.name, expect, verdict, report.iterations, time.perf_counter() - start, detail)


def corpus_rows(directory: Path, cfg: SearchConfig, jobs: int = 1, trace_dir: str | None = None) -> list:
    files = sorted(directory.glob("*.sexp"))
    if jobs > 1 and len(files) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run_one, files, [cfg] * len(files), [trace_dir] * len(files)))
    return [run_one(f, cfg, trace_dir) for f in files]


def format_table(rows, timings: bool = False) -> list:
    header = ["program", "expect", "verdict", "iterations"] + (["seconds"] if timings else []) + ["status"]
    body = []
    for r in rows:
        cells = [r.name, r.expect or "-", r.verdict, str(r.iterations)]
        if timings:
            cells.append(f"{r.seconds:.2f}")
        cells.append("ok" if r.ok else "FAIL")
        body.append(cells)
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(header)]
    fmt = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    lines = [fmt(header)] + [fmt(b) for b in body]
    failed = sum(not r.ok for r in rows)
    lines.append(f"{len(rows)} programs, {len(rows) - failed} as expected, {failed} unexpected")
    return lines


def cmd_corpus(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    directory = Path(args.dir)
    if not directory.is_dir():
        print(f"hoconc: not a directory: {directory}", file=err)
        return EXIT_USAGE
    if args.trace_dir:
        Path(args.trace_dir).mkdir(parents=True, exist_ok=True)
    rows = corpus_rows(directory, config_from_args(args), args.jobs, args.trace_dir)
    for line in format_table(rows, args.timings):
        print(line, file=out)
    for r in rows:
        if not r.ok and r.detail:
            print(f"{r.name}: {r.detail}", file=err)
    if any(r.verdict == "solver-error" for r in rows):
        return EXIT_SOLVER
    if any(r.verdict == "parse-error" for r in rows):
        return EXIT_USAGE
    return EXIT_NO_BUG if all(r.ok for r in rows) else EXIT_BUG


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_NO_BUG
    if args.command == "test":
        return cmd_test(args)
    return cmd_corpus(args)


if __name__ == "__main__":
    sys.exit(main())
