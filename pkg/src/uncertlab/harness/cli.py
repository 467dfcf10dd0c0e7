"""The ``lab`` command."""

from __future__ import annotations

import argparse
import sys

from . import corpus_paths, emit_report, load_scenario, run_many, run_scenario
from .dsl import ScenarioSyntaxError, UnknownSystem
from .runner import RunFlags, ScenarioRuntimeError

EXIT_OK, EXIT_FAIL, EXIT_LOAD = 0, 1, 2


def _window(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected LO,HI") from None
    if not 0.0 <= lo < hi <= 1.0:
        raise argparse.ArgumentTypeError("need 0 <= LO < HI <= 1")
    return lo, hi


def _threshold(text: str) -> float:
    r = float(text)
    if not 0.0 < r <= 1.0:
        raise argparse.ArgumentTypeError("threshold must lie in (0, 1]")
    return r


def _flags_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--format", choices=("text", "lines"), default="text")
    p.add_argument("--assert-threshold", type=_threshold, default=0.95)
    p.add_argument("--depth-limit", type=int, default=64)
    p.add_argument("--overconfidence-window", type=_window, default=(0.05, 0.95))
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _flags_parser()
    parser = argparse.ArgumentParser(prog="lab", description="Run uncertainty-ascription scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run one scenario file")
    run.add_argument("file")
    sub.add_parser("corpus", parents=[common], help="run every bundled scenario")
    check = sub.add_parser("check", help="run the seeded oracle cross-checks")
    check.add_argument("--seed", type=int, default=0)
    return parser


def _flags(args) -> RunFlags:
    return RunFlags(args.assert_threshold, args.depth_limit, args.overconfidence_window)


def _run_one(path, args, out) -> int:
    try:
        scenario = load_scenario(path)
    except (OSError, ScenarioSyntaxError, UnknownSystem) as exc:
        print(f"lab: cannot load {path}: {exc}", file=sys.stderr)
        return EXIT_LOAD
    try:
        report = run_scenario(scenario, _flags(args))
    except ScenarioRuntimeError as exc:
        print(f"lab: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out.write(emit_report(report, args.format))
    return EXIT_OK if report.passed else EXIT_FAIL


def _run_corpus(args, out) -> int:
    try:
        scenarios = [load_scenario(p) for p in corpus_paths()]
    except (OSError, ScenarioSyntaxError, UnknownSystem) as exc:
        print(f"lab: cannot load corpus: {exc}", file=sys.stderr)
        return EXIT_LOAD
    try:
        reports = run_many(scenarios, _flags(args))
    except ScenarioRuntimeError as exc:
        print(f"lab: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for report in reports:
        out.write(emit_report(report, args.format))
    failed = [r.scenario for r in reports if not r.passed]
    if failed:
        print("lab: expectations failed in " + ", ".join(failed), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _run_checks(args, out) -> int:
    from ..checks import run_checks

    results = run_checks(args.seed)
    for r in results:
        out.write(r.line() + "\n")
    return EXIT_OK if all(r.ok for r in results) else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = sys.stdout
    if args.command == "run":
        return _run_one(args.file, args, out)
    if args.command == "corpus":
        return _run_corpus(args, out)
    return _run_checks(args, out)


if __name__ == "__main__":
    sys.exit(main())
